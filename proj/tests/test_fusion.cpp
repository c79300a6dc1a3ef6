#include <gtest/gtest.h>

#include <set>

#include "gldm/errors.hpp"
#include "gldm/fusion.hpp"
#include "support/fusion_oracle.hpp"

using namespace gldm;
using namespace gldm::testing;

namespace {

constexpr int kC = 8, kH = 4, kW = 4;

constexpr double kOracleTol = 1e-9;

Tensor randn(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::randn(std::move(s), rng);
}

FusionConfig small_config(FusionMode mode = FusionMode::Parallel) {
  FusionConfig cfg;
  cfg.mode = mode;
  cfg.fc_reduction = 4;
  return cfg;
}

}  // namespace

TEST(MomentNormalize, PointValuesAndOddness) {
  Var x(Tensor({5}, std::vector<real>{4, -9, 0, 1e-3f, -2.5f}));
  const Tensor y = moment_normalize(x).value();
  EXPECT_NEAR(y[0], 0.5, 1e-6);
  EXPECT_NEAR(y[1], -1.0 / 3.0, 1e-6);
  EXPECT_EQ(y[2], 0);
  const Tensor neg = moment_normalize(ops::scale(x, -1)).value();
  for (index_t i = 0; i < 5; ++i) EXPECT_EQ(neg[i], -y[i]);
  const Tensor pos = moment_normalize(x, real(0.5)).value();
  EXPECT_NEAR(pos[0], 2.0, 1e-6);
  EXPECT_NEAR(pos[1], -3.0, 1e-6);
}

TEST(L2Normalize, PrintedFormAndHomogeneity) {
  Var x(Tensor({1, 2}, std::vector<real>{3, 4}));
  const Tensor y = l2_normalize(x, 1, 2).value();
  EXPECT_NEAR(y[0], 0.12, 1e-7);
  EXPECT_NEAR(y[1], 0.16, 1e-7);
  const Tensor y1 = l2_normalize(x, 1, 1).value();
  EXPECT_NEAR(y1[0], 0.6, 1e-6);
  const Tensor zero = l2_normalize(Var(Tensor({1, 3})), 1, 2).value();
  for (index_t i = 0; i < 3; ++i) EXPECT_EQ(zero[i], 0);

  Var r(randn({2, 3, 5}, 3));
  const Tensor base = l2_normalize(r, 2).value();
  const Tensor scaled = l2_normalize(ops::scale(r, 4), 2).value();
  for (index_t i = 0; i < base.numel(); ++i) EXPECT_NEAR(scaled[i], base[i] / 4, 1e-5);
  EXPECT_THROW(l2_normalize(r, 2, 3), ConfigError);
}

// Loop-oracle comparisons run in the double build only: near zero the moment
// normalization amplifies single-precision rounding far beyond any fixed
// tolerance, which says nothing about the formulas.
#ifdef GLDM_REAL_DOUBLE
TEST(FusionOracle, PositionAndChannelMapsMatchLoops) {
  for (int trial = 0; trial < 20; ++trial) {
    for (FusionMode mode : {FusionMode::Parallel, FusionMode::Serial}) {
      FusionConfig cfg = small_config(mode);
      Rng rng(100 + trial);
      FusionStage stage(kC, kC, cfg, rng);
      randomize_norm_state(stage, 200 + trial);
      const Tensor rgb = randn({1, kC, kH, kW}, 300 + trial), dep = randn({1, kC, kH, kW}, 400 + trial);
      FusionTrace tr;
      const Var fused = stage.fuse(Var(rgb), Var(dep), &tr);
      const OracleParams p = oracle_params(stage);
      const Vec vr = to_vec(rgb), vd = to_vec(dep);

      const Vec sp = oracle_spatial_fuse(vr, vd, kC, kH, kW, p);
      EXPECT_LT(rel_error(tr.f_sp.value(), sp), kOracleTol);
      const PmfOracle pmf = oracle_pmf(vr, vd, to_vec(tr.f_sp.value()), kC, kH, kW, cfg, &p);
      EXPECT_LT(rel_error(tr.ms_rgb.value(), pmf.ms_rgb), kOracleTol);
      EXPECT_LT(rel_error(tr.ms_d.value(), pmf.ms_d), kOracleTol);
      EXPECT_LT(rel_error(tr.ms_fu.value(), pmf.ms_fu), kOracleTol);
      EXPECT_LT(rel_error(tr.p_rgb.value(), pmf.p_rgb), kOracleTol);
      EXPECT_LT(rel_error(tr.p_d.value(), pmf.p_d), kOracleTol);
      EXPECT_LT(rel_error(tr.p_fu.value(), pmf.p_fu), kOracleTol);
      EXPECT_LT(rel_error(tr.f_pmf.value(), pmf.out), kOracleTol);

      const Vec ch = mode == FusionMode::Serial ? to_vec(tr.f_pmf.value())
                                                : oracle_channel_fuse(vr, vd, kC, kH, kW, p);
      if (mode == FusionMode::Parallel) {
        EXPECT_LT(rel_error(tr.f_ch.value(), ch), kOracleTol);
      }
      const CmfOracle cmf = oracle_cmf(vr, vd, ch, kC, kH, kW, cfg, &p);
      EXPECT_LT(rel_error(tr.mc_rgb.value(), cmf.mc_rgb), kOracleTol);
      EXPECT_LT(rel_error(tr.mc_d.value(), cmf.mc_d), kOracleTol);
      EXPECT_LT(rel_error(tr.mc_fu.value(), cmf.mc_fu), kOracleTol);
      EXPECT_LT(rel_error(tr.c_rgb.value(), cmf.c_rgb), kOracleTol);
      EXPECT_LT(rel_error(tr.c_d.value(), cmf.c_d), kOracleTol);
      EXPECT_LT(rel_error(tr.c_fu.value(), cmf.c_fu), kOracleTol);
      EXPECT_LT(rel_error(tr.f_cmf.value(), cmf.out), kOracleTol);

      Vec expect = cmf.out;
      if (mode == FusionMode::Parallel) {
        for (std::size_t i = 0; i < expect.size(); ++i) expect[i] += pmf.out[i];
      }
      EXPECT_LT(rel_error(fused.value(), expect), kOracleTol);
    }
  }
}

TEST(FusionOracle, AlternativeNormalizationReadings) {
  for (real e : {real(-0.5), real(0.5)}) {
    for (int power : {1, 2}) {
      FusionConfig cfg = small_config();
      cfg.moment_exponent = e;
      cfg.l2_power = power;
      Rng rng(7);
      FusionStage stage(kC, kC, cfg, rng);
      randomize_norm_state(stage, 8);
      const Tensor rgb = randn({1, kC, kH, kW}, 9), dep = randn({1, kC, kH, kW}, 10);
      FusionTrace tr;
      stage.fuse(Var(rgb), Var(dep), &tr);
      const OracleParams p = oracle_params(stage);
      const PmfOracle pmf = oracle_pmf(to_vec(rgb), to_vec(dep), to_vec(tr.f_sp.value()), kC, kH,
                                       kW, cfg, &p);
      const CmfOracle cmf = oracle_cmf(to_vec(rgb), to_vec(dep), to_vec(tr.f_ch.value()), kC, kH,
                                       kW, cfg, &p);
      EXPECT_LT(rel_error(tr.f_pmf.value(), pmf.out), kOracleTol) << e << " " << power;
      EXPECT_LT(rel_error(tr.f_cmf.value(), cmf.out), kOracleTol) << e << " " << power;
    }
  }
}

#endif

TEST(FusionOracle, ScalarCases) {
  FusionConfig cfg;
  const PmfOracle pmf = oracle_pmf({1}, {1}, {4}, 1, 1, 1, cfg);
  EXPECT_NEAR(pmf.ms_rgb[0], 0.5, 1e-6);
  // Vectorized path on the same one-pixel case.
  Var sp(Tensor({1, 1, 1}, std::vector<real>{4})), f(Tensor({1, 1, 1}, std::vector<real>{1}));
  EXPECT_NEAR(moment_normalize(ops::matmul(sp, f, true, false)).value()[0], 0.5, 1e-6);
}

TEST(FusionStage, MutualitySymmetryUnderBranchSwap) {
  FusionConfig cfg = small_config();
  Rng rng(11);
  FusionStage stage(kC, kC, cfg, rng);
  stage.set_training(false);
  const Tensor a = randn({1, kC, kH, kW}, 12), b = randn({1, kC, kH, kW}, 13);
  FusionTrace ab, ba;
  stage.fuse(Var(a), Var(b), &ab);
  stage.fuse(Var(b), Var(a), &ba);
  // Addition commutes exactly, so the pre-fused map and everything built from
  // it swap bit for bit.
  EXPECT_TRUE(bitwise_equal(ab.f_sp.value(), ba.f_sp.value()));
  EXPECT_TRUE(bitwise_equal(ab.ms_rgb.value(), ba.ms_d.value()));
  EXPECT_TRUE(bitwise_equal(ab.ms_d.value(), ba.ms_rgb.value()));
  EXPECT_TRUE(bitwise_equal(ab.p_rgb.value(), ba.p_d.value()));
  EXPECT_TRUE(bitwise_equal(ab.p_d.value(), ba.p_rgb.value()));
  EXPECT_LT(max_abs_diff(ab.p_fu.value(), ba.p_fu.value()), 1e-6);
}

TEST(FusionStage, ZeroInputsGiveConstantOutputs) {
  FusionConfig cfg = small_config();
  Rng rng(14);
  FusionStage stage(kC, kC, cfg, rng);
  randomize_norm_state(stage, 15);
  FusionTrace tr;
  const Tensor zero({1, kC, kH, kW});
  const Var out = stage.fuse(Var(zero), Var(zero), &tr);
  for (const Var* v : {&tr.ms_rgb, &tr.p_rgb, &tr.p_fu, &tr.mc_d, &tr.c_fu}) {
    for (real x : v->value().values()) EXPECT_EQ(x, 0);
  }
  // Bias-only maps: constant away from the border the zero-padded 3x3 conv sees.
  const Tensor& o = out.value();
  for (index_t c = 0; c < kC; ++c) {
    const real ref = o.at(0, c, 1, 1);
    for (index_t y = 1; y < kH - 1; ++y)
      for (index_t x = 1; x < kW - 1; ++x) EXPECT_NEAR(o.at(0, c, y, x), ref, 1e-6);
  }
}

TEST(FusionStage, CancellingBranchesGiveConstantSpatialWeight) {
  FusionConfig cfg = small_config(FusionMode::PmfOnly);
  Rng rng(16);
  FusionStage stage(kC, kC, cfg, rng);
  stage.set_training(false);
  const Tensor a = randn({1, kC, kH, kW}, 17);
  FusionTrace tr;
  stage.fuse(Var(a), ops::scale(Var(a), -1), &tr);
  const Tensor& w = tr.w_sp.value();
  for (index_t i = 1; i < w.numel(); ++i) EXPECT_NEAR(w[i], w[0], 1e-6);
}

TEST(FusionStage, ModesBuildOnlyWhatTheyUse) {
  auto names = [](FusionMode mode) {
    Rng rng(1);
    FusionStage s(kC, kC, small_config(mode), rng);
    std::set<std::string> top;
    for (const auto& nv : s.named_parameters()) top.insert(nv.name.substr(0, nv.name.find('.')));
    return top;
  };
  using S = std::set<std::string>;
  EXPECT_EQ(names(FusionMode::Parallel), (S{"reduce_rgb", "reduce_depth", "spatial", "pmf", "channel", "cmf"}));
  EXPECT_EQ(names(FusionMode::Serial), (S{"reduce_rgb", "reduce_depth", "spatial", "pmf", "cmf"}));
  EXPECT_EQ(names(FusionMode::PmfOnly), (S{"reduce_rgb", "reduce_depth", "spatial", "pmf"}));
  EXPECT_EQ(names(FusionMode::CmfOnly), (S{"reduce_rgb", "reduce_depth", "channel", "cmf"}));
  EXPECT_EQ(names(FusionMode::ConcatOnly), (S{"reduce_rgb", "reduce_depth", "concat"}));
}

TEST(FusionStage, PmfOnlyOutputIsThePmfBranch) {
  Rng rng(18);
  FusionStage stage(kC, kC, small_config(FusionMode::PmfOnly), rng);
  FusionTrace tr;
  const Var out = stage.fuse(Var(randn({1, kC, kH, kW}, 19)), Var(randn({1, kC, kH, kW}, 20)), &tr);
  EXPECT_TRUE(bitwise_equal(out.value(), tr.f_pmf.value()));
  EXPECT_FALSE(tr.f_cmf.defined());
}

TEST(FusionStage, ReducesRawFeaturesAndKeepsSpatialSize) {
  Rng rng(21);
  FusionStage stage(48, 16, small_config(), rng);
  const Var out = stage.forward(Var(randn({2, 48, 6, 5}, 22)), Var(randn({2, 48, 6, 5}, 23)));
  EXPECT_EQ(out.shape(), (Shape{2, 16, 6, 5}));
  EXPECT_TRUE(all_finite(out.value()));
}

TEST(FusionStage, Errors) {
  Rng rng(24);
  EXPECT_THROW(FusionStage(8, 0, small_config(), rng), ConfigError);
  EXPECT_THROW(parse_fusion_mode("sideways"), ConfigError);
  for (auto m : {"parallel", "serial", "pmf-only", "cmf-only", "concat-only"}) {
    EXPECT_EQ(fusion_mode_name(parse_fusion_mode(m)), m);
  }
  FusionConfig cfg = small_config();
  cfg.max_attention_pixels = 15;
  FusionStage capped(kC, kC, cfg, rng);
  EXPECT_THROW(capped.fuse(Var(randn({1, kC, 4, 4}, 1)), Var(randn({1, kC, 4, 4}, 2))), ConfigError);
  FusionStage stage(kC, kC, small_config(), rng);
  EXPECT_THROW(stage.fuse(Var(randn({1, kC, 4, 4}, 1)), Var(randn({1, kC, 4, 3}, 2))), ShapeError);
  EXPECT_THROW(stage.fuse(Var(randn({1, 4, 4, 4}, 1)), Var(randn({1, 4, 4, 4}, 2))), ShapeError);
}
