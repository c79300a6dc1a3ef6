#include <gtest/gtest.h>

#include <filesystem>

#include <opencv2/imgcodecs.hpp>

#include "gldm/errors.hpp"
#include "gldm/metrics.hpp"
#include "support/fixtures.hpp"
#include "support/metric_reference.hpp"

using namespace gldm;
using namespace gldm::testing;
namespace fs = std::filesystem;

namespace {

Map2d to_map(const RefMap& r) {
  Map2d m(r.h, r.w);
  m.values = r.v;
  return m;
}

Map2d constant(index_t h, index_t w, double v) { return Map2d(h, w, v); }

void write_gray(const fs::path& path, const Map2d& m) {
  cv::Mat img(static_cast<int>(m.height), static_cast<int>(m.width), CV_8UC1);
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x)
      img.at<std::uint8_t>(y, x) = cv::saturate_cast<std::uint8_t>(std::lround(255 * m.at(y, x)));
  fs::create_directories(path.parent_path());
  cv::imwrite(path.string(), img);
}

}  // namespace

TEST(MetricsOracle, FrozenFixturesMatchReference) {
  for (const MetricFixture& fx : metric_fixtures()) {
    SCOPED_TRACE(fx.name);
    const Map2d s = to_map(fx.pred), g = to_map(fx.gt);
    EXPECT_NEAR(mae(s, g), ref_mae(fx.pred, fx.gt), 1e-12);
    EXPECT_NEAR(s_measure(s, g), ref_s_measure(fx.pred, fx.gt), 1e-12);
    const auto e = e_measure_curve(s, g);
    const auto re = ref_e_curve(fx.pred, fx.gt);
    for (int k = 0; k < 256; ++k) EXPECT_NEAR(e[k], re[k], 1e-12) << "k=" << k;
    EXPECT_NEAR(e_measure(s, g), *std::max_element(re.begin(), re.end()), 1e-12);
    const ThresholdCurve f = f_measure_curve(s, g);
    const RefPR rf = ref_pr(fx.pred, fx.gt);
    for (int k = 0; k < 256; ++k) {
      EXPECT_NEAR(f.precision[k], rf.precision[k], 1e-12) << "k=" << k;
      EXPECT_NEAR(f.recall[k], rf.recall[k], 1e-12) << "k=" << k;
      EXPECT_NEAR(f.fmeasure[k], rf.f[k], 1e-12) << "k=" << k;
    }
    EXPECT_NEAR(f.f_max, rf.f_max, 1e-12);
  }
}

TEST(MetricsOracle, RandomMapsMatchReference) {
  std::uint64_t st = 77;
  for (int trial = 0; trial < 10; ++trial) {
    RefMap p{8 + trial, 12, {}}, g{8 + trial, 12, {}};
    for (int i = 0; i < p.h * p.w; ++i) {
      p.v.push_back(fixture_uniform(st));
      g.v.push_back(fixture_uniform(st) > 0.6 ? 1 : 0);
    }
    const Map2d s = to_map(p), gm = to_map(g);
    EXPECT_NEAR(mae(s, gm), ref_mae(p, g), 1e-12);
    EXPECT_NEAR(s_measure(s, gm), ref_s_measure(p, g), 1e-12);
    const auto re = ref_e_curve(p, g);
    EXPECT_NEAR(e_measure(s, gm), *std::max_element(re.begin(), re.end()), 1e-12);
    EXPECT_NEAR(f_measure_curve(s, gm).f_max, ref_pr(p, g).f_max, 1e-12);
  }
}

TEST(Metrics, PerfectPrediction) {
  for (const MetricFixture& fx : metric_fixtures()) {
    const Map2d g = to_map(fx.gt);
    bool has_fg = false, has_bg = false;
    for (double v : g.values) (v > 0.5 ? has_fg : has_bg) = true;
    SCOPED_TRACE(fx.name);
    EXPECT_EQ(mae(g, g), 0);
    EXPECT_NEAR(s_measure(g, g), 1.0, 1e-6);
    EXPECT_NEAR(e_measure(g, g), 1.0, 1e-6);
    if (has_fg) {
      EXPECT_NEAR(f_measure_curve(g, g).f_max, 1.0, 1e-12);
    }
    (void)has_bg;
  }
}

TEST(Metrics, HandComputedCases) {
  EXPECT_NEAR(mae(constant(4, 4, 0.5), constant(4, 4, 0)), 0.5, 1e-15);

  // Uniform 0.4 against a half-foreground mask.
  Map2d g(4, 4);
  for (index_t i = 0; i < 8; ++i) g.values[i] = 1;
  const ThresholdCurve c = f_measure_curve(constant(4, 4, 0.4), g);
  const double expected = 1.3 * 0.5 / (0.3 * 0.5 + 1);
  EXPECT_NEAR(c.f_max, expected, 1e-12);
  EXPECT_NEAR(c.fmeasure[102], expected, 1e-12);  // 0.4 * 255 = 102
  EXPECT_EQ(c.fmeasure[103], 0);
  EXPECT_EQ(f_measure_curve(constant(4, 4, 0), g).fmeasure[1], 0);

  // Inverted prediction: structure near zero; E is 0 except at k = 0 where
  // everything is foreground and the alignment term vanishes.
  Map2d inv(4, 4);
  for (index_t i = 0; i < 16; ++i) inv.values[i] = 1 - g.values[i];
  EXPECT_NEAR(s_measure(inv, g), 0.0, 1e-6);
  const auto e = e_measure_curve(inv, g);
  EXPECT_NEAR(*std::min_element(e.begin(), e.end()), 0.0, 1e-12);
  EXPECT_NEAR(e_measure(inv, g), 0.25, 1e-12);
}

TEST(Metrics, RecallIsMonotoneInThreshold) {
  for (const MetricFixture& fx : metric_fixtures()) {
    const ThresholdCurve c = f_measure_curve(to_map(fx.pred), to_map(fx.gt));
    for (int k = 1; k < 256; ++k) EXPECT_LE(c.recall[k], c.recall[k - 1]) << fx.name << " k=" << k;
  }
}

TEST(Metrics, GlobalMeasuresIgnorePixelOrder) {
  const MetricFixture fx = metric_fixtures()[0];
  Map2d s = to_map(fx.pred), g = to_map(fx.gt), sp = s, gp = g;
  // Same permutation applied to both maps.
  const index_t n = s.size();
  for (index_t i = 0; i < n; ++i) {
    const index_t j = (i * 37 + 11) % n;
    sp.values[j] = s.values[i];
    gp.values[j] = g.values[i];
  }
  EXPECT_NEAR(mae(sp, gp), mae(s, g), 1e-15);
  EXPECT_NEAR(f_measure_curve(sp, gp).f_max, f_measure_curve(s, g).f_max, 1e-15);
}

TEST(Metrics, ShapeMismatchIsAnError) {
  EXPECT_THROW(mae(Map2d(2, 2), Map2d(2, 3)), ShapeError);
  EXPECT_THROW(s_measure(Map2d(2, 2), Map2d(3, 2)), ShapeError);
  EXPECT_THROW(e_measure(Map2d(2, 2), Map2d(3, 2)), ShapeError);
}

TEST(Metrics, Normalization) {
  Map2d m(1, 3);
  m.values = {0.2, 0.6, 1.0};
  const Map2d n = minmax_normalize(m);
  EXPECT_NEAR(n.values[0], 0, 1e-15);
  EXPECT_NEAR(n.values[1], 0.5, 1e-12);
  for (double v : minmax_normalize(Map2d(2, 2, 0.7)).values) EXPECT_EQ(v, 0.7);
  Map2d raw(1, 3);
  raw.values = {0.0, 128 / 255.0, 1.0};
  const Map2d b = binarize_gt(raw);
  EXPECT_EQ(b.values, (std::vector<double>{0, 1, 1}));
  // Same-size resize is a bit-exact pass-through.
  EXPECT_EQ(resize_map(m, 1, 3).values, m.values);
  EXPECT_EQ(resize_map(m, 4, 6).height, 4);
}

TEST(EvaluateDataset, PredictionEqualToTruthScoresPerfectly) {
  TempDir dir;
  const auto fixtures = metric_fixtures();
  for (const auto& fx : fixtures) write_gray(dir / "gt" / (std::string(fx.name) + ".png"), to_map(fx.gt));
  const MetricReport r = evaluate_dataset((dir / "gt").string(), (dir / "gt").string());
  EXPECT_EQ(r.n_images, static_cast<index_t>(fixtures.size()));
  EXPECT_EQ(r.n_empty_gt, 1);
  EXPECT_NEAR(r.mae, 0, 1e-12);
  EXPECT_NEAR(r.s_measure, 1, 1e-6);
  EXPECT_NEAR(r.f_max, 1, 1e-12);
  EXPECT_NEAR(r.e_max, 1, 1e-6);
}

TEST(EvaluateDataset, TwoImageSetMatchesPerImageOracles) {
  TempDir dir;
  const auto fixtures = metric_fixtures();
  std::vector<const MetricFixture*> used{&fixtures[0], &fixtures[4]};
  double mae_sum = 0, s_sum = 0;
  std::array<double, 256> e_sum{}, f_sum{};
  for (const MetricFixture* fx : used) {
    // Round-trip through 8 bits and the min-max normalization the evaluator applies.
    Map2d p = to_map(fx->pred);
    for (double& v : p.values) v = std::lround(255 * v) / 255.0;
    write_gray(dir / "pred" / (std::string(fx->name) + ".png"), p);
    write_gray(dir / "gt" / (std::string(fx->name) + ".png"), to_map(fx->gt));
    const Map2d pn = minmax_normalize(p);
    const RefMap rp{16, 16, pn.values};
    mae_sum += ref_mae(rp, fx->gt);
    s_sum += ref_s_measure(rp, fx->gt);
    const auto e = ref_e_curve(rp, fx->gt);
    const RefPR f = ref_pr(rp, fx->gt);
    for (int k = 0; k < 256; ++k) {
      e_sum[k] += e[k];
      f_sum[k] += f.f[k];
    }
  }
  const MetricReport r = evaluate_dataset((dir / "pred").string(), (dir / "gt").string());
  EXPECT_NEAR(r.mae, mae_sum / 2, 1e-12);
  EXPECT_NEAR(r.s_measure, s_sum / 2, 1e-12);
  double e_max = 0, f_max = 0;
  for (int k = 0; k < 256; ++k) {
    e_max = std::max(e_max, e_sum[k] / 2);
    f_max = std::max(f_max, f_sum[k] / 2);
  }
  EXPECT_NEAR(r.e_max, e_max, 1e-12);
  EXPECT_NEAR(r.f_max, f_max, 1e-12);
}

TEST(EvaluateDataset, ResizesPredictionsToTruth) {
  TempDir dir;
  Map2d g(16, 16), p(8, 8, 0.0);
  for (index_t y = 4; y < 12; ++y)
    for (index_t x = 4; x < 12; ++x) g.at(y, x) = 1;
  for (index_t y = 2; y < 6; ++y)
    for (index_t x = 2; x < 6; ++x) p.at(y, x) = 1;
  write_gray(dir / "gt" / "a.png", g);
  write_gray(dir / "pred" / "a.png", p);
  const MetricReport r = evaluate_dataset((dir / "pred").string(), (dir / "gt").string());
  EXPECT_EQ(r.n_images, 1);
  EXPECT_GT(r.s_measure, 0.7);
  EXPECT_LT(r.mae, 0.1);
}

TEST(EvaluateDataset, Errors) {
  TempDir dir;
  EXPECT_THROW(evaluate_dataset((dir / "p").string(), (dir / "missing").string()), DataError);
  fs::create_directories(dir / "gt");
  fs::create_directories(dir / "pred");
  EXPECT_THROW(evaluate_dataset((dir / "pred").string(), (dir / "gt").string()), DataError);
  write_gray(dir / "gt" / "x.png", Map2d(4, 4, 1));
  try {
    evaluate_dataset((dir / "pred").string(), (dir / "gt").string());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("x.png"), std::string::npos);
  }
}

TEST(Report, FilesAndTableRow) {
  TempDir dir;
  MetricAccumulator acc;
  for (const auto& fx : metric_fixtures()) acc.add(to_map(fx.pred), to_map(fx.gt));
  const MetricReport r = acc.report();
  write_report(r, (dir / "report.txt").string());
  write_pr_csv(r, (dir / "pr.csv").string());
  render_pr_curve(r, (dir / "pr.png").string());
  const auto lines = read_lines(dir / "pr.csv");
  ASSERT_EQ(lines.size(), 257u);
  EXPECT_EQ(lines[0], "threshold,precision,recall,fmeasure");
  const std::string report = read_file(dir / "report.txt");
  for (const char* key : {"mae = ", "s_measure = ", "f_max = ", "e_measure = ", "e_measure_mean = ", "n_images = 8", "n_empty_gt = 1"}) {
    EXPECT_NE(report.find(key), std::string::npos) << key;
  }
  EXPECT_TRUE(fs::exists(dir / "pr.png"));
  const std::string row = table_row(r, "toy");
  EXPECT_EQ(row.rfind("toy E_xi=", 0), 0u);
  EXPECT_LT(row.find("E_xi"), row.find("S_alpha"));
  EXPECT_LT(row.find("S_alpha"), row.find("F_beta"));
  EXPECT_LT(row.find("F_beta"), row.find("MAE"));
  for (double v : {r.mae, r.s_measure, r.f_max, r.e_max, r.e_mean}) {
    EXPECT_GE(v, 0);
    EXPECT_LE(v, 1);
  }
}
