#include "gldm/fusion.hpp"

#include <cmath>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace {

constexpr double kNormEps = 1e-6;

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// (B, C, H, W) -> (B, C, N)
Var flatten_spatial(const Var& x) {
  return ops::reshape(x, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)});
}

Var unflatten_spatial(const Var& x, const Shape& like) {
  return ops::reshape(x, like);
}

}  // namespace

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "parallel") return FusionMode::Parallel;
  if (name == "serial") return FusionMode::Serial;
  if (name == "pmf-only") return FusionMode::PmfOnly;
  if (name == "cmf-only") return FusionMode::CmfOnly;
  if (name == "concat-only") return FusionMode::ConcatOnly;
  throw ConfigError("unknown fusion mode '" + name +
                    "' (expected parallel, serial, pmf-only, cmf-only or concat-only)");
}

std::string fusion_mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::Parallel: return "parallel";
    case FusionMode::Serial: return "serial";
    case FusionMode::PmfOnly: return "pmf-only";
    case FusionMode::CmfOnly: return "cmf-only";
    case FusionMode::ConcatOnly: return "concat-only";
  }
  return "parallel";
}

Var moment_normalize(const Var& x, real exponent) {
  const double e = exponent;
  Tensor y(x.shape());
  const real* src = x.value().data();
  real* dst = y.data();
  const index_t n = y.numel();
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < n; ++i) {
    const double v = src[i];
    if (v == 0) {
      dst[i] = 0;
    } else {
      const double mag = std::pow(std::fabs(v) + kNormEps, e);
      dst[i] = static_cast<real>(v > 0 ? mag : -mag);
    }
  }
  return make_result(std::move(y), {x}, [e](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    real* d = in.grad_buffer().data();
    const real* src = in.value.data();
    const real* go = self.grad.data();
    const index_t n = in.value.numel();
#pragma omp parallel for schedule(static)
    for (index_t i = 0; i < n; ++i) {
      const double v = src[i];
      // sign(x) is locally constant away from zero; at zero the map is flat by convention.
      if (v != 0) d[i] += static_cast<real>(go[i] * e * std::pow(std::fabs(v) + kNormEps, e - 1));
    }
  });
}

Var l2_normalize(const Var& x, int axis, int power) {
  if (power != 1 && power != 2) throw ConfigError("l2 power must be 1 or 2");
  const Shape& s = x.shape();
  const int rank = static_cast<int>(s.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("l2_normalize: axis out of range");
  index_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < rank; ++i) inner *= s[i];
  const index_t len = s[axis];

  Tensor y(s);
  // Per-fibre norms, kept for the backward pass.
  auto norms = std::make_shared<std::vector<double>>(outer * inner);
  const real* src = x.value().data();
#pragma omp parallel for schedule(static)
  for (index_t f = 0; f < outer * inner; ++f) {
    const index_t o = f / inner, in = f % inner;
    const index_t base = o * len * inner + in;
    double sq = 0;
    for (index_t k = 0; k < len; ++k) sq += double(src[base + k * inner]) * src[base + k * inner];
    const double norm = std::sqrt(sq);
    (*norms)[f] = norm;
    const double denom = (power == 2 ? sq : norm) + kNormEps;
    for (index_t k = 0; k < len; ++k) y[base + k * inner] = static_cast<real>(src[base + k * inner] / denom);
  }
  return make_result(std::move(y), {x}, [=](Node& self) {
    Node& nx = *self.inputs[0];
    if (!nx.requires_grad) return;
    real* d = nx.grad_buffer().data();
    const real* xv = nx.value.data();
    const real* go = self.grad.data();
#pragma omp parallel for schedule(static)
    for (index_t f = 0; f < outer * inner; ++f) {
      const index_t o = f / inner, in = f % inner;
      const index_t base = o * len * inner + in;
      const double norm = (*norms)[f];
      const double denom = (power == 2 ? norm * norm : norm) + kNormEps;
      double gx = 0;
      for (index_t k = 0; k < len; ++k) gx += double(go[base + k * inner]) * xv[base + k * inner];
      // d||x||^2/dx = 2x and d||x||/dx = x/||x||.
      double coef = 0;
      if (power == 2) {
        coef = 2.0 * gx / (denom * denom);
      } else if (norm > 0) {
        coef = gx / (denom * denom * norm);
      }
      for (index_t k = 0; k < len; ++k) {
        const index_t at = base + k * inner;
        d[at] += static_cast<real>(go[at] / denom - coef * xv[at]);
      }
    }
  });
}

ChannelReducer::ChannelReducer(index_t in_channels, index_t width, Rng& rng) {
  if (width <= 0) throw ConfigError("fusion width must be positive");
  conv1_ = add_module("conv1", std::make_shared<ConvBnRelu>(in_channels, width, 1, rng));
  conv3_ = add_module("conv3", std::make_shared<ConvBnRelu>(width, width, 3, rng));
}

Var ChannelReducer::forward(const Var& x) { return conv3_->forward(conv1_->forward(x)); }

SpatialFuse::SpatialFuse(index_t channels, Rng& rng) {
  weight_conv_ = add_module("weight_conv", std::make_shared<ConvBnRelu>(2, 1, 7, rng));
  out_conv_ = add_module("out_conv", std::make_shared<ConvBnRelu>(channels, channels, 1, rng));
}

Var SpatialFuse::forward(const Var& f_rgb, const Var& f_d, FusionTrace* trace) {
  require_same_shape(f_rgb, f_d, "spatial_fuse");
  Var f_a = ops::add(f_rgb, f_d);
  Var pooled = ops::concat({ops::channel_max(f_a), ops::channel_mean(f_a)}, 1);
  Var w_sp = weight_conv_->forward(pooled);
  Var f_sp = out_conv_->forward(ops::add(ops::mul_spatial(f_a, w_sp), f_a));
  if (trace) {
    trace->w_sp = w_sp;
    trace->f_sp = f_sp;
  }
  return f_sp;
}

ChannelFuse::ChannelFuse(index_t channels, index_t reduction, Rng& rng) {
  if (reduction <= 0) throw ConfigError("fc reduction must be positive");
  const index_t hidden = std::max<index_t>(1, 2 * channels / reduction);
  fc1_ = add_module("fc1", std::make_shared<Linear>(2 * channels, hidden, rng));
  fc2_ = add_module("fc2", std::make_shared<Linear>(hidden, 2 * channels, rng));
  out_conv_ = add_module("out_conv", std::make_shared<ConvBnRelu>(2 * channels, channels, 1, rng));
}

Var ChannelFuse::forward(const Var& f_rgb, const Var& f_d, FusionTrace* trace) {
  require_same_shape(f_rgb, f_d, "channel_fuse");
  Var f_c = ops::concat({f_rgb, f_d}, 1);
  auto fc = [&](const Var& v) { return fc2_->forward(ops::relu(fc1_->forward(v))); };
  Var w_ch = ops::add(fc(ops::global_max_pool(f_c)), fc(ops::global_avg_pool(f_c)));
  Var f_ch = out_conv_->forward(ops::mul_channel(f_c, w_ch));
  if (trace) {
    trace->w_ch = w_ch;
    trace->f_ch = f_ch;
  }
  return f_ch;
}

PositionMutualFusion::PositionMutualFusion(index_t channels, const FusionConfig& config, Rng& rng)
    : config_(config) {
  conv1_ = add_module("conv1", std::make_shared<ConvBnRelu>(3 * channels, channels, 1, rng));
  conv3_ = add_module("conv3", std::make_shared<ConvBnRelu>(channels, channels, 3, rng));
}

Var PositionMutualFusion::forward(const Var& f_rgb, const Var& f_d, const Var& f_sp,
                                  FusionTrace* trace) {
  require_same_shape(f_rgb, f_d, "position_mutual_fusion");
  require_same_shape(f_rgb, f_sp, "position_mutual_fusion");
  const index_t n = f_rgb.dim(2) * f_rgb.dim(3);
  if (n > config_.max_attention_pixels) {
    throw ConfigError("position attention over " + std::to_string(n) +
                      " pixels exceeds fusion.max_attention_pixels=" +
                      std::to_string(config_.max_attention_pixels) +
                      "; lower the input resolution or raise the limit");
  }
  const real e = config_.moment_exponent;
  const int p = config_.l2_power;
  Var rgb = flatten_spatial(f_rgb), dep = flatten_spatial(f_d), sp = flatten_spatial(f_sp);

  // Ms[i][j] pairs position i of the pre-fused map with position j of a branch.
  Var ms_rgb = moment_normalize(ops::matmul(sp, rgb, true, false), e);
  Var ms_d = moment_normalize(ops::matmul(sp, dep, true, false), e);
  Var ms_fu = ops::add(ms_rgb, ms_d);
  Var p_rgb = l2_normalize(ops::matmul(rgb, ms_rgb), 2, p);
  Var p_d = l2_normalize(ops::matmul(dep, ms_d), 2, p);
  Var p_fu = l2_normalize(ops::matmul(sp, ms_fu), 2, p);

  const Shape& like = f_rgb.shape();
  Var cat = ops::concat({unflatten_spatial(p_rgb, like), unflatten_spatial(p_d, like),
                         unflatten_spatial(p_fu, like)}, 1);
  Var out = conv3_->forward(conv1_->forward(cat));
  if (trace) {
    trace->ms_rgb = ms_rgb;
    trace->ms_d = ms_d;
    trace->ms_fu = ms_fu;
    trace->p_rgb = p_rgb;
    trace->p_d = p_d;
    trace->p_fu = p_fu;
    trace->f_pmf = out;
  }
  return out;
}

ChannelMutualFusion::ChannelMutualFusion(index_t channels, const FusionConfig& config, Rng& rng)
    : config_(config) {
  conv1_ = add_module("conv1", std::make_shared<ConvBnRelu>(3 * channels, channels, 1, rng));
  conv3_ = add_module("conv3", std::make_shared<ConvBnRelu>(channels, channels, 3, rng));
}

Var ChannelMutualFusion::forward(const Var& f_rgb, const Var& f_d, const Var& f_ch,
                                 FusionTrace* trace) {
  require_same_shape(f_rgb, f_d, "channel_mutual_fusion");
  require_same_shape(f_rgb, f_ch, "channel_mutual_fusion");
  const real e = config_.moment_exponent;
  const int p = config_.l2_power;
  Var rgb = flatten_spatial(f_rgb), dep = flatten_spatial(f_d), ch = flatten_spatial(f_ch);

  Var mc_rgb = moment_normalize(ops::matmul(rgb, ch, false, true), e);
  Var mc_d = moment_normalize(ops::matmul(dep, ch, false, true), e);
  Var mc_fu = ops::add(mc_rgb, mc_d);
  Var c_rgb = l2_normalize(ops::matmul(mc_rgb, rgb), 1, p);
  Var c_d = l2_normalize(ops::matmul(mc_d, dep), 1, p);
  Var c_fu = l2_normalize(ops::matmul(mc_fu, ch), 1, p);

  const Shape& like = f_rgb.shape();
  Var cat = ops::concat({unflatten_spatial(c_rgb, like), unflatten_spatial(c_d, like),
                         unflatten_spatial(c_fu, like)}, 1);
  Var out = conv3_->forward(conv1_->forward(cat));
  if (trace) {
    trace->mc_rgb = mc_rgb;
    trace->mc_d = mc_d;
    trace->mc_fu = mc_fu;
    trace->c_rgb = c_rgb;
    trace->c_d = c_d;
    trace->c_fu = c_fu;
    trace->f_cmf = out;
  }
  return out;
}

FusionStage::FusionStage(index_t in_channels, index_t width, const FusionConfig& config, Rng& rng)
    : config_(config), width_(width) {
  if (width <= 0) throw ConfigError("fusion width must be positive");
  reduce_rgb_ = add_module("reduce_rgb", std::make_shared<ChannelReducer>(in_channels, width, rng));
  reduce_d_ = add_module("reduce_depth", std::make_shared<ChannelReducer>(in_channels, width, rng));
  const FusionMode mode = config.mode;
  const bool use_pmf = mode == FusionMode::Parallel || mode == FusionMode::Serial ||
                       mode == FusionMode::PmfOnly;
  const bool use_cmf = mode == FusionMode::Parallel || mode == FusionMode::Serial ||
                       mode == FusionMode::CmfOnly;
  if (use_pmf) {
    spatial_ = add_module("spatial", std::make_shared<SpatialFuse>(width, rng));
    pmf_ = add_module("pmf", std::make_shared<PositionMutualFusion>(width, config, rng));
  }
  // In serial mode the PMF output stands in for the channel pre-fusion.
  if (use_cmf && mode != FusionMode::Serial) {
    channel_ = add_module("channel", std::make_shared<ChannelFuse>(width, config.fc_reduction, rng));
  }
  if (use_cmf) cmf_ = add_module("cmf", std::make_shared<ChannelMutualFusion>(width, config, rng));
  if (mode == FusionMode::ConcatOnly) {
    concat_conv_ = add_module("concat", std::make_shared<ConvBnRelu>(2 * width, width, 1, rng));
  }
}

Var FusionStage::forward(const Var& f_rgb_raw, const Var& f_d_raw, FusionTrace* trace) {
  require_same_shape(f_rgb_raw, f_d_raw, "fuse_stage");
  return fuse(reduce_rgb_->forward(f_rgb_raw), reduce_d_->forward(f_d_raw), trace);
}

Var FusionStage::fuse(const Var& f_rgb, const Var& f_d, FusionTrace* trace) {
  require_same_shape(f_rgb, f_d, "fuse_stage");
  if (f_rgb.dim(1) != width_) {
    throw ShapeError("fuse_stage: expected " + std::to_string(width_) + " channels, got " +
                     shape_str(f_rgb.shape()));
  }
  if (trace) {
    trace->f_rgb = f_rgb;
    trace->f_d = f_d;
  }
  Var out;
  switch (config_.mode) {
    case FusionMode::ConcatOnly:
      out = concat_conv_->forward(ops::concat({f_rgb, f_d}, 1));
      break;
    case FusionMode::PmfOnly:
      out = pmf_->forward(f_rgb, f_d, spatial_->forward(f_rgb, f_d, trace), trace);
      break;
    case FusionMode::CmfOnly:
      out = cmf_->forward(f_rgb, f_d, channel_->forward(f_rgb, f_d, trace), trace);
      break;
    case FusionMode::Serial: {
      Var f_pmf = pmf_->forward(f_rgb, f_d, spatial_->forward(f_rgb, f_d, trace), trace);
      out = cmf_->forward(f_rgb, f_d, f_pmf, trace);
      break;
    }
    case FusionMode::Parallel: {
      Var f_pmf = pmf_->forward(f_rgb, f_d, spatial_->forward(f_rgb, f_d, trace), trace);
      Var f_cmf = cmf_->forward(f_rgb, f_d, channel_->forward(f_rgb, f_d, trace), trace);
      out = ops::add(f_pmf, f_cmf);
      break;
    }
  }
  if (trace) trace->fused = out;
  return out;
}

}  // namespace GLDM_ABI
}  // namespace gldm
