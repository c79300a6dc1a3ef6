#include "gldm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace {

constexpr double kProbEps = 1e-7;
constexpr double kRatioEps = 1e-7;

void require_match(const Var& s, const Tensor& gt, const char* what) {
  if (s.shape() != gt.shape()) {
    throw ShapeError(std::string(what) + ": prediction " + shape_str(s.shape()) +
                     " vs ground truth " + shape_str(gt.shape()));
  }
  if (s.shape().empty()) throw ShapeError(std::string(what) + ": empty prediction");
}

// Images are the leading axis; everything after it is one image.
std::pair<index_t, index_t> batch_layout(const Shape& shape) {
  const index_t batch = shape.size() >= 4 ? shape[0] : 1;
  return {batch, shape_numel(shape) / batch};
}

// Per-pixel loss f(s, g) with derivative df/ds, summed per image and averaged over images.
template <class F, class D>
Var pixel_loss(const Var& s, const Tensor& gt, Reduction reduction, F f, D df) {
  const auto [batch, per] = batch_layout(s.shape());
  const double norm = 1.0 / batch / (reduction == Reduction::Mean ? per : 1);
  double acc = 0;
  const real* sv = s.value().data();
  const real* gv = gt.data();
  for (index_t i = 0; i < batch * per; ++i) acc += f(double(sv[i]), double(gv[i]));
  Tensor y({1}, static_cast<real>(acc * norm));
  auto g_copy = std::make_shared<Tensor>(gt);
  return make_result(std::move(y), {s}, [g_copy, norm, df](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    real* d = in.grad_buffer().data();
    const double go = self.grad[0] * norm;
    const real* sv = in.value.data();
    const real* gv = g_copy->data();
    for (index_t i = 0; i < in.value.numel(); ++i) d[i] += static_cast<real>(go * df(double(sv[i]), double(gv[i])));
  });
}

Var gaussian_window() {
  constexpr int kSize = 11;
  constexpr double kSigma = 1.5;
  double g[kSize], total = 0;
  for (int i = 0; i < kSize; ++i) {
    const double x = i - kSize / 2;
    g[i] = std::exp(-x * x / (2 * kSigma * kSigma));
    total += g[i];
  }
  Tensor w({1, 1, kSize, kSize});
  for (int i = 0; i < kSize; ++i)
    for (int j = 0; j < kSize; ++j) w[i * kSize + j] = static_cast<real>(g[i] * g[j] / (total * total));
  return Var(std::move(w));
}

}  // namespace

LossVariant parse_loss_variant(const std::string& name) {
  if (name == "bce+iou") return LossVariant::BceIou;
  if (name == "bce") return LossVariant::Bce;
  if (name == "bce+dice") return LossVariant::BceDice;
  if (name == "bce+ssim") return LossVariant::BceSsim;
  throw ConfigError("unknown loss.variant '" + name + "' (expected bce+iou, bce, bce+dice or bce+ssim)");
}

std::string loss_variant_name(LossVariant variant) {
  switch (variant) {
    case LossVariant::BceIou: return "bce+iou";
    case LossVariant::Bce: return "bce";
    case LossVariant::BceDice: return "bce+dice";
    case LossVariant::BceSsim: return "bce+ssim";
  }
  return "bce+iou";
}

void require_binary(const Tensor& gt) {
  for (real v : gt.values()) {
    if (v != 0 && v != 1) throw DataError("ground truth must be binary, found value " + std::to_string(v));
  }
}

Var bce_loss(const Var& probs, const Tensor& gt, Reduction reduction) {
  require_match(probs, gt, "bce_loss");
  require_binary(gt);
  return pixel_loss(
      probs, gt, reduction,
      [](double s, double g) {
        const double p = std::clamp(s, kProbEps, 1 - kProbEps);
        return -(g * std::log(p) + (1 - g) * std::log(1 - p));
      },
      [](double s, double g) {
        if (s < kProbEps || s > 1 - kProbEps) return 0.0;
        return -g / s + (1 - g) / (1 - s);
      });
}

Var bce_with_logits(const Var& logits, const Tensor& gt, Reduction reduction) {
  require_match(logits, gt, "bce_with_logits");
  require_binary(gt);
  return pixel_loss(
      logits, gt, reduction,
      [](double x, double g) { return std::max(x, 0.0) - x * g + std::log1p(std::exp(-std::fabs(x))); },
      [](double x, double g) {
        const double s = x >= 0 ? 1 / (1 + std::exp(-x)) : std::exp(x) / (1 + std::exp(x));
        return s - g;
      });
}

Var iou_loss(const Var& probs, const Tensor& gt) {
  require_match(probs, gt, "iou_loss");
  const auto [batch, per] = batch_layout(probs.shape());
  std::vector<double> inter(batch, 0), uni(batch, 0);
  const real* s = probs.value().data();
  const real* g = gt.data();
  double total = 0;
  for (index_t b = 0; b < batch; ++b) {
    for (index_t i = b * per; i < (b + 1) * per; ++i) {
      inter[b] += double(s[i]) * g[i];
      uni[b] += double(s[i]) + g[i] - double(s[i]) * g[i];
    }
    total += 1 - inter[b] / (uni[b] + kRatioEps);
  }
  Tensor y({1}, static_cast<real>(total / batch));
  auto g_copy = std::make_shared<Tensor>(gt);
  return make_result(std::move(y), {probs}, [=](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    real* d = in.grad_buffer().data();
    const real* gv = g_copy->data();
    const double go = self.grad[0] / batch;
    for (index_t b = 0; b < batch; ++b) {
      const double u = uni[b] + kRatioEps;
      for (index_t i = b * per; i < (b + 1) * per; ++i) {
        // d(I/U)/ds = (g U - I (1 - g)) / U^2
        const double dr = (gv[i] * u - inter[b] * (1 - gv[i])) / (u * u);
        d[i] += static_cast<real>(-go * dr);
      }
    }
  });
}

Var dice_loss(const Var& probs, const Tensor& gt) {
  require_match(probs, gt, "dice_loss");
  const auto [batch, per] = batch_layout(probs.shape());
  std::vector<double> inter(batch, 0), den(batch, 0);
  const real* s = probs.value().data();
  const real* g = gt.data();
  double total = 0;
  for (index_t b = 0; b < batch; ++b) {
    for (index_t i = b * per; i < (b + 1) * per; ++i) {
      inter[b] += double(s[i]) * g[i];
      den[b] += double(s[i]) + g[i];
    }
    den[b] += kRatioEps;
    total += 1 - 2 * inter[b] / den[b];
  }
  Tensor y({1}, static_cast<real>(total / batch));
  auto g_copy = std::make_shared<Tensor>(gt);
  return make_result(std::move(y), {probs}, [=](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    real* d = in.grad_buffer().data();
    const real* gv = g_copy->data();
    const double go = self.grad[0] / batch;
    for (index_t b = 0; b < batch; ++b) {
      for (index_t i = b * per; i < (b + 1) * per; ++i) {
        const double dr = (2 * gv[i] * den[b] - 2 * inter[b]) / (den[b] * den[b]);
        d[i] += static_cast<real>(-go * dr);
      }
    }
  });
}

Var ssim_loss(const Var& probs, const Tensor& gt) {
  require_match(probs, gt, "ssim_loss");
  if (probs.shape().size() != 4 || probs.dim(1) != 1) {
    throw ShapeError("ssim_loss expects (B, 1, H, W), got " + shape_str(probs.shape()));
  }
  const real c1 = real(0.01 * 0.01), c2 = real(0.03 * 0.03);
  const Var w = gaussian_window();
  const Var none;
  auto blur = [&](const Var& v) { return ops::conv2d(v, w, none, 1, 5); };
  const Var g(gt);
  Var mu_x = blur(probs), mu_y = blur(g);
  Var mu_xx = ops::mul(mu_x, mu_x), mu_yy = ops::mul(mu_y, mu_y), mu_xy = ops::mul(mu_x, mu_y);
  Var var_x = ops::sub(blur(ops::mul(probs, probs)), mu_xx);
  Var var_y = ops::sub(blur(ops::mul(g, g)), mu_yy);
  Var cov = ops::sub(blur(ops::mul(probs, g)), mu_xy);
  Var num = ops::mul(ops::add_scalar(ops::scale(mu_xy, 2), c1), ops::add_scalar(ops::scale(cov, 2), c2));
  Var den = ops::mul(ops::add_scalar(ops::add(mu_xx, mu_yy), c1),
                     ops::add_scalar(ops::add(var_x, var_y), c2));
  // Every image has the same pixel count, so the global mean is the mean of per-image means.
  return ops::add_scalar(ops::scale(ops::mean(ops::div(num, den)), -1), 1);
}

LossBreakdown total_loss_from_maps(const std::array<Var, 4>& maps, const Tensor& gt,
                                   const LossConfig& config) {
  SaliencyOutput out;
  out.maps = maps;
  return total_loss(out, gt, config);
}

LossBreakdown total_loss(const SaliencyOutput& outputs, const Tensor& gt, const LossConfig& config) {
  for (int i = 0; i < 4; ++i) {
    if (!outputs.maps[i].defined()) throw ShapeError("total_loss needs four prediction maps");
  }
  require_binary(gt);
  LossBreakdown br;
  Var total;
  for (int i = 0; i < 4; ++i) {
    const Var& map = outputs.maps[i];
    br.bce[i] = outputs.logits[i].defined() ? bce_with_logits(outputs.logits[i], gt, config.reduction)
                                            : bce_loss(map, gt, config.reduction);
    Var level = br.bce[i];
    switch (config.variant) {
      case LossVariant::BceIou: br.region[i] = iou_loss(map, gt); break;
      case LossVariant::BceDice: br.region[i] = dice_loss(map, gt); break;
      case LossVariant::BceSsim: br.region[i] = ssim_loss(map, gt); break;
      case LossVariant::Bce: break;
    }
    if (br.region[i].defined()) level = ops::add(level, br.region[i]);
    Var weighted = ops::scale(level, config.lambdas[i]);
    total = total.defined() ? ops::add(total, weighted) : weighted;
  }
  br.total = total;
  return br;
}

}  // namespace GLDM_ABI
}  // namespace gldm
