#pragma once

#include <array>
#include <string>

#include "gldm/decoder.hpp"

namespace gldm {
inline namespace GLDM_ABI {

enum class LossVariant { BceIou, Bce, BceDice, BceSsim };

LossVariant parse_loss_variant(const std::string& name);
std::string loss_variant_name(LossVariant variant);

enum class Reduction { Sum, Mean };

/// Binary cross-entropy on probabilities clamped to [1e-7, 1 - 1e-7].
/// Per image the pixels are summed (or averaged), then images are averaged.
Var bce_loss(const Var& probs, const Tensor& gt, Reduction reduction = Reduction::Sum);
/// Same quantity from logits, using the overflow-free form.
Var bce_with_logits(const Var& logits, const Tensor& gt, Reduction reduction = Reduction::Sum);

/// 1 - sum(SG) / (sum(S + G - SG) + 1e-7), averaged over the batch.
Var iou_loss(const Var& probs, const Tensor& gt);
/// 1 - 2 sum(SG) / (sum(S) + sum(G) + 1e-7), averaged over the batch.
Var dice_loss(const Var& probs, const Tensor& gt);
/// 1 - mean SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over the batch.
Var ssim_loss(const Var& probs, const Tensor& gt);

struct LossConfig {
  LossVariant variant = LossVariant::BceIou;
  std::array<real, 4> lambdas{real(0.8), real(0.6), real(0.4), real(0.2)};
  Reduction reduction = Reduction::Sum;
};

/// Per-level terms; `region` is the second term of the variant (IoU, Dice, SSIM or 0).
struct LossBreakdown {
  std::array<Var, 4> bce;
  std::array<Var, 4> region;
  Var total;

  double bce_value(int i) const { return bce[i].value()[0]; }
  double region_value(int i) const { return region[i].defined() ? region[i].value()[0] : 0.0; }
  double total_value() const { return total.value()[0]; }
};

/// Throws DataError unless every entry of `gt` is exactly 0 or 1.
void require_binary(const Tensor& gt);

/// Weighted deep-supervision loss. BCE reads the logits, the region term the maps.
LossBreakdown total_loss(const SaliencyOutput& outputs, const Tensor& gt,
                         const LossConfig& config = {});
/// Same, from four probability maps only.
LossBreakdown total_loss_from_maps(const std::array<Var, 4>& maps, const Tensor& gt,
                                   const LossConfig& config = {});

}  // namespace GLDM_ABI
}  // namespace gldm
