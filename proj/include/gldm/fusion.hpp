#pragma once

#include <array>
#include <memory>
#include <string>

#include "gldm/nn.hpp"

namespace gldm {
inline namespace GLDM_ABI {

enum class FusionMode { Parallel, Serial, PmfOnly, CmfOnly, ConcatOnly };

FusionMode parse_fusion_mode(const std::string& name);
std::string fusion_mode_name(FusionMode mode);

struct FusionConfig {
  FusionMode mode = FusionMode::Parallel;
  std::array<index_t, 4> widths{64, 128, 320, 512};
  /// Largest H*W a position attention map may cover.
  index_t max_attention_pixels = 4096;
  /// Exponent of the signed power in moment_normalize (-0.5 or +0.5).
  real moment_exponent = real(-0.5);
  /// Power of the norm in l2_normalize's denominator (1 or 2).
  int l2_power = 2;
  index_t fc_reduction = 16;
};

/// sign(x) * (|x| + 1e-6)^exponent, elementwise; zero stays zero.
Var moment_normalize(const Var& x, real exponent = real(-0.5));

/// x / (||x||^power + 1e-6) along `axis`, independently for every other index.
Var l2_normalize(const Var& x, int axis, int power = 2);

/// Intermediate maps of one fusion pass, filled when a trace is requested.
/// Attention maps are (B, N, N) for position and (B, C, C) for channel;
/// P and C maps are (B, C, N).
struct FusionTrace {
  Var f_rgb, f_d;
  Var w_sp, f_sp;
  Var ms_rgb, ms_d, ms_fu;
  Var p_rgb, p_d, p_fu;
  Var f_pmf;
  Var w_ch, f_ch;
  Var mc_rgb, mc_d, mc_fu;
  Var c_rgb, c_d, c_fu;
  Var f_cmf;
  Var fused;
};

/// 1x1 then 3x3 Conv-BN-ReLU down to the stage's fusion width.
class ChannelReducer : public Module {
 public:
  ChannelReducer(index_t in_channels, index_t width, Rng& rng);
  Var forward(const Var& x);

 private:
  std::shared_ptr<ConvBnRelu> conv1_, conv3_;
};

/// Cross-modal spatial attention pre-fusion.
class SpatialFuse : public Module {
 public:
  SpatialFuse(index_t channels, Rng& rng);
  Var forward(const Var& f_rgb, const Var& f_d, FusionTrace* trace = nullptr);

 private:
  std::shared_ptr<ConvBnRelu> weight_conv_, out_conv_;
};

/// Cross-modal channel attention pre-fusion.
class ChannelFuse : public Module {
 public:
  ChannelFuse(index_t channels, index_t reduction, Rng& rng);
  Var forward(const Var& f_rgb, const Var& f_d, FusionTrace* trace = nullptr);

 private:
  std::shared_ptr<Linear> fc1_, fc2_;
  std::shared_ptr<ConvBnRelu> out_conv_;
};

class PositionMutualFusion : public Module {
 public:
  PositionMutualFusion(index_t channels, const FusionConfig& config, Rng& rng);
  Var forward(const Var& f_rgb, const Var& f_d, const Var& f_sp, FusionTrace* trace = nullptr);

 private:
  FusionConfig config_;
  std::shared_ptr<ConvBnRelu> conv1_, conv3_;
};

class ChannelMutualFusion : public Module {
 public:
  ChannelMutualFusion(index_t channels, const FusionConfig& config, Rng& rng);
  Var forward(const Var& f_rgb, const Var& f_d, const Var& f_ch, FusionTrace* trace = nullptr);

 private:
  FusionConfig config_;
  std::shared_ptr<ConvBnRelu> conv1_, conv3_;
};

/// One stage of the dual mutual learning module, from raw encoder features
/// of both branches to the fused map. Only the submodules the mode uses are built.
class FusionStage : public Module {
 public:
  FusionStage(index_t in_channels, index_t width, const FusionConfig& config, Rng& rng);

  Var forward(const Var& f_rgb_raw, const Var& f_d_raw, FusionTrace* trace = nullptr);
  /// Fusion of already reduced features.
  Var fuse(const Var& f_rgb, const Var& f_d, FusionTrace* trace = nullptr);

  index_t width() const { return width_; }
  FusionMode mode() const { return config_.mode; }

 private:
  FusionConfig config_;
  index_t width_;
  std::shared_ptr<ChannelReducer> reduce_rgb_, reduce_d_;
  std::shared_ptr<SpatialFuse> spatial_;
  std::shared_ptr<PositionMutualFusion> pmf_;
  std::shared_ptr<ChannelFuse> channel_;
  std::shared_ptr<ChannelMutualFusion> cmf_;
  std::shared_ptr<ConvBnRelu> concat_conv_;
};

}  // namespace GLDM_ABI
}  // namespace gldm
