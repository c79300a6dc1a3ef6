#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "gldm/nn.hpp"

namespace gldm {
inline namespace GLDM_ABI {

enum class TransformerKind { PvtV2, PvtV1, Off };

TransformerKind parse_transformer_kind(const std::string& name);
std::string transformer_kind_name(TransformerKind kind);

/// Per-stage hyperparameters of the pyramid transformer (B2 profile by default).
struct PvtProfile {
  std::array<int, 4> depths{3, 4, 6, 3};
  std::array<int, 4> heads{1, 2, 5, 8};
  std::array<int, 4> mlp_ratios{8, 8, 4, 4};
  std::array<int, 4> sr_ratios{8, 4, 2, 1};
};

struct DecoderConfig {
  TransformerKind transformer = TransformerKind::PvtV2;
  bool reconstruction = true;
  std::array<index_t, 4> widths{64, 128, 320, 512};
  PvtProfile pvt;
  /// Input size the v1 position embeddings are laid out for; other sizes interpolate.
  index_t reference_size = 256;
  index_t ca_reduction = 16;
};

/// Four maps at input resolution. `logits` are the upsampled head outputs,
/// `maps` their sigmoid.
struct SaliencyOutput {
  std::array<Var, 4> logits;
  std::array<Var, 4> maps;
  const Var& final_map() const { return maps[0]; }
};

/// Spatial-reduction multi-head attention over (B, N, C) tokens.
class SpatialReductionAttention : public Module {
 public:
  SpatialReductionAttention(index_t dim, int heads, int sr_ratio, Rng& rng);
  Var forward(const Var& tokens, index_t h, index_t w);

 private:
  index_t dim_;
  int heads_, sr_;
  std::shared_ptr<Linear> q_, k_, v_, proj_;
  std::shared_ptr<Conv2d> sr_conv_;
  std::shared_ptr<LayerNorm> sr_norm_;
};

class TransformerBlock : public Module {
 public:
  TransformerBlock(index_t dim, int heads, int mlp_ratio, int sr_ratio, bool depthwise_mlp,
                   Rng& rng);
  Var forward(const Var& tokens, index_t h, index_t w);

 private:
  std::shared_ptr<LayerNorm> norm1_, norm2_;
  std::shared_ptr<SpatialReductionAttention> attn_;
  std::shared_ptr<Linear> fc1_, fc2_;
  std::shared_ptr<Conv2d> dwconv_;
};

/// One resolution-preserving transformer stage.
class TransformerStage : public Module {
 public:
  TransformerStage(TransformerKind kind, index_t dim, int depth, int heads, int mlp_ratio,
                   int sr_ratio, index_t reference_hw, Rng& rng);
  Var forward(const Var& x);
  index_t width() const { return dim_; }

 private:
  TransformerKind kind_;
  index_t dim_, reference_hw_;
  std::shared_ptr<Conv2d> patch_embed_;
  std::shared_ptr<LayerNorm> embed_norm_, out_norm_;
  Var pos_embed_;
  std::vector<std::shared_ptr<TransformerBlock>> blocks_;
};

/// Squeeze-excite channel attention with shared avg/max FC bottleneck.
class ChannelAttention : public Module {
 public:
  ChannelAttention(index_t channels, index_t reduction, Rng& rng);
  Var forward(const Var& x);

 private:
  std::shared_ptr<Linear> fc1_, fc2_;
};

/// Conv1 then Conv3, both Conv-BN-ReLU.
class ConvPair : public Module {
 public:
  ConvPair(index_t in_channels, index_t out_channels, Rng& rng);
  Var forward(const Var& x);

 private:
  std::shared_ptr<ConvBnRelu> conv1_, conv3_;
};

/// Conv3 (BN, ReLU) followed by a 1x1 projection to one logit channel.
class SaliencyHead : public Module {
 public:
  SaliencyHead(index_t channels, Rng& rng);
  Var forward(const Var& x);

 private:
  std::shared_ptr<ConvBnRelu> conv3_;
  std::shared_ptr<Conv2d> conv1_;
};

/// f_res = f_att * f_t + f_t.
Var residual_modulate(const Var& f_att, const Var& f_t);

/// Intermediate features of one decoder pass.
struct DecoderTrace {
  std::array<Var, 4> transformed, refined, attention, residual, out;
};

class Decoder : public Module {
 public:
  Decoder(const DecoderConfig& config, Rng& rng);

  SaliencyOutput forward(const std::array<Var, 4>& fused, index_t out_h, index_t out_w,
                         DecoderTrace* trace = nullptr);

  Var transformer_stage(int stage, const Var& fused);
  Var cascade_refine(int stage, const Var& f_t, const Var& fused);
  /// Stages are zero-based here; `refined` holds all four stage features.
  Var dense_aggregate(const std::array<Var, 4>& refined, int stage);
  std::array<Var, 4> progressive_decode(const std::array<Var, 4>& residual);
  SaliencyOutput saliency_heads(const std::array<Var, 4>& features, index_t out_h, index_t out_w);

  const DecoderConfig& config() const { return config_; }
  bool has_transformer() const { return config_.transformer != TransformerKind::Off; }

 private:
  DecoderConfig config_;
  std::array<std::shared_ptr<TransformerStage>, 4> trans_;
  std::array<std::shared_ptr<ConvPair>, 4> cascade_;
  std::array<std::shared_ptr<ChannelAttention>, 3> ca_;
  std::array<std::shared_ptr<ConvPair>, 3> aggregate_;
  std::array<std::shared_ptr<ConvPair>, 4> progressive_;
  std::array<std::shared_ptr<SaliencyHead>, 4> heads_;
};

}  // namespace GLDM_ABI
}  // namespace gldm
