#include "gldm/decoder.hpp"

#include <cmath>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace {

void require_stage(int stage) {
  if (stage < 0 || stage > 3) throw ShapeError("decoder stage index out of range");
}

// (B, N, C) split into heads as (B*heads, N, C/heads).
Var split_heads(const Var& t, int heads) {
  const index_t b = t.dim(0), n = t.dim(1), c = t.dim(2);
  Var x = ops::reshape(t, {b, n, heads, c / heads});
  x = ops::permute(x, {0, 2, 1, 3});
  return ops::reshape(x, {b * heads, n, c / heads});
}

Var merge_heads(const Var& t, int heads) {
  const index_t bh = t.dim(0), n = t.dim(1), d = t.dim(2);
  Var x = ops::reshape(t, {bh / heads, heads, n, d});
  x = ops::permute(x, {0, 2, 1, 3});
  return ops::reshape(x, {bh / heads, n, heads * d});
}

}  // namespace

TransformerKind parse_transformer_kind(const std::string& name) {
  if (name == "pvtv2") return TransformerKind::PvtV2;
  if (name == "pvtv1") return TransformerKind::PvtV1;
  if (name == "off") return TransformerKind::Off;
  throw ConfigError("unknown decoder.transformer '" + name + "' (expected pvtv2, pvtv1 or off)");
}

std::string transformer_kind_name(TransformerKind kind) {
  switch (kind) {
    case TransformerKind::PvtV2: return "pvtv2";
    case TransformerKind::PvtV1: return "pvtv1";
    case TransformerKind::Off: return "off";
  }
  return "pvtv2";
}

SpatialReductionAttention::SpatialReductionAttention(index_t dim, int heads, int sr_ratio, Rng& rng)
    : dim_(dim), heads_(heads), sr_(sr_ratio) {
  if (heads <= 0 || dim % heads != 0) {
    throw ConfigError("attention width " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  q_ = add_module("q", std::make_shared<Linear>(dim, dim, rng));
  k_ = add_module("k", std::make_shared<Linear>(dim, dim, rng));
  v_ = add_module("v", std::make_shared<Linear>(dim, dim, rng));
  proj_ = add_module("proj", std::make_shared<Linear>(dim, dim, rng));
  if (sr_ > 1) {
    sr_conv_ = add_module("sr", std::make_shared<Conv2d>(dim, dim, sr_, sr_, 0, rng));
    sr_norm_ = add_module("norm", std::make_shared<LayerNorm>(dim));
  }
}

Var SpatialReductionAttention::forward(const Var& tokens, index_t h, index_t w) {
  Var kv_src = tokens;
  if (sr_ > 1) {
    if (h % sr_ != 0 || w % sr_ != 0) {
      throw ShapeError("spatial reduction ratio " + std::to_string(sr_) + " does not divide " +
                       std::to_string(h) + "x" + std::to_string(w));
    }
    Var reduced = sr_conv_->forward(ops::from_tokens(tokens, h, w));
    kv_src = sr_norm_->forward(ops::to_tokens(reduced));
  }
  Var q = split_heads(q_->forward(tokens), heads_);
  Var k = split_heads(k_->forward(kv_src), heads_);
  Var v = split_heads(v_->forward(kv_src), heads_);
  const real scale = real(1) / std::sqrt(static_cast<real>(dim_ / heads_));
  Var attn = ops::softmax(ops::scale(ops::matmul(q, k, false, true), scale));
  return proj_->forward(merge_heads(ops::matmul(attn, v), heads_));
}

TransformerBlock::TransformerBlock(index_t dim, int heads, int mlp_ratio, int sr_ratio,
                                   bool depthwise_mlp, Rng& rng) {
  const index_t hidden = dim * mlp_ratio;
  norm1_ = add_module("norm1", std::make_shared<LayerNorm>(dim));
  attn_ = add_module("attn", std::make_shared<SpatialReductionAttention>(dim, heads, sr_ratio, rng));
  norm2_ = add_module("norm2", std::make_shared<LayerNorm>(dim));
  fc1_ = add_module("mlp.fc1", std::make_shared<Linear>(dim, hidden, rng));
  if (depthwise_mlp) {
    dwconv_ = add_module("mlp.dwconv", std::make_shared<Conv2d>(hidden, hidden, 3, 1, 1, rng, true, hidden));
  }
  fc2_ = add_module("mlp.fc2", std::make_shared<Linear>(hidden, dim, rng));
}

Var TransformerBlock::forward(const Var& tokens, index_t h, index_t w) {
  Var x = ops::add(tokens, attn_->forward(norm1_->forward(tokens), h, w));
  Var m = fc1_->forward(norm2_->forward(x));
  if (dwconv_) m = ops::to_tokens(dwconv_->forward(ops::from_tokens(m, h, w)));
  m = fc2_->forward(ops::gelu(m));
  return ops::add(x, m);
}

TransformerStage::TransformerStage(TransformerKind kind, index_t dim, int depth, int heads,
                                   int mlp_ratio, int sr_ratio, index_t reference_hw, Rng& rng)
    : kind_(kind), dim_(dim), reference_hw_(reference_hw) {
  const bool v2 = kind == TransformerKind::PvtV2;
  // Stride-1 embeddings keep the stage resolution: overlapping 3x3 for v2, 1x1 for v1.
  patch_embed_ = add_module("patch_embed.proj",
                            std::make_shared<Conv2d>(dim, dim, v2 ? 3 : 1, 1, v2 ? 1 : 0, rng));
  embed_norm_ = add_module("patch_embed.norm", std::make_shared<LayerNorm>(dim));
  if (!v2) {
    std::normal_distribution<double> dist(0.0, 0.02);
    Tensor pos({1, reference_hw * reference_hw, dim});
    for (auto& v : pos.values()) v = static_cast<real>(dist(rng));
    pos_embed_ = add_parameter("pos_embed", std::move(pos));
  }
  for (int b = 0; b < depth; ++b) {
    blocks_.push_back(add_module("block." + std::to_string(b),
                                 std::make_shared<TransformerBlock>(dim, heads, mlp_ratio, sr_ratio, v2, rng)));
  }
  out_norm_ = add_module("norm", std::make_shared<LayerNorm>(dim));
}

Var TransformerStage::forward(const Var& x) {
  if (x.shape().size() != 4 || x.dim(1) != dim_) {
    throw ShapeError("transformer stage of width " + std::to_string(dim_) + " got " +
                     shape_str(x.shape()));
  }
  const index_t h = x.dim(2), w = x.dim(3);
  Var t = embed_norm_->forward(ops::to_tokens(patch_embed_->forward(x)));
  if (pos_embed_.defined()) {
    Var pos = pos_embed_;
    if (h != reference_hw_ || w != reference_hw_) {
      pos = ops::from_tokens(pos, reference_hw_, reference_hw_);
      pos = ops::to_tokens(ops::resize_bilinear(pos, h, w));
    }
    t = ops::add_broadcast_batch(t, pos);
  }
  for (auto& block : blocks_) t = block->forward(t, h, w);
  return ops::from_tokens(out_norm_->forward(t), h, w);
}

ChannelAttention::ChannelAttention(index_t channels, index_t reduction, Rng& rng) {
  if (reduction <= 0) throw ConfigError("channel attention reduction must be positive");
  const index_t hidden = std::max<index_t>(1, channels / reduction);
  fc1_ = add_module("fc1", std::make_shared<Linear>(channels, hidden, rng));
  fc2_ = add_module("fc2", std::make_shared<Linear>(hidden, channels, rng));
}

Var ChannelAttention::forward(const Var& x) {
  auto fc = [&](const Var& v) { return fc2_->forward(ops::relu(fc1_->forward(v))); };
  Var w = ops::sigmoid(ops::add(fc(ops::global_avg_pool(x)), fc(ops::global_max_pool(x))));
  return ops::mul_channel(x, w);
}

ConvPair::ConvPair(index_t in_channels, index_t out_channels, Rng& rng) {
  conv1_ = add_module("conv1", std::make_shared<ConvBnRelu>(in_channels, out_channels, 1, rng));
  conv3_ = add_module("conv3", std::make_shared<ConvBnRelu>(out_channels, out_channels, 3, rng));
}

Var ConvPair::forward(const Var& x) { return conv3_->forward(conv1_->forward(x)); }

SaliencyHead::SaliencyHead(index_t channels, Rng& rng) {
  conv3_ = add_module("conv3", std::make_shared<ConvBnRelu>(channels, channels, 3, rng));
  conv1_ = add_module("conv1", std::make_shared<Conv2d>(channels, 1, 1, 1, 0, rng));
}

Var SaliencyHead::forward(const Var& x) { return conv1_->forward(conv3_->forward(x)); }

Var residual_modulate(const Var& f_att, const Var& f_t) {
  return ops::add(ops::mul(f_att, f_t), f_t);
}

Decoder::Decoder(const DecoderConfig& config, Rng& rng) : config_(config) {
  const auto& c = config.widths;
  for (int i = 0; i < 4; ++i) {
    if (c[i] <= 0) throw ConfigError("decoder widths must be positive");
  }
  const std::string idx[4] = {"1", "2", "3", "4"};
  if (has_transformer()) {
    const auto& p = config.pvt;
    for (int i = 0; i < 4; ++i) {
      const index_t ref_hw = config.reference_size >> (i + 2);
      trans_[i] = add_module("trans" + idx[i],
                             std::make_shared<TransformerStage>(config.transformer, c[i], p.depths[i],
                                                                p.heads[i], p.mlp_ratios[i],
                                                                p.sr_ratios[i], ref_hw, rng));
      cascade_[i] = add_module("cascade" + idx[i], std::make_shared<ConvPair>(2 * c[i], c[i], rng));
    }
  }
  if (config.reconstruction) {
    for (int i = 0; i < 3; ++i) {
      index_t higher = 0;
      for (int j = i + 1; j < 4; ++j) higher += c[j];
      ca_[i] = add_module("ca" + idx[i], std::make_shared<ChannelAttention>(higher, config.ca_reduction, rng));
      aggregate_[i] = add_module("aggregate" + idx[i], std::make_shared<ConvPair>(higher, c[i], rng));
    }
    for (int i = 0; i < 4; ++i) {
      const index_t in = i == 3 ? c[i] : c[i] + c[i + 1];
      progressive_[i] = add_module("progressive" + idx[i], std::make_shared<ConvPair>(in, c[i], rng));
    }
  }
  for (int i = 0; i < 4; ++i) {
    heads_[i] = add_module("head" + idx[i], std::make_shared<SaliencyHead>(c[i], rng));
  }
}

Var Decoder::transformer_stage(int stage, const Var& fused) {
  require_stage(stage);
  if (!trans_[stage]) return fused;
  return trans_[stage]->forward(fused);
}

Var Decoder::cascade_refine(int stage, const Var& f_t, const Var& fused) {
  require_stage(stage);
  if (!cascade_[stage]) return f_t;
  if (f_t.shape() != fused.shape()) {
    throw ShapeError("cascade_refine: " + shape_str(f_t.shape()) + " vs " + shape_str(fused.shape()));
  }
  return cascade_[stage]->forward(ops::concat({f_t, fused}, 1));
}

Var Decoder::dense_aggregate(const std::array<Var, 4>& refined, int stage) {
  if (stage < 0 || stage > 2) throw ShapeError("dense_aggregate needs a stage with higher stages above it");
  if (!aggregate_[stage]) throw ConfigError("dense_aggregate requires reconstruction to be on");
  const index_t h = refined[stage].dim(2), w = refined[stage].dim(3);
  std::vector<Var> parts;
  for (int j = stage + 1; j < 4; ++j) parts.push_back(ops::resize_bilinear(refined[j], h, w));
  Var cat = parts.size() == 1 ? parts[0] : ops::concat(parts, 1);
  return aggregate_[stage]->forward(ca_[stage]->forward(cat));
}

std::array<Var, 4> Decoder::progressive_decode(const std::array<Var, 4>& residual) {
  if (!progressive_[0]) throw ConfigError("progressive_decode requires reconstruction to be on");
  std::array<Var, 4> out;
  out[3] = progressive_[3]->forward(residual[3]);
  for (int i = 2; i >= 0; --i) {
    Var up = ops::resize_bilinear(out[i + 1], residual[i].dim(2), residual[i].dim(3));
    out[i] = progressive_[i]->forward(ops::concat({residual[i], up}, 1));
  }
  return out;
}

SaliencyOutput Decoder::saliency_heads(const std::array<Var, 4>& features, index_t out_h,
                                       index_t out_w) {
  SaliencyOutput s;
  for (int i = 0; i < 4; ++i) {
    s.logits[i] = ops::resize_bilinear(heads_[i]->forward(features[i]), out_h, out_w);
    s.maps[i] = ops::sigmoid(s.logits[i]);
  }
  return s;
}

SaliencyOutput Decoder::forward(const std::array<Var, 4>& fused, index_t out_h, index_t out_w,
                                DecoderTrace* trace) {
  for (int i = 0; i < 4; ++i) {
    if (fused[i].shape().size() != 4 || fused[i].dim(1) != config_.widths[i]) {
      throw ShapeError("decoder stage " + std::to_string(i + 1) + " expects width " +
                       std::to_string(config_.widths[i]) + ", got " + shape_str(fused[i].shape()));
    }
  }
  std::array<Var, 4> f_t, refined;
  for (int i = 0; i < 4; ++i) {
    f_t[i] = transformer_stage(i, fused[i]);
    refined[i] = cascade_refine(i, f_t[i], fused[i]);
  }
  if (trace) {
    trace->transformed = f_t;
    trace->refined = refined;
  }
  if (!config_.reconstruction) return saliency_heads(refined, out_h, out_w);

  std::array<Var, 4> residual;
  for (int i = 0; i < 3; ++i) {
    Var att = dense_aggregate(refined, i);
    if (trace) trace->attention[i] = att;
    residual[i] = residual_modulate(att, refined[i]);
  }
  // The deepest stage has nothing above it to aggregate.
  residual[3] = refined[3];
  std::array<Var, 4> out = progressive_decode(residual);
  if (trace) {
    trace->residual = residual;
    trace->out = out;
  }
  return saliency_heads(out, out_h, out_w);
}

}  // namespace GLDM_ABI
}  // namespace gldm
