#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "gldm/backbones.hpp"
#include "gldm/decoder.hpp"
#include "gldm/fusion.hpp"

namespace gldm {
inline namespace GLDM_ABI {

struct ModelConfig {
  EncoderConfig encoder;
  FusionConfig fusion;
  DecoderConfig decoder;
  std::uint64_t seed = 0;
};

/// Which parameters belong to a trainable group.
enum class ParamGroup { Cnn, Transformer, Other };

ParamGroup param_group(const std::string& name);

/// Dual encoders, per-stage fusion and the reconstruction decoder.
class GLDMNet : public Module {
 public:
  explicit GLDMNet(const ModelConfig& config);

  /// rgb and depth are (B, 3, H, W) with H, W multiples of 32.
  SaliencyOutput forward(const Var& rgb, const Var& depth,
                         std::array<FusionTrace, 4>* fusion_trace = nullptr,
                         DecoderTrace* decoder_trace = nullptr);

  const ModelConfig& config() const { return config_; }
  Encoder& rgb_encoder() { return *rgb_; }
  Encoder& depth_encoder() { return *depth_; }
  FusionStage& fusion_stage(int i) { return *fusion_[i]; }
  Decoder& decoder() { return *decoder_; }

  /// Parameter counts per top-level component, for run logs.
  std::string parameter_summary() const;

 private:
  ModelConfig config_;
  EncoderHandle rgb_, depth_;
  std::array<std::shared_ptr<FusionStage>, 4> fusion_;
  std::shared_ptr<Decoder> decoder_;
};

}  // namespace GLDM_ABI
}  // namespace gldm
