#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>

#include "gldm/nn.hpp"

namespace gldm {
inline namespace GLDM_ABI {

/// Stride and width schedule an encoder declares for its four stages.
struct EncoderProfile {
  std::string family;
  std::array<index_t, 4> channels{};
  std::array<index_t, 4> strides{4, 8, 16, 32};
};

struct EncoderConfig {
  std::string family = "resnet50";
  /// Named-parameter archive with encoder-relative names; empty for random init.
  std::string weights_path;
  /// When false and no weights are given, parameters stay unset and
  /// extract_stages refuses to run.
  bool random_init = true;
  std::uint64_t seed = 0;
};

/// Four per-stage features at strides 4, 8, 16, 32.
struct StageFeatures {
  std::array<Var, 4> stages;
};

class Encoder : public Module {
 public:
  virtual StageFeatures forward(const Var& image) = 0;
  virtual const EncoderProfile& profile() const = 0;

  bool initialized() const { return initialized_; }
  void set_initialized(bool on) { initialized_ = on; }

 private:
  bool initialized_ = false;
};

using EncoderHandle = std::shared_ptr<Encoder>;

/// Known families: resnet50, resnet18. Throws ConfigError otherwise.
EncoderProfile encoder_profile(const std::string& family);

EncoderHandle make_encoder(const EncoderConfig& config, Rng& rng);

/// Independent RGB and depth encoders. Both load the same weights file when
/// one is configured; otherwise each draws its own random init.
std::pair<EncoderHandle, EncoderHandle> make_dual_encoder(const EncoderConfig& config);

/// Checks the image contract: rank 4, three channels, H and W multiples of 32.
void validate_image(const Shape& shape);

StageFeatures extract_stages(Encoder& encoder, const Var& image);

}  // namespace GLDM_ABI
}  // namespace gldm
