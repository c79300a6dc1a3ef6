#include "gldm/backbones.hpp"

#include <vector>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace {

// Holds a 1x1 projection as children "0" (conv) and "1" (bn).
class Projection : public Module {
 public:
  Projection(index_t in, index_t out, index_t stride, Rng& rng) {
    conv_ = add_module("0", std::make_shared<Conv2d>(in, out, 1, stride, 0, rng, false));
    bn_ = add_module("1", std::make_shared<BatchNorm2d>(out));
  }
  Var forward(const Var& x) { return bn_->forward(conv_->forward(x)); }

 private:
  std::shared_ptr<Conv2d> conv_;
  std::shared_ptr<BatchNorm2d> bn_;
};

class ResidualBlock : public Module {
 public:
  virtual Var forward(const Var& x) = 0;
};

class Bottleneck : public ResidualBlock {
 public:
  static constexpr index_t kExpansion = 4;

  Bottleneck(index_t in, index_t width, index_t stride, Rng& rng) {
    conv1_ = add_module("conv1", std::make_shared<Conv2d>(in, width, 1, 1, 0, rng, false));
    bn1_ = add_module("bn1", std::make_shared<BatchNorm2d>(width));
    conv2_ = add_module("conv2", std::make_shared<Conv2d>(width, width, 3, stride, 1, rng, false));
    bn2_ = add_module("bn2", std::make_shared<BatchNorm2d>(width));
    conv3_ = add_module("conv3", std::make_shared<Conv2d>(width, width * kExpansion, 1, 1, 0, rng, false));
    bn3_ = add_module("bn3", std::make_shared<BatchNorm2d>(width * kExpansion));
    if (stride != 1 || in != width * kExpansion) {
      down_ = add_module("downsample", std::make_shared<Projection>(in, width * kExpansion, stride, rng));
    }
  }

  Var forward(const Var& x) override {
    Var y = ops::relu(bn1_->forward(conv1_->forward(x)));
    y = ops::relu(bn2_->forward(conv2_->forward(y)));
    y = bn3_->forward(conv3_->forward(y));
    return ops::relu(ops::add(y, down_ ? down_->forward(x) : x));
  }

 private:
  std::shared_ptr<Conv2d> conv1_, conv2_, conv3_;
  std::shared_ptr<BatchNorm2d> bn1_, bn2_, bn3_;
  std::shared_ptr<Projection> down_;
};

class BasicBlock : public ResidualBlock {
 public:
  static constexpr index_t kExpansion = 1;

  BasicBlock(index_t in, index_t width, index_t stride, Rng& rng) {
    conv1_ = add_module("conv1", std::make_shared<Conv2d>(in, width, 3, stride, 1, rng, false));
    bn1_ = add_module("bn1", std::make_shared<BatchNorm2d>(width));
    conv2_ = add_module("conv2", std::make_shared<Conv2d>(width, width, 3, 1, 1, rng, false));
    bn2_ = add_module("bn2", std::make_shared<BatchNorm2d>(width));
    if (stride != 1 || in != width) {
      down_ = add_module("downsample", std::make_shared<Projection>(in, width, stride, rng));
    }
  }

  Var forward(const Var& x) override {
    Var y = ops::relu(bn1_->forward(conv1_->forward(x)));
    y = bn2_->forward(conv2_->forward(y));
    return ops::relu(ops::add(y, down_ ? down_->forward(x) : x));
  }

 private:
  std::shared_ptr<Conv2d> conv1_, conv2_;
  std::shared_ptr<BatchNorm2d> bn1_, bn2_;
  std::shared_ptr<Projection> down_;
};

class Stage : public Module {
 public:
  void push(std::shared_ptr<ResidualBlock> block) {
    blocks_.push_back(add_module(std::to_string(blocks_.size()), std::move(block)));
  }
  Var forward(Var x) {
    for (auto& b : blocks_) x = b->forward(x);
    return x;
  }

 private:
  std::vector<std::shared_ptr<ResidualBlock>> blocks_;
};

// torchvision-style ResNet trunk without the classifier; parameter names
// follow torchvision (conv1, bn1, layer1.0.conv1, ...).
class ResNetEncoder : public Encoder {
 public:
  ResNetEncoder(EncoderProfile profile, std::array<int, 4> depths, bool bottleneck, Rng& rng)
      : profile_(std::move(profile)) {
    conv1_ = add_module("conv1", std::make_shared<Conv2d>(3, 64, 7, 2, 3, rng, false));
    bn1_ = add_module("bn1", std::make_shared<BatchNorm2d>(64));
    index_t in = 64;
    const std::array<index_t, 4> widths{64, 128, 256, 512};
    for (int s = 0; s < 4; ++s) {
      auto stage = std::make_shared<Stage>();
      for (int b = 0; b < depths[s]; ++b) {
        const index_t stride = (b == 0 && s > 0) ? 2 : 1;
        if (bottleneck) {
          stage->push(std::make_shared<Bottleneck>(in, widths[s], stride, rng));
          in = widths[s] * Bottleneck::kExpansion;
        } else {
          stage->push(std::make_shared<BasicBlock>(in, widths[s], stride, rng));
          in = widths[s] * BasicBlock::kExpansion;
        }
      }
      layers_[s] = add_module("layer" + std::to_string(s + 1), stage);
    }
  }

  StageFeatures forward(const Var& image) override {
    Var x = ops::relu(bn1_->forward(conv1_->forward(image)));
    x = ops::max_pool2d(x, 3, 2, 1);
    StageFeatures out;
    for (int s = 0; s < 4; ++s) {
      x = layers_[s]->forward(x);
      out.stages[s] = x;
    }
    return out;
  }

  const EncoderProfile& profile() const override { return profile_; }

 private:
  EncoderProfile profile_;
  std::shared_ptr<Conv2d> conv1_;
  std::shared_ptr<BatchNorm2d> bn1_;
  std::array<std::shared_ptr<Stage>, 4> layers_;
};

void load_weights(Encoder& encoder, const std::string& path) {
  std::vector<NamedTensor> tensors;
  try {
    tensors = read_archive(path);
  } catch (const IoError& e) {
    throw CheckpointError(std::string("encoder weights: ") + e.what());
  }
  import_state(encoder, tensors);
  encoder.set_initialized(true);
}

}  // namespace

EncoderProfile encoder_profile(const std::string& family) {
  if (family == "resnet50") return {family, {256, 512, 1024, 2048}, {4, 8, 16, 32}};
  if (family == "resnet18") return {family, {64, 128, 256, 512}, {4, 8, 16, 32}};
  throw ConfigError("unknown encoder family '" + family + "' (expected resnet50 or resnet18)");
}

EncoderHandle make_encoder(const EncoderConfig& config, Rng& rng) {
  EncoderProfile profile = encoder_profile(config.family);
  EncoderHandle enc;
  if (config.family == "resnet50") {
    enc = std::make_shared<ResNetEncoder>(profile, std::array<int, 4>{3, 4, 6, 3}, true, rng);
  } else {
    enc = std::make_shared<ResNetEncoder>(profile, std::array<int, 4>{2, 2, 2, 2}, false, rng);
  }
  if (!config.weights_path.empty()) {
    load_weights(*enc, config.weights_path);
  } else {
    enc->set_initialized(config.random_init);
  }
  return enc;
}

std::pair<EncoderHandle, EncoderHandle> make_dual_encoder(const EncoderConfig& config) {
  // Distinct streams so the two random inits are independent draws.
  Rng rgb_rng(config.seed * 2 + 1);
  Rng depth_rng(config.seed * 2 + 2);
  return {make_encoder(config, rgb_rng), make_encoder(config, depth_rng)};
}

void validate_image(const Shape& shape) {
  if (shape.size() != 4 || shape[1] != 3) {
    throw ShapeError("image must be (N, 3, H, W), got " + shape_str(shape));
  }
  if (shape[2] % 32 != 0 || shape[3] % 32 != 0 || shape[2] == 0 || shape[3] == 0) {
    throw ShapeError("image height and width must be positive multiples of 32, got " +
                     shape_str(shape));
  }
}

StageFeatures extract_stages(Encoder& encoder, const Var& image) {
  validate_image(image.shape());
  if (!encoder.initialized()) {
    throw ParameterError("encoder '" + encoder.profile().family + "' has no initialized weights");
  }
  StageFeatures out = encoder.forward(image);
  const auto& prof = encoder.profile();
  for (int s = 0; s < 4; ++s) {
    const Shape expected{image.dim(0), prof.channels[s], image.dim(2) / prof.strides[s],
                         image.dim(3) / prof.strides[s]};
    if (out.stages[s].shape() != expected) {
      throw ShapeError("stage " + std::to_string(s + 1) + " produced " +
                       shape_str(out.stages[s].shape()) + ", expected " + shape_str(expected));
    }
  }
  return out;
}

}  // namespace GLDM_ABI
}  // namespace gldm
