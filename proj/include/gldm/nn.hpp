#pragma once

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gldm/ops.hpp"
#include "gldm/serialization.hpp"

namespace gldm {
inline namespace GLDM_ABI {

using Rng = std::mt19937_64;

struct NamedVar {
  std::string name;
  Var var;
};

/// Parameter tree node. Names are dotted paths, e.g. `rgb_encoder.layer1.0.conv1.weight`.
class Module {
 public:
  virtual ~Module() = default;
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  std::vector<NamedVar> named_parameters(const std::string& prefix = "") const;
  /// Non-trainable state (normalization running statistics).
  std::vector<NamedVar> named_buffers(const std::string& prefix = "") const;
  /// Parameters followed by buffers: everything a checkpoint stores.
  std::vector<NamedVar> state(const std::string& prefix = "") const;
  index_t parameter_count() const;

  void set_training(bool on);
  bool training() const { return training_; }

 protected:
  Var& add_parameter(std::string name, Tensor value);
  Var& add_buffer(std::string name, Tensor value);

  template <class M>
  std::shared_ptr<M> add_module(std::string name, std::shared_ptr<M> module) {
    children_.emplace_back(std::move(name), module);
    return module;
  }

 private:
  std::vector<std::pair<std::string, Var>> params_;
  std::vector<std::pair<std::string, Var>> buffers_;
  std::vector<std::pair<std::string, std::shared_ptr<Module>>> children_;
  bool training_ = true;
};

/// Fan-in scaled normal init (He), zero bias.
class Conv2d : public Module {
 public:
  Conv2d(index_t in_channels, index_t out_channels, index_t kernel, index_t stride, index_t pad,
         Rng& rng, bool bias = true, index_t groups = 1);
  Var forward(const Var& x) const;

  index_t in_channels() const { return in_; }
  index_t out_channels() const { return out_; }
  Var& weight() { return weight_; }
  Var& bias() { return bias_; }

 private:
  index_t in_, out_, stride_, pad_, groups_;
  Var weight_;
  Var bias_;
};

class BatchNorm2d : public Module {
 public:
  explicit BatchNorm2d(index_t channels, real momentum = real(0.1), real eps = real(1e-5));
  Var forward(const Var& x);

 private:
  Var gamma_, beta_, running_mean_, running_var_;
  real momentum_, eps_;
};

/// k×k convolution followed by batch normalization and ReLU, padding k/2.
class ConvBnRelu : public Module {
 public:
  ConvBnRelu(index_t in_channels, index_t out_channels, index_t kernel, Rng& rng,
             index_t stride = 1);
  Var forward(const Var& x);
  index_t out_channels() const { return conv_->out_channels(); }

 private:
  std::shared_ptr<Conv2d> conv_;
  std::shared_ptr<BatchNorm2d> bn_;
};

class Linear : public Module {
 public:
  Linear(index_t in_features, index_t out_features, Rng& rng, bool bias = true);
  Var forward(const Var& x) const;

 private:
  Var weight_, bias_;
};

class LayerNorm : public Module {
 public:
  explicit LayerNorm(index_t dim, real eps = real(1e-6));
  Var forward(const Var& x) const;

 private:
  Var gamma_, beta_;
  real eps_;
};

/// Copies of every state tensor, names prefixed by `prefix`.
std::vector<NamedTensor> export_state(const Module& module, const std::string& prefix = "");

/// Assigns archive entries to the module's state. Every state entry must be
/// present with a matching shape; extra archive entries are ignored.
void import_state(const Module& module, const std::vector<NamedTensor>& tensors,
                  const std::string& prefix = "");

}  // namespace GLDM_ABI
}  // namespace gldm
