#include "gldm/nn.hpp"

#include <cmath>
#include <unordered_map>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace {

std::string join(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace

std::vector<NamedVar> Module::named_parameters(const std::string& prefix) const {
  std::vector<NamedVar> out;
  for (const auto& [name, var] : params_) out.push_back({join(prefix, name), var});
  for (const auto& [name, child] : children_) {
    auto sub = child->named_parameters(join(prefix, name));
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

std::vector<NamedVar> Module::named_buffers(const std::string& prefix) const {
  std::vector<NamedVar> out;
  for (const auto& [name, var] : buffers_) out.push_back({join(prefix, name), var});
  for (const auto& [name, child] : children_) {
    auto sub = child->named_buffers(join(prefix, name));
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

std::vector<NamedVar> Module::state(const std::string& prefix) const {
  auto out = named_parameters(prefix);
  auto buffers = named_buffers(prefix);
  out.insert(out.end(), buffers.begin(), buffers.end());
  return out;
}

index_t Module::parameter_count() const {
  index_t n = 0;
  for (const auto& p : named_parameters()) n += p.var.value().numel();
  return n;
}

void Module::set_training(bool on) {
  training_ = on;
  for (auto& [name, child] : children_) child->set_training(on);
}

Var& Module::add_parameter(std::string name, Tensor value) {
  params_.emplace_back(std::move(name), Var(std::move(value), true));
  return params_.back().second;
}

Var& Module::add_buffer(std::string name, Tensor value) {
  buffers_.emplace_back(std::move(name), Var(std::move(value), false));
  return buffers_.back().second;
}

Conv2d::Conv2d(index_t in_channels, index_t out_channels, index_t kernel, index_t stride,
               index_t pad, Rng& rng, bool bias, index_t groups)
    : in_(in_channels), out_(out_channels), stride_(stride), pad_(pad), groups_(groups) {
  const index_t fan_in = (in_channels / groups) * kernel * kernel;
  const real stddev = static_cast<real>(std::sqrt(2.0 / static_cast<double>(fan_in)));
  weight_ = add_parameter("weight",
                          Tensor::randn({out_channels, in_channels / groups, kernel, kernel}, rng, stddev));
  if (bias) bias_ = add_parameter("bias", Tensor::zeros({out_channels}));
}

Var Conv2d::forward(const Var& x) const {
  return ops::conv2d(x, weight_, bias_, stride_, pad_, groups_);
}

BatchNorm2d::BatchNorm2d(index_t channels, real momentum, real eps)
    : momentum_(momentum), eps_(eps) {
  gamma_ = add_parameter("weight", Tensor::ones({channels}));
  beta_ = add_parameter("bias", Tensor::zeros({channels}));
  running_mean_ = add_buffer("running_mean", Tensor::zeros({channels}));
  running_var_ = add_buffer("running_var", Tensor::ones({channels}));
}

Var BatchNorm2d::forward(const Var& x) {
  return ops::batch_norm(x, gamma_, beta_, running_mean_.mutable_value(),
                         running_var_.mutable_value(), training(), momentum_, eps_);
}

ConvBnRelu::ConvBnRelu(index_t in_channels, index_t out_channels, index_t kernel, Rng& rng,
                       index_t stride) {
  conv_ = add_module("conv", std::make_shared<Conv2d>(in_channels, out_channels, kernel, stride,
                                                      kernel / 2, rng, false));
  bn_ = add_module("bn", std::make_shared<BatchNorm2d>(out_channels));
}

Var ConvBnRelu::forward(const Var& x) { return ops::relu(bn_->forward(conv_->forward(x))); }

Linear::Linear(index_t in_features, index_t out_features, Rng& rng, bool bias) {
  const real stddev = static_cast<real>(std::sqrt(1.0 / static_cast<double>(in_features)));
  weight_ = add_parameter("weight", Tensor::randn({out_features, in_features}, rng, stddev));
  if (bias) bias_ = add_parameter("bias", Tensor::zeros({out_features}));
}

Var Linear::forward(const Var& x) const { return ops::linear(x, weight_, bias_); }

LayerNorm::LayerNorm(index_t dim, real eps) : eps_(eps) {
  gamma_ = add_parameter("weight", Tensor::ones({dim}));
  beta_ = add_parameter("bias", Tensor::zeros({dim}));
}

std::vector<NamedTensor> export_state(const Module& module, const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (const auto& nv : module.state(prefix)) out.push_back({nv.name, nv.var.value()});
  return out;
}

void import_state(const Module& module, const std::vector<NamedTensor>& tensors,
                  const std::string& prefix) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& nt : tensors) by_name.emplace(nt.name, &nt.value);
  for (auto nv : module.state(prefix)) {
    auto it = by_name.find(nv.name);
    if (it == by_name.end()) throw CheckpointError("missing tensor '" + nv.name + "'");
    if (it->second->shape() != nv.var.shape()) {
      throw CheckpointError("shape mismatch for '" + nv.name + "': stored " +
                            shape_str(it->second->shape()) + ", expected " +
                            shape_str(nv.var.shape()));
    }
    nv.var.mutable_value() = *it->second;
  }
}

Var LayerNorm::forward(const Var& x) const { return ops::layer_norm(x, gamma_, beta_, eps_); }

}  // namespace GLDM_ABI
}  // namespace gldm
