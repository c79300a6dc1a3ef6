#pragma once

#include <vector>

#include "gldm/autograd.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace ops {

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, real s);
Var add_scalar(const Var& a, real s);
/// a + b where b has a leading dimension of 1 broadcast over a's first axis.
Var add_broadcast_batch(const Var& a, const Var& b);

Var relu(const Var& a);
Var gelu(const Var& a);
Var sigmoid(const Var& a);

/// Reductions to a one-element tensor of shape (1).
Var sum(const Var& a);
Var mean(const Var& a);

Var reshape(const Var& a, Shape shape);
Var permute(const Var& a, const std::vector<int>& order);
Var concat(const std::vector<Var>& parts, int axis);

/// x: (N, Cin, H, W), w: (Cout, Cin/groups, k, k), bias optional (undefined Var).
Var conv2d(const Var& x, const Var& w, const Var& bias, index_t stride, index_t pad,
           index_t groups = 1);

/// Training mode uses batch statistics and updates the running buffers in place.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, real momentum, real eps);

/// Normalizes over the last axis.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, real eps);

/// x: (..., in), w: (out, in), bias optional.
Var linear(const Var& x, const Var& w, const Var& bias);

/// Rank-2 or batched rank-3 product op(a) · op(b).
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);

/// Over the last axis.
Var softmax(const Var& a);

Var resize_bilinear(const Var& x, index_t out_h, index_t out_w);
Var max_pool2d(const Var& x, index_t kernel, index_t stride, index_t pad);

/// (N, C, H, W) -> (N, 1, H, W), reducing across channels.
Var channel_max(const Var& x);
Var channel_mean(const Var& x);
/// (N, C, H, W) -> (N, C), reducing across space.
Var global_max_pool(const Var& x);
Var global_avg_pool(const Var& x);

/// x (N, C, H, W) scaled by a per-pixel map m (N, 1, H, W).
Var mul_spatial(const Var& x, const Var& m);
/// x (N, C, H, W) scaled by per-channel weights s (N, C).
Var mul_channel(const Var& x, const Var& s);

/// (N, C, H, W) <-> (N, H*W, C).
Var to_tokens(const Var& x);
Var from_tokens(const Var& t, index_t h, index_t w);

}  // namespace ops
}  // namespace GLDM_ABI
}  // namespace gldm
