#pragma once

// Compute kernels on raw NCHW buffers. Loops are OpenMP-parallel; dense
// products go through BLAS. `gldm/reference.hpp` holds serial loop versions
// with identical signatures that tests and benchmarks compare against.
//
// Backward kernels overwrite their outputs; callers accumulate.

#include "gldm/common.hpp"

namespace gldm {
inline namespace GLDM_ABI {

struct ConvGeometry {
  index_t batch = 1;
  index_t in_channels = 1;
  index_t in_h = 1;
  index_t in_w = 1;
  index_t out_channels = 1;
  index_t kernel_h = 1;
  index_t kernel_w = 1;
  index_t stride = 1;
  index_t pad = 0;
  index_t groups = 1;

  index_t out_h() const { return (in_h + 2 * pad - kernel_h) / stride + 1; }
  index_t out_w() const { return (in_w + 2 * pad - kernel_w) / stride + 1; }
  index_t weight_numel() const { return out_channels * (in_channels / groups) * kernel_h * kernel_w; }
};

/// Pooling window over `planes` independent H×W planes.
struct PoolGeometry {
  index_t planes = 1;
  index_t in_h = 1;
  index_t in_w = 1;
  index_t kernel = 1;
  index_t stride = 1;
  index_t pad = 0;

  index_t out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  index_t out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
};

namespace kernels {

/// Row-major C = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, index_t m, index_t n, index_t k, real alpha,
          const real* a, index_t lda, const real* b, index_t ldb, real beta, real* c,
          index_t ldc);

/// `batch` independent gemms on contiguous [m,k]/[k,n]/[m,n] blocks (before op).
void batched_gemm(index_t batch, bool trans_a, bool trans_b, index_t m, index_t n, index_t k,
                  const real* a, const real* b, real beta, real* c);

void conv2d_forward(const ConvGeometry& g, const real* x, const real* w, const real* bias,
                    real* y);
/// Any of dx, dw, db may be null.
void conv2d_backward(const ConvGeometry& g, const real* x, const real* w, const real* dy,
                     real* dx, real* dw, real* db);

/// Half-pixel (align_corners = false) bilinear resampling.
void bilinear_resize_forward(index_t planes, index_t in_h, index_t in_w, index_t out_h,
                             index_t out_w, const real* x, real* y);
void bilinear_resize_backward(index_t planes, index_t in_h, index_t in_w, index_t out_h,
                              index_t out_w, const real* dy, real* dx);

void max_pool2d_forward(const PoolGeometry& g, const real* x, real* y, index_t* argmax);
void max_pool2d_backward(const PoolGeometry& g, const real* dy, const index_t* argmax, real* dx);

/// Normalizes over (n, hw) per channel with batch statistics.
void batch_norm_forward_train(index_t n, index_t c, index_t hw, const real* x, const real* gamma,
                              const real* beta, real eps, real* y, real* mean, real* invstd);
void batch_norm_forward_eval(index_t n, index_t c, index_t hw, const real* x, const real* gamma,
                             const real* beta, const real* running_mean,
                             const real* running_var, real eps, real* y);
void batch_norm_backward_train(index_t n, index_t c, index_t hw, const real* x,
                               const real* gamma, const real* mean, const real* invstd,
                               const real* dy, real* dx, real* dgamma, real* dbeta);

/// Normalizes each row of length d.
void layer_norm_forward(index_t rows, index_t d, const real* x, const real* gamma,
                        const real* beta, real eps, real* y, real* mean, real* invstd);
void layer_norm_backward(index_t rows, index_t d, const real* x, const real* gamma,
                         const real* mean, const real* invstd, const real* dy, real* dx,
                         real* dgamma, real* dbeta);

void softmax_forward(index_t rows, index_t d, const real* x, real* y);
void softmax_backward(index_t rows, index_t d, const real* y, const real* dy, real* dx);

}  // namespace kernels
}  // namespace GLDM_ABI
}  // namespace gldm
