#pragma once

// Serial, loop-level versions of the kernels in gldm/kernels.hpp. They exist
// for equivalence tests and benchmarks; the model never calls them.

#include "gldm/kernels.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace reference {

void gemm(bool trans_a, bool trans_b, index_t m, index_t n, index_t k, real alpha,
          const real* a, index_t lda, const real* b, index_t ldb, real beta, real* c,
          index_t ldc);

void conv2d_forward(const ConvGeometry& g, const real* x, const real* w, const real* bias,
                    real* y);
void conv2d_backward(const ConvGeometry& g, const real* x, const real* w, const real* dy,
                     real* dx, real* dw, real* db);

void bilinear_resize_forward(index_t planes, index_t in_h, index_t in_w, index_t out_h,
                             index_t out_w, const real* x, real* y);
void bilinear_resize_backward(index_t planes, index_t in_h, index_t in_w, index_t out_h,
                              index_t out_w, const real* dy, real* dx);

void max_pool2d_forward(const PoolGeometry& g, const real* x, real* y);

void batch_norm_forward_train(index_t n, index_t c, index_t hw, const real* x, const real* gamma,
                              const real* beta, real eps, real* y);
void layer_norm_forward(index_t rows, index_t d, const real* x, const real* gamma,
                        const real* beta, real eps, real* y);
void softmax_forward(index_t rows, index_t d, const real* x, real* y);

}  // namespace reference
}  // namespace GLDM_ABI
}  // namespace gldm
