#include "gldm/kernels.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace gldm {
inline namespace GLDM_ABI {
namespace kernels {
namespace {

[[maybe_unused]] void blas_gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, index_t m, index_t n, index_t k,
               float alpha, const float* a, index_t lda, const float* b, index_t ldb,
               float beta, float* c, index_t ldc) {
  cblas_sgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
              beta, c, static_cast<int>(ldc));
}

[[maybe_unused]] void blas_gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, index_t m, index_t n, index_t k,
               double alpha, const double* a, index_t lda, const double* b, index_t ldb,
               double beta, double* c, index_t ldc) {
  cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
              beta, c, static_cast<int>(ldc));
}

bool is_depthwise(const ConvGeometry& g) {
  return g.groups > 1 && g.groups == g.in_channels && g.out_channels == g.in_channels;
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.pad == 0;
}

// col rows are (channel, ky, kx); columns are output pixels.
void im2col(const ConvGeometry& g, index_t channels, const real* x, real* col) {
  const index_t oh = g.out_h(), ow = g.out_w(), kk = g.kernel_h * g.kernel_w;
#pragma omp parallel for schedule(static)
  for (index_t row = 0; row < channels * kk; ++row) {
    const index_t c = row / kk;
    const index_t ky = (row % kk) / g.kernel_w;
    const index_t kx = row % g.kernel_w;
    const real* plane = x + c * g.in_h * g.in_w;
    real* dst = col + row * oh * ow;
    for (index_t oy = 0; oy < oh; ++oy) {
      const index_t iy = oy * g.stride - g.pad + ky;
      if (iy < 0 || iy >= g.in_h) {
        std::fill(dst + oy * ow, dst + (oy + 1) * ow, real(0));
        continue;
      }
      for (index_t ox = 0; ox < ow; ++ox) {
        const index_t ix = ox * g.stride - g.pad + kx;
        dst[oy * ow + ox] = (ix >= 0 && ix < g.in_w) ? plane[iy * g.in_w + ix] : real(0);
      }
    }
  }
}

// Scatter-adds col back into x. Parallel over channels, which own disjoint planes.
void col2im_add(const ConvGeometry& g, index_t channels, const real* col, real* x) {
  const index_t oh = g.out_h(), ow = g.out_w(), kk = g.kernel_h * g.kernel_w;
#pragma omp parallel for schedule(static)
  for (index_t c = 0; c < channels; ++c) {
    real* plane = x + c * g.in_h * g.in_w;
    for (index_t r = 0; r < kk; ++r) {
      const index_t ky = r / g.kernel_w, kx = r % g.kernel_w;
      const real* src = col + (c * kk + r) * oh * ow;
      for (index_t oy = 0; oy < oh; ++oy) {
        const index_t iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.in_h) continue;
        for (index_t ox = 0; ox < ow; ++ox) {
          const index_t ix = ox * g.stride - g.pad + kx;
          if (ix >= 0 && ix < g.in_w) plane[iy * g.in_w + ix] += src[oy * ow + ox];
        }
      }
    }
  }
}

void depthwise_forward(const ConvGeometry& g, const real* x, const real* w, const real* bias,
                       real* y) {
  const index_t oh = g.out_h(), ow = g.out_w(), C = g.in_channels;
#pragma omp parallel for schedule(static)
  for (index_t nc = 0; nc < g.batch * C; ++nc) {
    const index_t c = nc % C;
    const real* plane = x + nc * g.in_h * g.in_w;
    const real* wc = w + c * g.kernel_h * g.kernel_w;
    real* out = y + nc * oh * ow;
    const real b = bias ? bias[c] : real(0);
    for (index_t oy = 0; oy < oh; ++oy) {
      for (index_t ox = 0; ox < ow; ++ox) {
        real acc = b;
        for (index_t ky = 0; ky < g.kernel_h; ++ky) {
          const index_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (index_t kx = 0; kx < g.kernel_w; ++kx) {
            const index_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) acc += wc[ky * g.kernel_w + kx] * plane[iy * g.in_w + ix];
          }
        }
        out[oy * ow + ox] = acc;
      }
    }
  }
}

void depthwise_backward(const ConvGeometry& g, const real* x, const real* w, const real* dy,
                        real* dx, real* dw, real* db) {
  const index_t oh = g.out_h(), ow = g.out_w(), C = g.in_channels, kk = g.kernel_h * g.kernel_w;
  if (dx) {
#pragma omp parallel for schedule(static)
    for (index_t nc = 0; nc < g.batch * C; ++nc) {
      const index_t c = nc % C;
      real* plane = dx + nc * g.in_h * g.in_w;
      std::fill(plane, plane + g.in_h * g.in_w, real(0));
      const real* wc = w + c * kk;
      const real* grad = dy + nc * oh * ow;
      for (index_t oy = 0; oy < oh; ++oy) {
        for (index_t ox = 0; ox < ow; ++ox) {
          const real go = grad[oy * ow + ox];
          for (index_t ky = 0; ky < g.kernel_h; ++ky) {
            const index_t iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (index_t kx = 0; kx < g.kernel_w; ++kx) {
              const index_t ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < g.in_w) plane[iy * g.in_w + ix] += wc[ky * g.kernel_w + kx] * go;
            }
          }
        }
      }
    }
  }
  if (dw || db) {
#pragma omp parallel for schedule(static)
    for (index_t c = 0; c < C; ++c) {
      if (dw) std::fill(dw + c * kk, dw + (c + 1) * kk, real(0));
      real bias_acc = 0;
      for (index_t n = 0; n < g.batch; ++n) {
        const real* plane = x + (n * C + c) * g.in_h * g.in_w;
        const real* grad = dy + (n * C + c) * oh * ow;
        for (index_t oy = 0; oy < oh; ++oy) {
          for (index_t ox = 0; ox < ow; ++ox) {
            const real go = grad[oy * ow + ox];
            bias_acc += go;
            if (!dw) continue;
            for (index_t ky = 0; ky < g.kernel_h; ++ky) {
              const index_t iy = oy * g.stride - g.pad + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (index_t kx = 0; kx < g.kernel_w; ++kx) {
                const index_t ix = ox * g.stride - g.pad + kx;
                if (ix >= 0 && ix < g.in_w) dw[c * kk + ky * g.kernel_w + kx] += go * plane[iy * g.in_w + ix];
              }
            }
          }
        }
      }
      if (db) db[c] = bias_acc;
    }
  }
}

struct LerpTable {
  std::vector<index_t> lo, hi;
  std::vector<real> w_lo, w_hi;
};

LerpTable lerp_table(index_t in, index_t out) {
  LerpTable t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.w_lo.resize(out);
  t.w_hi.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (index_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    index_t i0 = static_cast<index_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const index_t i1 = std::min(i0 + 1, in - 1);
    const double frac = src - static_cast<double>(i0);
    t.lo[o] = i0;
    t.hi[o] = i1;
    t.w_lo[o] = static_cast<real>(1.0 - frac);
    t.w_hi[o] = static_cast<real>(frac);
  }
  return t;
}

}  // namespace

void gemm(bool trans_a, bool trans_b, index_t m, index_t n, index_t k, real alpha, const real* a,
          index_t lda, const real* b, index_t ldb, real beta, real* c, index_t ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (index_t i = 0; i < m; ++i)
      for (index_t j = 0; j < n; ++j) c[i * ldc + j] = beta == real(0) ? real(0) : beta * c[i * ldc + j];
    return;
  }
  blas_gemm(trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, m, n, k,
            alpha, a, lda, b, ldb, beta, c, ldc);
}

void batched_gemm(index_t batch, bool trans_a, bool trans_b, index_t m, index_t n, index_t k,
                  const real* a, const real* b, real beta, real* c) {
  const index_t lda = trans_a ? m : k;
  const index_t ldb = trans_b ? k : n;
  for (index_t i = 0; i < batch; ++i) {
    gemm(trans_a, trans_b, m, n, k, real(1), a + i * m * k, lda, b + i * k * n, ldb, beta,
         c + i * m * n, n);
  }
}

void conv2d_forward(const ConvGeometry& g, const real* x, const real* w, const real* bias,
                    real* y) {
  if (is_depthwise(g)) {
    depthwise_forward(g, x, w, bias, y);
    return;
  }
  const index_t oh = g.out_h(), ow = g.out_w(), ohw = oh * ow;
  const index_t cin_g = g.in_channels / g.groups, cout_g = g.out_channels / g.groups;
  const index_t K = cin_g * g.kernel_h * g.kernel_w;
  const bool pointwise = is_pointwise(g);
  std::vector<real> col(pointwise ? 0 : static_cast<std::size_t>(K * ohw));
  for (index_t n = 0; n < g.batch; ++n) {
    for (index_t grp = 0; grp < g.groups; ++grp) {
      const real* xg = x + (n * g.in_channels + grp * cin_g) * g.in_h * g.in_w;
      const real* src = xg;
      if (!pointwise) {
        im2col(g, cin_g, xg, col.data());
        src = col.data();
      }
      gemm(false, false, cout_g, ohw, K, real(1), w + grp * cout_g * K, K, src, ohw, real(0),
           y + (n * g.out_channels + grp * cout_g) * ohw, ohw);
    }
  }
  if (bias) {
#pragma omp parallel for schedule(static)
    for (index_t nc = 0; nc < g.batch * g.out_channels; ++nc) {
      const real b = bias[nc % g.out_channels];
      real* out = y + nc * ohw;
      for (index_t i = 0; i < ohw; ++i) out[i] += b;
    }
  }
}

void conv2d_backward(const ConvGeometry& g, const real* x, const real* w, const real* dy,
                     real* dx, real* dw, real* db) {
  if (is_depthwise(g)) {
    depthwise_backward(g, x, w, dy, dx, dw, db);
    return;
  }
  const index_t oh = g.out_h(), ow = g.out_w(), ohw = oh * ow;
  const index_t cin_g = g.in_channels / g.groups, cout_g = g.out_channels / g.groups;
  const index_t K = cin_g * g.kernel_h * g.kernel_w;
  const bool pointwise = is_pointwise(g);
  std::vector<real> col(pointwise ? 0 : static_cast<std::size_t>(K * ohw));
  std::vector<real> dcol(pointwise ? 0 : static_cast<std::size_t>(K * ohw));
  if (dx) std::fill(dx, dx + g.batch * g.in_channels * g.in_h * g.in_w, real(0));
  if (dw) std::fill(dw, dw + g.weight_numel(), real(0));
  for (index_t n = 0; n < g.batch; ++n) {
    for (index_t grp = 0; grp < g.groups; ++grp) {
      const index_t x_off = (n * g.in_channels + grp * cin_g) * g.in_h * g.in_w;
      const real* dyg = dy + (n * g.out_channels + grp * cout_g) * ohw;
      const real* wg = w + grp * cout_g * K;
      if (dw) {
        const real* src = x + x_off;
        if (!pointwise) {
          im2col(g, cin_g, x + x_off, col.data());
          src = col.data();
        }
        gemm(false, true, cout_g, K, ohw, real(1), dyg, ohw, src, ohw, real(1),
             dw + grp * cout_g * K, K);
      }
      if (dx) {
        if (pointwise) {
          gemm(true, false, K, ohw, cout_g, real(1), wg, K, dyg, ohw, real(1), dx + x_off, ohw);
        } else {
          gemm(true, false, K, ohw, cout_g, real(1), wg, K, dyg, ohw, real(0), dcol.data(), ohw);
          col2im_add(g, cin_g, dcol.data(), dx + x_off);
        }
      }
    }
  }
  if (db) {
#pragma omp parallel for schedule(static)
    for (index_t c = 0; c < g.out_channels; ++c) {
      real acc = 0;
      for (index_t n = 0; n < g.batch; ++n) {
        const real* grad = dy + (n * g.out_channels + c) * ohw;
        for (index_t i = 0; i < ohw; ++i) acc += grad[i];
      }
      db[c] = acc;
    }
  }
}

void bilinear_resize_forward(index_t planes, index_t in_h, index_t in_w, index_t out_h,
                             index_t out_w, const real* x, real* y) {
  const LerpTable rows = lerp_table(in_h, out_h);
  const LerpTable cols = lerp_table(in_w, out_w);
#pragma omp parallel for schedule(static)
  for (index_t p = 0; p < planes; ++p) {
    const real* src = x + p * in_h * in_w;
    real* dst = y + p * out_h * out_w;
    for (index_t oy = 0; oy < out_h; ++oy) {
      const real* r0 = src + rows.lo[oy] * in_w;
      const real* r1 = src + rows.hi[oy] * in_w;
      const real wy0 = rows.w_lo[oy], wy1 = rows.w_hi[oy];
      for (index_t ox = 0; ox < out_w; ++ox) {
        const index_t c0 = cols.lo[ox], c1 = cols.hi[ox];
        const real wx0 = cols.w_lo[ox], wx1 = cols.w_hi[ox];
        dst[oy * out_w + ox] =
            wy0 * (wx0 * r0[c0] + wx1 * r0[c1]) + wy1 * (wx0 * r1[c0] + wx1 * r1[c1]);
      }
    }
  }
}

void bilinear_resize_backward(index_t planes, index_t in_h, index_t in_w, index_t out_h,
                              index_t out_w, const real* dy, real* dx) {
  const LerpTable rows = lerp_table(in_h, out_h);
  const LerpTable cols = lerp_table(in_w, out_w);
#pragma omp parallel for schedule(static)
  for (index_t p = 0; p < planes; ++p) {
    real* dst = dx + p * in_h * in_w;
    std::fill(dst, dst + in_h * in_w, real(0));
    const real* grad = dy + p * out_h * out_w;
    for (index_t oy = 0; oy < out_h; ++oy) {
      real* r0 = dst + rows.lo[oy] * in_w;
      real* r1 = dst + rows.hi[oy] * in_w;
      const real wy0 = rows.w_lo[oy], wy1 = rows.w_hi[oy];
      for (index_t ox = 0; ox < out_w; ++ox) {
        const real go = grad[oy * out_w + ox];
        const index_t c0 = cols.lo[ox], c1 = cols.hi[ox];
        const real wx0 = cols.w_lo[ox], wx1 = cols.w_hi[ox];
        r0[c0] += wy0 * wx0 * go;
        r0[c1] += wy0 * wx1 * go;
        r1[c0] += wy1 * wx0 * go;
        r1[c1] += wy1 * wx1 * go;
      }
    }
  }
}

void max_pool2d_forward(const PoolGeometry& g, const real* x, real* y, index_t* argmax) {
  const index_t oh = g.out_h(), ow = g.out_w();
#pragma omp parallel for schedule(static)
  for (index_t p = 0; p < g.planes; ++p) {
    const real* src = x + p * g.in_h * g.in_w;
    for (index_t oy = 0; oy < oh; ++oy) {
      for (index_t ox = 0; ox < ow; ++ox) {
        real best = -std::numeric_limits<real>::infinity();
        index_t best_at = -1;
        for (index_t ky = 0; ky < g.kernel; ++ky) {
          const index_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (index_t kx = 0; kx < g.kernel; ++kx) {
            const index_t ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const real v = src[iy * g.in_w + ix];
            if (best_at < 0 || v > best) {
              best = v;
              best_at = iy * g.in_w + ix;
            }
          }
        }
        y[(p * oh + oy) * ow + ox] = best;
        argmax[(p * oh + oy) * ow + ox] = best_at;
      }
    }
  }
}

void max_pool2d_backward(const PoolGeometry& g, const real* dy, const index_t* argmax, real* dx) {
  const index_t oh = g.out_h(), ow = g.out_w();
#pragma omp parallel for schedule(static)
  for (index_t p = 0; p < g.planes; ++p) {
    real* dst = dx + p * g.in_h * g.in_w;
    std::fill(dst, dst + g.in_h * g.in_w, real(0));
    for (index_t i = 0; i < oh * ow; ++i) dst[argmax[p * oh * ow + i]] += dy[p * oh * ow + i];
  }
}

void batch_norm_forward_train(index_t n, index_t c, index_t hw, const real* x, const real* gamma,
                              const real* beta, real eps, real* y, real* mean, real* invstd) {
  const double count = static_cast<double>(n * hw);
#pragma omp parallel for schedule(static)
  for (index_t ch = 0; ch < c; ++ch) {
    double sum = 0;
    for (index_t i = 0; i < n; ++i) {
      const real* p = x + (i * c + ch) * hw;
      for (index_t j = 0; j < hw; ++j) sum += p[j];
    }
    const double mu = sum / count;
    double sq = 0;
    for (index_t i = 0; i < n; ++i) {
      const real* p = x + (i * c + ch) * hw;
      for (index_t j = 0; j < hw; ++j) sq += (p[j] - mu) * (p[j] - mu);
    }
    const double is = 1.0 / std::sqrt(sq / count + eps);
    mean[ch] = static_cast<real>(mu);
    invstd[ch] = static_cast<real>(is);
    const real scale = static_cast<real>(gamma[ch] * is);
    const real shift = static_cast<real>(beta[ch] - mu * gamma[ch] * is);
    for (index_t i = 0; i < n; ++i) {
      const real* p = x + (i * c + ch) * hw;
      real* q = y + (i * c + ch) * hw;
      for (index_t j = 0; j < hw; ++j) q[j] = p[j] * scale + shift;
    }
  }
}

void batch_norm_forward_eval(index_t n, index_t c, index_t hw, const real* x, const real* gamma,
                             const real* beta, const real* running_mean,
                             const real* running_var, real eps, real* y) {
#pragma omp parallel for schedule(static)
  for (index_t nc = 0; nc < n * c; ++nc) {
    const index_t ch = nc % c;
    const real scale = gamma[ch] / std::sqrt(running_var[ch] + eps);
    const real shift = beta[ch] - running_mean[ch] * scale;
    const real* p = x + nc * hw;
    real* q = y + nc * hw;
    for (index_t j = 0; j < hw; ++j) q[j] = p[j] * scale + shift;
  }
}

void batch_norm_backward_train(index_t n, index_t c, index_t hw, const real* x,
                               const real* gamma, const real* mean, const real* invstd,
                               const real* dy, real* dx, real* dgamma, real* dbeta) {
  const double count = static_cast<double>(n * hw);
#pragma omp parallel for schedule(static)
  for (index_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0, sum_dy_xhat = 0;
    for (index_t i = 0; i < n; ++i) {
      const real* p = x + (i * c + ch) * hw;
      const real* g = dy + (i * c + ch) * hw;
      for (index_t j = 0; j < hw; ++j) {
        sum_dy += g[j];
        sum_dy_xhat += g[j] * (p[j] - mean[ch]) * invstd[ch];
      }
    }
    if (dgamma) dgamma[ch] = static_cast<real>(sum_dy_xhat);
    if (dbeta) dbeta[ch] = static_cast<real>(sum_dy);
    if (!dx) continue;
    const double k = gamma[ch] * invstd[ch] / count;
    for (index_t i = 0; i < n; ++i) {
      const real* p = x + (i * c + ch) * hw;
      const real* g = dy + (i * c + ch) * hw;
      real* q = dx + (i * c + ch) * hw;
      for (index_t j = 0; j < hw; ++j) {
        const double xhat = (p[j] - mean[ch]) * invstd[ch];
        q[j] = static_cast<real>(k * (count * g[j] - sum_dy - xhat * sum_dy_xhat));
      }
    }
  }
}

void layer_norm_forward(index_t rows, index_t d, const real* x, const real* gamma,
                        const real* beta, real eps, real* y, real* mean, real* invstd) {
#pragma omp parallel for schedule(static)
  for (index_t r = 0; r < rows; ++r) {
    const real* p = x + r * d;
    double sum = 0;
    for (index_t j = 0; j < d; ++j) sum += p[j];
    const double mu = sum / static_cast<double>(d);
    double sq = 0;
    for (index_t j = 0; j < d; ++j) sq += (p[j] - mu) * (p[j] - mu);
    const double is = 1.0 / std::sqrt(sq / static_cast<double>(d) + eps);
    mean[r] = static_cast<real>(mu);
    invstd[r] = static_cast<real>(is);
    real* q = y + r * d;
    for (index_t j = 0; j < d; ++j) q[j] = static_cast<real>((p[j] - mu) * is) * gamma[j] + beta[j];
  }
}

void layer_norm_backward(index_t rows, index_t d, const real* x, const real* gamma,
                         const real* mean, const real* invstd, const real* dy, real* dx,
                         real* dgamma, real* dbeta) {
  if (dx) {
#pragma omp parallel for schedule(static)
    for (index_t r = 0; r < rows; ++r) {
      const real* p = x + r * d;
      const real* g = dy + r * d;
      double sum_g = 0, sum_g_xhat = 0;
      for (index_t j = 0; j < d; ++j) {
        const double gj = g[j] * gamma[j];
        sum_g += gj;
        sum_g_xhat += gj * (p[j] - mean[r]) * invstd[r];
      }
      const double inv_d = 1.0 / static_cast<double>(d);
      real* q = dx + r * d;
      for (index_t j = 0; j < d; ++j) {
        const double xhat = (p[j] - mean[r]) * invstd[r];
        q[j] = static_cast<real>(invstd[r] * (g[j] * gamma[j] - inv_d * sum_g - xhat * inv_d * sum_g_xhat));
      }
    }
  }
  if (dgamma || dbeta) {
#pragma omp parallel for schedule(static)
    for (index_t j = 0; j < d; ++j) {
      double sg = 0, sb = 0;
      for (index_t r = 0; r < rows; ++r) {
        const real g = dy[r * d + j];
        sb += g;
        sg += g * (x[r * d + j] - mean[r]) * invstd[r];
      }
      if (dgamma) dgamma[j] = static_cast<real>(sg);
      if (dbeta) dbeta[j] = static_cast<real>(sb);
    }
  }
}

void softmax_forward(index_t rows, index_t d, const real* x, real* y) {
#pragma omp parallel for schedule(static)
  for (index_t r = 0; r < rows; ++r) {
    const real* p = x + r * d;
    real* q = y + r * d;
    const real mx = *std::max_element(p, p + d);
    real sum = 0;
    for (index_t j = 0; j < d; ++j) {
      q[j] = std::exp(p[j] - mx);
      sum += q[j];
    }
    const real inv = real(1) / sum;
    for (index_t j = 0; j < d; ++j) q[j] *= inv;
  }
}

void softmax_backward(index_t rows, index_t d, const real* y, const real* dy, real* dx) {
#pragma omp parallel for schedule(static)
  for (index_t r = 0; r < rows; ++r) {
    const real* p = y + r * d;
    const real* g = dy + r * d;
    real dot = 0;
    for (index_t j = 0; j < d; ++j) dot += p[j] * g[j];
    real* q = dx + r * d;
    for (index_t j = 0; j < d; ++j) q[j] = p[j] * (g[j] - dot);
  }
}

}  // namespace kernels
}  // namespace GLDM_ABI
}  // namespace gldm
