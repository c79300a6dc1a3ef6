#include "gldm/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gldm {
inline namespace GLDM_ABI {
namespace reference {
namespace {

// Source coordinate of output sample `o` under half-pixel alignment.
double source_coord(index_t o, index_t in, index_t out) {
  const double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
  return s < 0 ? 0 : s;
}

}  // namespace

void gemm(bool trans_a, bool trans_b, index_t m, index_t n, index_t k, real alpha, const real* a,
          index_t lda, const real* b, index_t ldb, real beta, real* c, index_t ldc) {
  for (index_t i = 0; i < m; ++i) {
    for (index_t j = 0; j < n; ++j) {
      double acc = 0;
      for (index_t p = 0; p < k; ++p) {
        const real av = trans_a ? a[p * lda + i] : a[i * lda + p];
        const real bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
        acc += static_cast<double>(av) * bv;
      }
      const real prev = beta == real(0) ? real(0) : beta * c[i * ldc + j];
      c[i * ldc + j] = static_cast<real>(alpha * acc) + prev;
    }
  }
}

void conv2d_forward(const ConvGeometry& g, const real* x, const real* w, const real* bias,
                    real* y) {
  const index_t oh = g.out_h(), ow = g.out_w();
  const index_t cin_g = g.in_channels / g.groups, cout_g = g.out_channels / g.groups;
  for (index_t n = 0; n < g.batch; ++n)
    for (index_t co = 0; co < g.out_channels; ++co) {
      const index_t grp = co / cout_g;
      for (index_t oy = 0; oy < oh; ++oy)
        for (index_t ox = 0; ox < ow; ++ox) {
          double acc = bias ? bias[co] : 0.0;
          for (index_t ci = 0; ci < cin_g; ++ci)
            for (index_t ky = 0; ky < g.kernel_h; ++ky)
              for (index_t kx = 0; kx < g.kernel_w; ++kx) {
                const index_t iy = oy * g.stride - g.pad + ky;
                const index_t ix = ox * g.stride - g.pad + kx;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                const index_t cin = grp * cin_g + ci;
                acc += static_cast<double>(w[((co * cin_g + ci) * g.kernel_h + ky) * g.kernel_w + kx]) *
                       x[((n * g.in_channels + cin) * g.in_h + iy) * g.in_w + ix];
              }
          y[((n * g.out_channels + co) * oh + oy) * ow + ox] = static_cast<real>(acc);
        }
    }
}

void conv2d_backward(const ConvGeometry& g, const real* x, const real* w, const real* dy,
                     real* dx, real* dw, real* db) {
  const index_t oh = g.out_h(), ow = g.out_w();
  const index_t cin_g = g.in_channels / g.groups, cout_g = g.out_channels / g.groups;
  if (dx) std::fill(dx, dx + g.batch * g.in_channels * g.in_h * g.in_w, real(0));
  if (dw) std::fill(dw, dw + g.weight_numel(), real(0));
  if (db) std::fill(db, db + g.out_channels, real(0));
  for (index_t n = 0; n < g.batch; ++n)
    for (index_t co = 0; co < g.out_channels; ++co) {
      const index_t grp = co / cout_g;
      for (index_t oy = 0; oy < oh; ++oy)
        for (index_t ox = 0; ox < ow; ++ox) {
          const real go = dy[((n * g.out_channels + co) * oh + oy) * ow + ox];
          if (db) db[co] += go;
          for (index_t ci = 0; ci < cin_g; ++ci)
            for (index_t ky = 0; ky < g.kernel_h; ++ky)
              for (index_t kx = 0; kx < g.kernel_w; ++kx) {
                const index_t iy = oy * g.stride - g.pad + ky;
                const index_t ix = ox * g.stride - g.pad + kx;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                const index_t cin = grp * cin_g + ci;
                const index_t wi = ((co * cin_g + ci) * g.kernel_h + ky) * g.kernel_w + kx;
                const index_t xi = ((n * g.in_channels + cin) * g.in_h + iy) * g.in_w + ix;
                if (dw) dw[wi] += go * x[xi];
                if (dx) dx[xi] += go * w[wi];
              }
        }
    }
}

void bilinear_resize_forward(index_t planes, index_t in_h, index_t in_w, index_t out_h,
                             index_t out_w, const real* x, real* y) {
  for (index_t p = 0; p < planes; ++p)
    for (index_t oy = 0; oy < out_h; ++oy)
      for (index_t ox = 0; ox < out_w; ++ox) {
        const double sy = source_coord(oy, in_h, out_h);
        const double sx = source_coord(ox, in_w, out_w);
        const index_t y0 = std::min<index_t>(static_cast<index_t>(std::floor(sy)), in_h - 1);
        const index_t x0 = std::min<index_t>(static_cast<index_t>(std::floor(sx)), in_w - 1);
        const index_t y1 = std::min(y0 + 1, in_h - 1);
        const index_t x1 = std::min(x0 + 1, in_w - 1);
        const double fy = sy - y0, fx = sx - x0;
        const real* s = x + p * in_h * in_w;
        const double v = (1 - fy) * ((1 - fx) * s[y0 * in_w + x0] + fx * s[y0 * in_w + x1]) +
                         fy * ((1 - fx) * s[y1 * in_w + x0] + fx * s[y1 * in_w + x1]);
        y[(p * out_h + oy) * out_w + ox] = static_cast<real>(v);
      }
}

void bilinear_resize_backward(index_t planes, index_t in_h, index_t in_w, index_t out_h,
                              index_t out_w, const real* dy, real* dx) {
  std::fill(dx, dx + planes * in_h * in_w, real(0));
  for (index_t p = 0; p < planes; ++p)
    for (index_t oy = 0; oy < out_h; ++oy)
      for (index_t ox = 0; ox < out_w; ++ox) {
        const double sy = source_coord(oy, in_h, out_h);
        const double sx = source_coord(ox, in_w, out_w);
        const index_t y0 = std::min<index_t>(static_cast<index_t>(std::floor(sy)), in_h - 1);
        const index_t x0 = std::min<index_t>(static_cast<index_t>(std::floor(sx)), in_w - 1);
        const index_t y1 = std::min(y0 + 1, in_h - 1);
        const index_t x1 = std::min(x0 + 1, in_w - 1);
        const double fy = sy - y0, fx = sx - x0;
        const double g = dy[(p * out_h + oy) * out_w + ox];
        real* d = dx + p * in_h * in_w;
        d[y0 * in_w + x0] += static_cast<real>((1 - fy) * (1 - fx) * g);
        d[y0 * in_w + x1] += static_cast<real>((1 - fy) * fx * g);
        d[y1 * in_w + x0] += static_cast<real>(fy * (1 - fx) * g);
        d[y1 * in_w + x1] += static_cast<real>(fy * fx * g);
      }
}

void max_pool2d_forward(const PoolGeometry& g, const real* x, real* y) {
  const index_t oh = g.out_h(), ow = g.out_w();
  for (index_t p = 0; p < g.planes; ++p)
    for (index_t oy = 0; oy < oh; ++oy)
      for (index_t ox = 0; ox < ow; ++ox) {
        real best = -std::numeric_limits<real>::infinity();
        for (index_t ky = 0; ky < g.kernel; ++ky)
          for (index_t kx = 0; kx < g.kernel; ++kx) {
            const index_t iy = oy * g.stride - g.pad + ky;
            const index_t ix = ox * g.stride - g.pad + kx;
            if (iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w)
              best = std::max(best, x[(p * g.in_h + iy) * g.in_w + ix]);
          }
        y[(p * oh + oy) * ow + ox] = best;
      }
}

void batch_norm_forward_train(index_t n, index_t c, index_t hw, const real* x, const real* gamma,
                              const real* beta, real eps, real* y) {
  for (index_t ch = 0; ch < c; ++ch) {
    double sum = 0, sq = 0;
    for (index_t i = 0; i < n; ++i)
      for (index_t j = 0; j < hw; ++j) sum += x[(i * c + ch) * hw + j];
    const double mu = sum / static_cast<double>(n * hw);
    for (index_t i = 0; i < n; ++i)
      for (index_t j = 0; j < hw; ++j) {
        const double d = x[(i * c + ch) * hw + j] - mu;
        sq += d * d;
      }
    const double var = sq / static_cast<double>(n * hw);
    for (index_t i = 0; i < n; ++i)
      for (index_t j = 0; j < hw; ++j) {
        const index_t at = (i * c + ch) * hw + j;
        y[at] = static_cast<real>((x[at] - mu) / std::sqrt(var + eps) * gamma[ch] + beta[ch]);
      }
  }
}

void layer_norm_forward(index_t rows, index_t d, const real* x, const real* gamma,
                        const real* beta, real eps, real* y) {
  for (index_t r = 0; r < rows; ++r) {
    double sum = 0, sq = 0;
    for (index_t j = 0; j < d; ++j) sum += x[r * d + j];
    const double mu = sum / static_cast<double>(d);
    for (index_t j = 0; j < d; ++j) sq += (x[r * d + j] - mu) * (x[r * d + j] - mu);
    const double sd = std::sqrt(sq / static_cast<double>(d) + eps);
    for (index_t j = 0; j < d; ++j)
      y[r * d + j] = static_cast<real>((x[r * d + j] - mu) / sd * gamma[j] + beta[j]);
  }
}

void softmax_forward(index_t rows, index_t d, const real* x, real* y) {
  for (index_t r = 0; r < rows; ++r) {
    double mx = x[r * d];
    for (index_t j = 1; j < d; ++j) mx = std::max<double>(mx, x[r * d + j]);
    double sum = 0;
    for (index_t j = 0; j < d; ++j) sum += std::exp(x[r * d + j] - mx);
    for (index_t j = 0; j < d; ++j) y[r * d + j] = static_cast<real>(std::exp(x[r * d + j] - mx) / sum);
  }
}

}  // namespace reference
}  // namespace GLDM_ABI
}  // namespace gldm
