#include "gldm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gldm/errors.hpp"
#include "gldm/kernels.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace ops {
namespace {

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(const Var& a, int rank, const char* op) {
  if (static_cast<int>(a.shape().size()) != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(a.shape()));
  }
}

template <class F>
Tensor map_unary(const Tensor& x, F f) {
  Tensor y(x.shape());
  const real* src = x.data();
  real* dst = y.data();
  const index_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < n; ++i) dst[i] = f(src[i]);
  return y;
}

// grad_in[i] = grad_out[i] * d(i), where d sees the forward input and output.
template <class F>
void accumulate_pointwise(Node& self, F derivative) {
  Node& in = *self.inputs[0];
  if (!in.requires_grad) return;
  Tensor& g = in.grad_buffer();
  const real* x = in.value.data();
  const real* y = self.value.data();
  const real* go = self.grad.data();
  real* dst = g.data();
  const index_t n = g.numel();
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < n; ++i) dst[i] += go[i] * derivative(x[i], y[i]);
}

void accumulate_scaled(Node& target, const Tensor& g, real s) {
  if (!target.requires_grad) return;
  Tensor& dst = target.grad_buffer();
  real* d = dst.data();
  const real* src = g.data();
  const index_t n = dst.numel();
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < n; ++i) d[i] += s * src[i];
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor y(a.shape());
  const index_t n = y.numel();
  const real* pa = a.value().data();
  const real* pb = b.value().data();
  real* py = y.data();
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < n; ++i) py[i] = pa[i] + pb[i];
  return make_result(std::move(y), {a, b}, [](Node& self) {
    accumulate_scaled(*self.inputs[0], self.grad, real(1));
    accumulate_scaled(*self.inputs[1], self.grad, real(1));
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Tensor y(a.shape());
  for (index_t i = 0; i < y.numel(); ++i) y[i] = a.value()[i] - b.value()[i];
  return make_result(std::move(y), {a, b}, [](Node& self) {
    accumulate_scaled(*self.inputs[0], self.grad, real(1));
    accumulate_scaled(*self.inputs[1], self.grad, real(-1));
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Tensor y(a.shape());
  const index_t n = y.numel();
  const real* pa = a.value().data();
  const real* pb = b.value().data();
  real* py = y.data();
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < n; ++i) py[i] = pa[i] * pb[i];
  return make_result(std::move(y), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const index_t n = self.value.numel();
    const real* go = self.grad.data();
    if (na.requires_grad) {
      real* d = na.grad_buffer().data();
      const real* other = nb.value.data();
      for (index_t i = 0; i < n; ++i) d[i] += go[i] * other[i];
    }
    if (nb.requires_grad) {
      real* d = nb.grad_buffer().data();
      const real* other = na.value.data();
      for (index_t i = 0; i < n; ++i) d[i] += go[i] * other[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  require_same(a, b, "div");
  Tensor y(a.shape());
  const index_t n = y.numel();
  for (index_t i = 0; i < n; ++i) y[i] = a.value()[i] / b.value()[i];
  return make_result(std::move(y), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const index_t n = self.value.numel();
    if (na.requires_grad) {
      real* d = na.grad_buffer().data();
      for (index_t i = 0; i < n; ++i) d[i] += self.grad[i] / nb.value[i];
    }
    if (nb.requires_grad) {
      real* d = nb.grad_buffer().data();
      for (index_t i = 0; i < n; ++i) d[i] -= self.grad[i] * self.value[i] / nb.value[i];
    }
  });
}

Var scale(const Var& a, real s) {
  Tensor y = map_unary(a.value(), [s](real v) { return v * s; });
  return make_result(std::move(y), {a}, [s](Node& self) {
    accumulate_scaled(*self.inputs[0], self.grad, s);
  });
}

Var add_scalar(const Var& a, real s) {
  Tensor y = map_unary(a.value(), [s](real v) { return v + s; });
  return make_result(std::move(y), {a}, [](Node& self) {
    accumulate_scaled(*self.inputs[0], self.grad, real(1));
  });
}

Var add_broadcast_batch(const Var& a, const Var& b) {
  if (b.shape().empty() || b.shape()[0] != 1 ||
      Shape(a.shape().begin() + 1, a.shape().end()) != Shape(b.shape().begin() + 1, b.shape().end())) {
    throw ShapeError("add_broadcast_batch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const index_t per = b.value().numel();
  const index_t batch = a.shape()[0];
  Tensor y(a.shape());
  for (index_t n = 0; n < batch; ++n)
    for (index_t i = 0; i < per; ++i) y[n * per + i] = a.value()[n * per + i] + b.value()[i];
  return make_result(std::move(y), {a, b}, [batch, per](Node& self) {
    accumulate_scaled(*self.inputs[0], self.grad, real(1));
    Node& nb = *self.inputs[1];
    if (!nb.requires_grad) return;
    real* d = nb.grad_buffer().data();
    for (index_t n = 0; n < batch; ++n)
      for (index_t i = 0; i < per; ++i) d[i] += self.grad[n * per + i];
  });
}

Var relu(const Var& a) {
  // Written so NaN passes through; a poisoned input must reach the loss check.
  Tensor y = map_unary(a.value(), [](real v) { return v < 0 ? real(0) : v; });
  return make_result(std::move(y), {a}, [](Node& self) {
    accumulate_pointwise(self, [](real x, real) { return x > 0 ? real(1) : real(0); });
  });
}

Var gelu(const Var& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  Tensor y = map_unary(a.value(), [](real v) {
    return static_cast<real>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  });
  return make_result(std::move(y), {a}, [](Node& self) {
    accumulate_pointwise(self, [](real x, real) {
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * static_cast<double>(x) * x);
      return static_cast<real>(cdf + x * pdf);
    });
  });
}

Var sigmoid(const Var& a) {
  Tensor y = map_unary(a.value(), [](real v) {
    if (v >= 0) return real(1) / (real(1) + std::exp(-v));
    const real e = std::exp(v);
    return e / (real(1) + e);
  });
  return make_result(std::move(y), {a}, [](Node& self) {
    accumulate_pointwise(self, [](real, real y) { return y * (real(1) - y); });
  });
}

Var sum(const Var& a) {
  double acc = 0;
  for (real v : a.value().values()) acc += v;
  Tensor y({1}, static_cast<real>(acc));
  return make_result(std::move(y), {a}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    real* d = in.grad_buffer().data();
    const real g = self.grad[0];
    for (index_t i = 0; i < in.value.numel(); ++i) d[i] += g;
  });
}

Var mean(const Var& a) {
  const index_t n = a.value().numel();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), real(1) / static_cast<real>(n));
}

Var reshape(const Var& a, Shape shape) {
  Tensor y = a.value().reshaped(std::move(shape));
  return make_result(std::move(y), {a}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.accumulate_grad(self.grad.reshaped(in.value.shape()));
  });
}

namespace {

// Moves `src` (shape `in_shape`) into `dst` laid out by `order`. When
// `inverse` is set, `src` is in permuted layout and is scattered back.
void permute_copy(const Shape& in_shape, const std::vector<int>& order, const real* src,
                  real* dst, bool inverse) {
  const int r = static_cast<int>(in_shape.size());
  Shape out_shape(r);
  for (int i = 0; i < r; ++i) out_shape[i] = in_shape[order[i]];
  std::vector<index_t> in_stride(r, 1);
  for (int i = r - 2; i >= 0; --i) in_stride[i] = in_stride[i + 1] * in_shape[i + 1];
  // Stride in the input for each output axis.
  std::vector<index_t> gather(r);
  for (int i = 0; i < r; ++i) gather[i] = in_stride[order[i]];
  const index_t inner = out_shape[r - 1];
  const index_t inner_stride = gather[r - 1];
  const index_t outer = shape_numel(out_shape) / std::max<index_t>(inner, 1);
#pragma omp parallel for schedule(static)
  for (index_t o = 0; o < outer; ++o) {
    index_t rem = o, off = 0;
    for (int i = r - 2; i >= 0; --i) {
      off += (rem % out_shape[i]) * gather[i];
      rem /= out_shape[i];
    }
    for (index_t j = 0; j < inner; ++j) {
      if (inverse) {
        dst[off + j * inner_stride] += src[o * inner + j];
      } else {
        dst[o * inner + j] = src[off + j * inner_stride];
      }
    }
  }
}

}  // namespace

Var permute(const Var& a, const std::vector<int>& order) {
  const Shape& in_shape = a.shape();
  if (order.size() != in_shape.size()) throw ShapeError("permute: order rank mismatch");
  std::vector<int> check = order;
  std::sort(check.begin(), check.end());
  for (int i = 0; i < static_cast<int>(check.size()); ++i)
    if (check[i] != i) throw ShapeError("permute: order is not a permutation");
  Shape out_shape(in_shape.size());
  for (std::size_t i = 0; i < order.size(); ++i) out_shape[i] = in_shape[order[i]];
  Tensor y(out_shape);
  permute_copy(in_shape, order, a.value().data(), y.data(), false);
  return make_result(std::move(y), {a}, [order](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    permute_copy(in.value.shape(), order, self.grad.data(), in.grad_buffer().data(), true);
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  const int r = static_cast<int>(first.size());
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ShapeError("concat: bad axis");
  index_t outer = 1, inner = 1, total = 0;
  for (int i = 0; i < axis; ++i) outer *= first[i];
  for (int i = axis + 1; i < r; ++i) inner *= first[i];
  std::vector<index_t> sizes;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = static_cast<int>(s.size()) == r;
    for (int i = 0; ok && i < r; ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) throw ShapeError("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
    sizes.push_back(s[axis]);
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  Tensor y(out_shape);
  index_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const index_t block = sizes[p] * inner;
    const real* src = parts[p].value().data();
    for (index_t o = 0; o < outer; ++o)
      std::copy(src + o * block, src + (o + 1) * block, y.data() + o * total * inner + offset * inner);
    offset += sizes[p];
  }
  return make_result(std::move(y), parts, [sizes, outer, inner, total](Node& self) {
    index_t offset = 0;
    for (std::size_t p = 0; p < self.inputs.size(); ++p) {
      Node& in = *self.inputs[p];
      const index_t block = sizes[p] * inner;
      if (in.requires_grad) {
        real* d = in.grad_buffer().data();
        for (index_t o = 0; o < outer; ++o) {
          const real* g = self.grad.data() + o * total * inner + offset * inner;
          for (index_t i = 0; i < block; ++i) d[o * block + i] += g[i];
        }
      }
      offset += sizes[p];
    }
  });
}

Var conv2d(const Var& x, const Var& w, const Var& bias, index_t stride, index_t pad,
           index_t groups) {
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  ConvGeometry g;
  g.batch = x.dim(0);
  g.in_channels = x.dim(1);
  g.in_h = x.dim(2);
  g.in_w = x.dim(3);
  g.out_channels = w.dim(0);
  g.kernel_h = w.dim(2);
  g.kernel_w = w.dim(3);
  g.stride = stride;
  g.pad = pad;
  g.groups = groups;
  if (groups <= 0 || g.in_channels % groups != 0 || g.out_channels % groups != 0 ||
      w.dim(1) != g.in_channels / groups) {
    throw ShapeError("conv2d: weight " + shape_str(w.shape()) + " incompatible with input " +
                     shape_str(x.shape()) + " and groups " + std::to_string(groups));
  }
  if (g.out_h() <= 0 || g.out_w() <= 0) throw ShapeError("conv2d: input smaller than kernel");
  if (bias.defined() && bias.value().numel() != g.out_channels) {
    throw ShapeError("conv2d: bias size mismatch");
  }
  Tensor y({g.batch, g.out_channels, g.out_h(), g.out_w()});
  kernels::conv2d_forward(g, x.value().data(), w.value().data(),
                          bias.defined() ? bias.value().data() : nullptr, y.data());
  std::vector<Var> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(y), std::move(inputs), [g](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nw = *self.inputs[1];
    Node* nb = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    Tensor dx, dw, db;
    if (nx.requires_grad) dx = Tensor(nx.value.shape());
    if (nw.requires_grad) dw = Tensor(nw.value.shape());
    if (nb && nb->requires_grad) db = Tensor(nb->value.shape());
    kernels::conv2d_backward(g, nx.value.data(), nw.value.data(), self.grad.data(),
                             dx.empty() ? nullptr : dx.data(), dw.empty() ? nullptr : dw.data(),
                             db.empty() ? nullptr : db.data());
    if (!dx.empty()) nx.accumulate_grad(std::move(dx));
    if (!dw.empty()) nw.accumulate_grad(std::move(dw));
    if (!db.empty()) nb->accumulate_grad(std::move(db));
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, real momentum, real eps) {
  require_rank(x, 4, "batch_norm");
  const index_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.value().numel() != c || beta.value().numel() != c) {
    throw ShapeError("batch_norm: affine size mismatch");
  }
  Tensor y(x.shape());
  if (!training) {
    kernels::batch_norm_forward_eval(n, c, hw, x.value().data(), gamma.value().data(),
                                     beta.value().data(), running_mean.data(),
                                     running_var.data(), eps, y.data());
    Tensor rm = running_mean, rv = running_var;
    return make_result(std::move(y), {x, gamma, beta}, [n, c, hw, eps, rm, rv](Node& self) {
      Node& nx = *self.inputs[0];
      Node& ng = *self.inputs[1];
      Node& nb = *self.inputs[2];
      std::vector<double> dg(c, 0.0), dbeta(c, 0.0);
      Tensor dx;
      if (nx.requires_grad) dx = Tensor(nx.value.shape());
      for (index_t i = 0; i < n; ++i)
        for (index_t ch = 0; ch < c; ++ch) {
          const real inv = real(1) / std::sqrt(rv[ch] + eps);
          const real s = ng.value[ch] * inv;
          for (index_t j = 0; j < hw; ++j) {
            const index_t at = (i * c + ch) * hw + j;
            const real go = self.grad[at];
            dbeta[ch] += go;
            dg[ch] += go * (nx.value[at] - rm[ch]) * inv;
            if (!dx.empty()) dx[at] = go * s;
          }
        }
      if (!dx.empty()) nx.accumulate_grad(std::move(dx));
      if (ng.requires_grad) {
        Tensor t({c});
        for (index_t ch = 0; ch < c; ++ch) t[ch] = static_cast<real>(dg[ch]);
        ng.accumulate_grad(std::move(t));
      }
      if (nb.requires_grad) {
        Tensor t({c});
        for (index_t ch = 0; ch < c; ++ch) t[ch] = static_cast<real>(dbeta[ch]);
        nb.accumulate_grad(std::move(t));
      }
    });
  }
  Tensor mean({c}), invstd({c});
  kernels::batch_norm_forward_train(n, c, hw, x.value().data(), gamma.value().data(),
                                    beta.value().data(), eps, y.data(), mean.data(),
                                    invstd.data());
  const real count = static_cast<real>(n * hw);
  for (index_t ch = 0; ch < c; ++ch) {
    const real var = real(1) / (invstd[ch] * invstd[ch]) - eps;
    const real unbiased = count > 1 ? var * count / (count - 1) : var;
    running_mean[ch] = (real(1) - momentum) * running_mean[ch] + momentum * mean[ch];
    running_var[ch] = (real(1) - momentum) * running_var[ch] + momentum * unbiased;
  }
  return make_result(std::move(y), {x, gamma, beta},
                     [n, c, hw, mean = std::move(mean), invstd = std::move(invstd)](Node& self) {
    Node& nx = *self.inputs[0];
    Node& ng = *self.inputs[1];
    Node& nb = *self.inputs[2];
    Tensor dx, dg({c}), db({c});
    if (nx.requires_grad) dx = Tensor(nx.value.shape());
    kernels::batch_norm_backward_train(n, c, hw, nx.value.data(), ng.value.data(), mean.data(),
                                       invstd.data(), self.grad.data(),
                                       dx.empty() ? nullptr : dx.data(), dg.data(), db.data());
    if (!dx.empty()) nx.accumulate_grad(std::move(dx));
    ng.accumulate_grad(std::move(dg));
    nb.accumulate_grad(std::move(db));
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, real eps) {
  const index_t d = x.shape().back();
  const index_t rows = x.value().numel() / d;
  if (gamma.value().numel() != d || beta.value().numel() != d) {
    throw ShapeError("layer_norm: affine size mismatch");
  }
  Tensor y(x.shape()), mean({rows}), invstd({rows});
  kernels::layer_norm_forward(rows, d, x.value().data(), gamma.value().data(),
                              beta.value().data(), eps, y.data(), mean.data(), invstd.data());
  return make_result(std::move(y), {x, gamma, beta},
                     [rows, d, mean = std::move(mean), invstd = std::move(invstd)](Node& self) {
    Node& nx = *self.inputs[0];
    Node& ng = *self.inputs[1];
    Node& nb = *self.inputs[2];
    Tensor dx, dg({d}), db({d});
    if (nx.requires_grad) dx = Tensor(nx.value.shape());
    kernels::layer_norm_backward(rows, d, nx.value.data(), ng.value.data(), mean.data(),
                                 invstd.data(), self.grad.data(),
                                 dx.empty() ? nullptr : dx.data(), dg.data(), db.data());
    if (!dx.empty()) nx.accumulate_grad(std::move(dx));
    ng.accumulate_grad(std::move(dg));
    nb.accumulate_grad(std::move(db));
  });
}

Var linear(const Var& x, const Var& w, const Var& bias) {
  require_rank(w, 2, "linear weight");
  const index_t in = w.dim(1), out = w.dim(0);
  if (x.shape().back() != in) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  }
  const index_t rows = x.value().numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out;
  Tensor y(out_shape);
  kernels::gemm(false, true, rows, out, in, real(1), x.value().data(), in, w.value().data(), in,
                real(0), y.data(), out);
  if (bias.defined()) {
    if (bias.value().numel() != out) throw ShapeError("linear: bias size mismatch");
    const real* b = bias.value().data();
    real* py = y.data();
#pragma omp parallel for schedule(static)
    for (index_t r = 0; r < rows; ++r)
      for (index_t j = 0; j < out; ++j) py[r * out + j] += b[j];
  }
  std::vector<Var> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(y), std::move(inputs), [rows, in, out](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nw = *self.inputs[1];
    if (nx.requires_grad) {
      Tensor dx(nx.value.shape());
      kernels::gemm(false, false, rows, in, out, real(1), self.grad.data(), out, nw.value.data(),
                    in, real(0), dx.data(), in);
      nx.accumulate_grad(std::move(dx));
    }
    if (nw.requires_grad) {
      Tensor dw(nw.value.shape());
      kernels::gemm(true, false, out, in, rows, real(1), self.grad.data(), out, nx.value.data(),
                    in, real(0), dw.data(), in);
      nw.accumulate_grad(std::move(dw));
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      Tensor db({out});
      for (index_t r = 0; r < rows; ++r)
        for (index_t j = 0; j < out; ++j) db[j] += self.grad[r * out + j];
      self.inputs[2]->accumulate_grad(std::move(db));
    }
  });
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  const int ra = static_cast<int>(a.shape().size());
  if (ra != static_cast<int>(b.shape().size()) || (ra != 2 && ra != 3)) {
    throw ShapeError("matmul: ranks " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const index_t batch = ra == 3 ? a.dim(0) : 1;
  if (ra == 3 && b.dim(0) != batch) throw ShapeError("matmul: batch mismatch");
  const index_t m = trans_a ? a.dim(-1) : a.dim(-2);
  const index_t k = trans_a ? a.dim(-2) : a.dim(-1);
  const index_t kb = trans_b ? b.dim(-1) : b.dim(-2);
  const index_t n = trans_b ? b.dim(-2) : b.dim(-1);
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  Shape out_shape = ra == 3 ? Shape{batch, m, n} : Shape{m, n};
  Tensor y(out_shape);
  kernels::batched_gemm(batch, trans_a, trans_b, m, n, k, a.value().data(), b.value().data(),
                        real(0), y.data());
  return make_result(std::move(y), {a, b}, [=](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const real* dc = self.grad.data();
    if (na.requires_grad) {
      Tensor da(na.value.shape());
      if (!trans_a) {
        kernels::batched_gemm(batch, false, !trans_b, m, k, n, dc, nb.value.data(), real(0), da.data());
      } else {
        kernels::batched_gemm(batch, trans_b, true, k, m, n, nb.value.data(), dc, real(0), da.data());
      }
      na.accumulate_grad(std::move(da));
    }
    if (nb.requires_grad) {
      Tensor db(nb.value.shape());
      if (!trans_b) {
        kernels::batched_gemm(batch, !trans_a, false, k, n, m, na.value.data(), dc, real(0), db.data());
      } else {
        kernels::batched_gemm(batch, true, trans_a, n, k, m, dc, na.value.data(), real(0), db.data());
      }
      nb.accumulate_grad(std::move(db));
    }
  });
}

Var softmax(const Var& a) {
  const index_t d = a.shape().back();
  const index_t rows = a.value().numel() / d;
  Tensor y(a.shape());
  kernels::softmax_forward(rows, d, a.value().data(), y.data());
  return make_result(std::move(y), {a}, [rows, d](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor dx(in.value.shape());
    kernels::softmax_backward(rows, d, self.value.data(), self.grad.data(), dx.data());
    in.accumulate_grad(std::move(dx));
  });
}

Var resize_bilinear(const Var& x, index_t out_h, index_t out_w) {
  require_rank(x, 4, "resize_bilinear");
  const index_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h == out_h && w == out_w) return x;
  Tensor y({n, c, out_h, out_w});
  kernels::bilinear_resize_forward(n * c, h, w, out_h, out_w, x.value().data(), y.data());
  return make_result(std::move(y), {x}, [n, c, h, w, out_h, out_w](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor dx(in.value.shape());
    kernels::bilinear_resize_backward(n * c, h, w, out_h, out_w, self.grad.data(), dx.data());
    in.accumulate_grad(std::move(dx));
  });
}

Var max_pool2d(const Var& x, index_t kernel, index_t stride, index_t pad) {
  require_rank(x, 4, "max_pool2d");
  PoolGeometry g{x.dim(0) * x.dim(1), x.dim(2), x.dim(3), kernel, stride, pad};
  Tensor y({x.dim(0), x.dim(1), g.out_h(), g.out_w()});
  std::vector<index_t> argmax(static_cast<std::size_t>(y.numel()));
  kernels::max_pool2d_forward(g, x.value().data(), y.data(), argmax.data());
  return make_result(std::move(y), {x}, [g, argmax = std::move(argmax)](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor dx(in.value.shape());
    kernels::max_pool2d_backward(g, self.grad.data(), argmax.data(), dx.data());
    in.accumulate_grad(std::move(dx));
  });
}

Var channel_max(const Var& x) {
  require_rank(x, 4, "channel_max");
  const index_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor y({n, 1, x.dim(2), x.dim(3)});
  std::vector<index_t> arg(static_cast<std::size_t>(n * hw));
  for (index_t i = 0; i < n; ++i)
    for (index_t p = 0; p < hw; ++p) {
      index_t best = 0;
      for (index_t ch = 1; ch < c; ++ch)
        if (x.value()[(i * c + ch) * hw + p] > x.value()[(i * c + best) * hw + p]) best = ch;
      arg[i * hw + p] = best;
      y[i * hw + p] = x.value()[(i * c + best) * hw + p];
    }
  return make_result(std::move(y), {x}, [n, c, hw, arg = std::move(arg)](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    real* d = in.grad_buffer().data();
    for (index_t i = 0; i < n; ++i)
      for (index_t p = 0; p < hw; ++p) d[(i * c + arg[i * hw + p]) * hw + p] += self.grad[i * hw + p];
  });
}

Var channel_mean(const Var& x) {
  require_rank(x, 4, "channel_mean");
  const index_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor y({n, 1, x.dim(2), x.dim(3)});
  for (index_t i = 0; i < n; ++i)
    for (index_t ch = 0; ch < c; ++ch)
      for (index_t p = 0; p < hw; ++p) y[i * hw + p] += x.value()[(i * c + ch) * hw + p];
  for (index_t i = 0; i < y.numel(); ++i) y[i] /= static_cast<real>(c);
  return make_result(std::move(y), {x}, [n, c, hw](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    real* d = in.grad_buffer().data();
    const real inv = real(1) / static_cast<real>(c);
    for (index_t i = 0; i < n; ++i)
      for (index_t ch = 0; ch < c; ++ch)
        for (index_t p = 0; p < hw; ++p) d[(i * c + ch) * hw + p] += self.grad[i * hw + p] * inv;
  });
}

Var global_max_pool(const Var& x) {
  require_rank(x, 4, "global_max_pool");
  const index_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor y({x.dim(0), x.dim(1)});
  std::vector<index_t> arg(static_cast<std::size_t>(nc));
  for (index_t i = 0; i < nc; ++i) {
    const real* p = x.value().data() + i * hw;
    arg[i] = std::max_element(p, p + hw) - p;
    y[i] = p[arg[i]];
  }
  return make_result(std::move(y), {x}, [nc, hw, arg = std::move(arg)](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    real* d = in.grad_buffer().data();
    for (index_t i = 0; i < nc; ++i) d[i * hw + arg[i]] += self.grad[i];
  });
}

Var global_avg_pool(const Var& x) {
  require_rank(x, 4, "global_avg_pool");
  const index_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor y({x.dim(0), x.dim(1)});
  for (index_t i = 0; i < nc; ++i) {
    double acc = 0;
    for (index_t p = 0; p < hw; ++p) acc += x.value()[i * hw + p];
    y[i] = static_cast<real>(acc / static_cast<double>(hw));
  }
  return make_result(std::move(y), {x}, [nc, hw](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    real* d = in.grad_buffer().data();
    const real inv = real(1) / static_cast<real>(hw);
    for (index_t i = 0; i < nc; ++i)
      for (index_t p = 0; p < hw; ++p) d[i * hw + p] += self.grad[i] * inv;
  });
}

Var mul_spatial(const Var& x, const Var& m) {
  require_rank(x, 4, "mul_spatial");
  const index_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (m.shape() != Shape{n, 1, x.dim(2), x.dim(3)}) {
    throw ShapeError("mul_spatial: map " + shape_str(m.shape()) + " vs " + shape_str(x.shape()));
  }
  Tensor y(x.shape());
  for (index_t i = 0; i < n; ++i)
    for (index_t ch = 0; ch < c; ++ch)
      for (index_t p = 0; p < hw; ++p)
        y[(i * c + ch) * hw + p] = x.value()[(i * c + ch) * hw + p] * m.value()[i * hw + p];
  return make_result(std::move(y), {x, m}, [n, c, hw](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nm = *self.inputs[1];
    real* dx = nx.requires_grad ? nx.grad_buffer().data() : nullptr;
    real* dm = nm.requires_grad ? nm.grad_buffer().data() : nullptr;
    for (index_t i = 0; i < n; ++i)
      for (index_t ch = 0; ch < c; ++ch)
        for (index_t p = 0; p < hw; ++p) {
          const index_t at = (i * c + ch) * hw + p;
          if (dx) dx[at] += self.grad[at] * nm.value[i * hw + p];
          if (dm) dm[i * hw + p] += self.grad[at] * nx.value[at];
        }
  });
}

Var mul_channel(const Var& x, const Var& s) {
  require_rank(x, 4, "mul_channel");
  const index_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (s.shape() != Shape{n, c}) {
    throw ShapeError("mul_channel: weights " + shape_str(s.shape()) + " vs " + shape_str(x.shape()));
  }
  Tensor y(x.shape());
  for (index_t nc = 0; nc < n * c; ++nc)
    for (index_t p = 0; p < hw; ++p) y[nc * hw + p] = x.value()[nc * hw + p] * s.value()[nc];
  return make_result(std::move(y), {x, s}, [n, c, hw](Node& self) {
    Node& nx = *self.inputs[0];
    Node& ns = *self.inputs[1];
    real* dx = nx.requires_grad ? nx.grad_buffer().data() : nullptr;
    real* ds = ns.requires_grad ? ns.grad_buffer().data() : nullptr;
    for (index_t nc = 0; nc < n * c; ++nc)
      for (index_t p = 0; p < hw; ++p) {
        const index_t at = nc * hw + p;
        if (dx) dx[at] += self.grad[at] * ns.value[nc];
        if (ds) ds[nc] += self.grad[at] * nx.value[at];
      }
  });
}

Var to_tokens(const Var& x) {
  require_rank(x, 4, "to_tokens");
  return permute(reshape(x, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)}), {0, 2, 1});
}

Var from_tokens(const Var& t, index_t h, index_t w) {
  require_rank(t, 3, "from_tokens");
  if (t.dim(1) != h * w) throw ShapeError("from_tokens: token count does not match H*W");
  return reshape(permute(t, {0, 2, 1}), {t.dim(0), t.dim(2), h, w});
}

}  // namespace ops
}  // namespace GLDM_ABI
}  // namespace gldm
