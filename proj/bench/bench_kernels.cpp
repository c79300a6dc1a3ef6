#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gldm/kernels.hpp"
#include "gldm/reference.hpp"

using namespace gldm;

namespace {

std::vector<real> random_buffer(index_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<real> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = static_cast<real>(dist(rng));
  return v;
}

// Arg 0 picks the implementation: 0 = parallel kernel, 1 = serial reference.
const char* impl_label(int64_t impl) { return impl == 0 ? "kernel" : "reference"; }

void BM_Gemm(benchmark::State& state) {
  const index_t n = state.range(1);
  const auto a = random_buffer(n * n, 1), b = random_buffer(n * n, 2);
  std::vector<real> c(static_cast<std::size_t>(n * n));
  for (auto _ : state) {
    if (state.range(0) == 0) {
      kernels::gemm(false, false, n, n, n, 1, a.data(), n, b.data(), n, 0, c.data(), n);
    } else {
      reference::gemm(false, false, n, n, n, 1, a.data(), n, b.data(), n, 0, c.data(), n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
  state.SetLabel(impl_label(state.range(0)));
}
BENCHMARK(BM_Gemm)->ArgsProduct({{0, 1}, {64, 256}});

ConvGeometry conv_geometry(index_t channels, index_t size, index_t groups) {
  ConvGeometry g;
  g.batch = 2;
  g.in_channels = g.out_channels = channels;
  g.in_h = g.in_w = size;
  g.kernel_h = g.kernel_w = 3;
  g.pad = 1;
  g.groups = groups;
  return g;
}

void BM_ConvForward(benchmark::State& state) {
  const ConvGeometry g = conv_geometry(state.range(1), 32, state.range(2));
  const auto x = random_buffer(g.batch * g.in_channels * g.in_h * g.in_w, 3);
  const auto w = random_buffer(g.weight_numel(), 4);
  const auto bias = random_buffer(g.out_channels, 5);
  std::vector<real> y(static_cast<std::size_t>(g.batch * g.out_channels * g.out_h() * g.out_w()));
  for (auto _ : state) {
    if (state.range(0) == 0) {
      kernels::conv2d_forward(g, x.data(), w.data(), bias.data(), y.data());
    } else {
      reference::conv2d_forward(g, x.data(), w.data(), bias.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetLabel(impl_label(state.range(0)));
}
// Dense and depthwise 3x3 convolutions.
BENCHMARK(BM_ConvForward)->ArgsProduct({{0, 1}, {64}, {1, 64}});

void BM_ConvBackward(benchmark::State& state) {
  const ConvGeometry g = conv_geometry(state.range(1), 32, 1);
  const auto x = random_buffer(g.batch * g.in_channels * g.in_h * g.in_w, 3);
  const auto w = random_buffer(g.weight_numel(), 4);
  const auto dy = random_buffer(g.batch * g.out_channels * g.out_h() * g.out_w(), 6);
  std::vector<real> dx(x.size()), dw(w.size()), db(static_cast<std::size_t>(g.out_channels));
  for (auto _ : state) {
    if (state.range(0) == 0) {
      kernels::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    } else {
      reference::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    }
    benchmark::DoNotOptimize(dx.data());
  }
  state.SetLabel(impl_label(state.range(0)));
}
BENCHMARK(BM_ConvBackward)->ArgsProduct({{0, 1}, {32}});

void BM_Bilinear(benchmark::State& state) {
  const index_t planes = 64, in = 32, out = 128;
  const auto x = random_buffer(planes * in * in, 7);
  std::vector<real> y(static_cast<std::size_t>(planes * out * out));
  for (auto _ : state) {
    if (state.range(0) == 0) {
      kernels::bilinear_resize_forward(planes, in, in, out, out, x.data(), y.data());
    } else {
      reference::bilinear_resize_forward(planes, in, in, out, out, x.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetLabel(impl_label(state.range(0)));
}
BENCHMARK(BM_Bilinear)->Arg(0)->Arg(1);

void BM_MaxPool(benchmark::State& state) {
  PoolGeometry g;
  g.planes = 128;
  g.in_h = g.in_w = 64;
  g.kernel = 3;
  g.stride = 2;
  g.pad = 1;
  const auto x = random_buffer(g.planes * g.in_h * g.in_w, 8);
  std::vector<real> y(static_cast<std::size_t>(g.planes * g.out_h() * g.out_w()));
  std::vector<index_t> argmax(y.size());
  for (auto _ : state) {
    if (state.range(0) == 0) {
      kernels::max_pool2d_forward(g, x.data(), y.data(), argmax.data());
    } else {
      reference::max_pool2d_forward(g, x.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetLabel(impl_label(state.range(0)));
}
BENCHMARK(BM_MaxPool)->Arg(0)->Arg(1);

void BM_BatchNorm(benchmark::State& state) {
  const index_t n = 4, c = 64, hw = 32 * 32;
  const auto x = random_buffer(n * c * hw, 9);
  const std::vector<real> gamma(c, 1), beta(c, 0);
  std::vector<real> y(x.size()), mean(c), var(c);
  for (auto _ : state) {
    if (state.range(0) == 0) {
      kernels::batch_norm_forward_train(n, c, hw, x.data(), gamma.data(), beta.data(), real(1e-5),
                                        y.data(), mean.data(), var.data());
    } else {
      reference::batch_norm_forward_train(n, c, hw, x.data(), gamma.data(), beta.data(), real(1e-5),
                                          y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetLabel(impl_label(state.range(0)));
}
BENCHMARK(BM_BatchNorm)->Arg(0)->Arg(1);

void BM_LayerNormSoftmax(benchmark::State& state) {
  const index_t rows = 4096, d = 128;
  const auto x = random_buffer(rows * d, 10);
  const std::vector<real> gamma(d, 1), beta(d, 0);
  std::vector<real> y(x.size()), z(x.size()), mean(rows), rstd(rows);
  for (auto _ : state) {
    if (state.range(0) == 0) {
      kernels::layer_norm_forward(rows, d, x.data(), gamma.data(), beta.data(), real(1e-6), y.data(),
                                  mean.data(), rstd.data());
      kernels::softmax_forward(rows, d, y.data(), z.data());
    } else {
      reference::layer_norm_forward(rows, d, x.data(), gamma.data(), beta.data(), real(1e-6), y.data());
      reference::softmax_forward(rows, d, y.data(), z.data());
    }
    benchmark::DoNotOptimize(z.data());
  }
  state.SetLabel(impl_label(state.range(0)));
}
BENCHMARK(BM_LayerNormSoftmax)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
