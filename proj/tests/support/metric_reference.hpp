#pragma once

// Straightforward pixel-loop versions of the saliency measures, written from
// the published definitions (and the reference toolbox's edge-case handling)
// without sharing code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace gldm::testing {

struct RefMap {
  int h = 0, w = 0;
  std::vector<double> v;
  double operator()(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline constexpr double kRefEps = 2.220446049250313e-16;

inline double ref_mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double ref_mae(const RefMap& s, const RefMap& g) {
  double acc = 0;
  for (std::size_t i = 0; i < s.v.size(); ++i) acc += std::fabs(s.v[i] - g.v[i]);
  return acc / static_cast<double>(s.v.size());
}

struct RefPR {
  std::array<double, 256> precision{}, recall{}, f{};
  double f_max = 0;
};

inline RefPR ref_pr(const RefMap& s, const RefMap& g) {
  RefPR r;
  for (int k = 0; k < 256; ++k) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.v.size(); ++i) {
      const bool pred = s.v[i] * 255.0 >= k;
      const bool truth = g.v[i] > 0.5;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0;
    const double rc = tp + fn > 0 ? tp / (tp + fn) : 0;
    r.precision[k] = p;
    r.recall[k] = rc;
    r.f[k] = (0.3 * p + rc) > 0 ? 1.3 * p * rc / (0.3 * p + rc) : 0;
    r.f_max = std::max(r.f_max, r.f[k]);
  }
  return r;
}

// Object-level similarity of the values inside a region: 2x / (x^2 + 1 + sigma + eps).
inline double ref_s_object(const std::vector<double>& vals) {
  if (vals.empty()) return 0;
  const double x = ref_mean(vals);
  double sigma = 0;
  if (vals.size() > 1) {
    double ss = 0;
    for (double v : vals) ss += (v - x) * (v - x);
    sigma = std::sqrt(ss / static_cast<double>(vals.size() - 1));
  }
  return 2 * x / (x * x + 1 + sigma + kRefEps);
}

inline double ref_block_ssim(const std::vector<double>& p, const std::vector<double>& g) {
  const double n = static_cast<double>(p.size());
  const double x = ref_mean(p), y = ref_mean(g);
  double sx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sx += (p[i] - x) * (p[i] - x);
    sy += (g[i] - y) * (g[i] - y);
    sxy += (p[i] - x) * (g[i] - y);
  }
  sx /= n - 1 + kRefEps;
  sy /= n - 1 + kRefEps;
  sxy /= n - 1 + kRefEps;
  const double alpha = 4 * x * y * sxy;
  const double beta = (x * x + y * y) * (sx + sy);
  if (alpha != 0) return alpha / (beta + kRefEps);
  if (beta == 0) return 1;
  return 0;
}

inline double ref_s_measure(const RefMap& s, const RefMap& g) {
  std::vector<double> gt(g.v.size());
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = g.v[i] > 0.5 ? 1 : 0;
  const double y = ref_mean(gt);
  if (y == 0) return 1 - ref_mean(s.v);
  if (y == 1) return ref_mean(s.v);

  std::vector<double> fg, bg;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == 1) fg.push_back(s.v[i]);
    else bg.push_back(1 - s.v[i]);
  }
  const double object = y * ref_s_object(fg) + (1 - y) * ref_s_object(bg);

  // Centroid of the foreground, rounded half to even, then split after it.
  double sy = 0, sx = 0, cnt = 0;
  for (int yy = 0; yy < g.h; ++yy)
    for (int xx = 0; xx < g.w; ++xx)
      if (gt[static_cast<std::size_t>(yy) * g.w + xx] == 1) {
        sy += yy;
        sx += xx;
        cnt += 1;
      }
  const int cx = static_cast<int>(std::nearbyint(sx / cnt)) + 1;
  const int cy = static_cast<int>(std::nearbyint(sy / cnt)) + 1;
  const double area = static_cast<double>(g.h) * g.w;
  const double w1 = double(cx) * cy / area;
  const double w2 = double(cy) * (g.w - cx) / area;
  const double w3 = double(g.h - cy) * cx / area;
  const double w4 = 1 - w1 - w2 - w3;
  auto block = [&](int y0, int y1, int x0, int x1) {
    std::vector<double> p, q;
    for (int yy = y0; yy < y1; ++yy)
      for (int xx = x0; xx < x1; ++xx) {
        p.push_back(s(yy, xx));
        q.push_back(gt[static_cast<std::size_t>(yy) * g.w + xx]);
      }
    return p.empty() ? 0.0 : ref_block_ssim(p, q);
  };
  const double region = w1 * block(0, cy, 0, cx) + w2 * block(0, cy, cx, g.w) +
                        w3 * block(cy, g.h, 0, cx) + w4 * block(cy, g.h, cx, g.w);
  return std::max(0.0, 0.5 * object + 0.5 * region);
}

inline std::array<double, 256> ref_e_curve(const RefMap& s, const RefMap& g) {
  std::array<double, 256> curve{};
  const std::size_t n = s.v.size();
  std::vector<double> gt(n);
  for (std::size_t i = 0; i < n; ++i) gt[i] = g.v[i] > 0.5 ? 1 : 0;
  const double mg = ref_mean(gt);
  for (int k = 0; k < 256; ++k) {
    std::vector<double> fm(n);
    for (std::size_t i = 0; i < n; ++i) fm[i] = s.v[i] * 255.0 >= k ? 1 : 0;
    double sum = 0;
    if (mg == 0) {
      for (double v : fm) sum += 1 - v;
    } else if (mg == 1) {
      for (double v : fm) sum += v;
    } else {
      const double mf = ref_mean(fm);
      for (std::size_t i = 0; i < n; ++i) {
        const double a = fm[i] - mf, b = gt[i] - mg;
        const double xi = 2 * a * b / (a * a + b * b + kRefEps);
        sum += (xi + 1) * (xi + 1) / 4;
      }
    }
    curve[k] = sum / static_cast<double>(n);
  }
  return curve;
}

/// 64-bit generator output mapped to [0, 1) without library distributions,
/// so fixtures are identical on every platform.
inline double fixture_uniform(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

struct MetricFixture {
  const char* name;
  RefMap pred, gt;
};

/// Frozen 16x16 cases covering the ordinary path and every degenerate branch.
inline std::vector<MetricFixture> metric_fixtures() {
  constexpr int kH = 16, kW = 16;
  std::vector<MetricFixture> out;
  auto blank = [] { return RefMap{kH, kW, std::vector<double>(kH * kW, 0.0)}; };
  std::uint64_t st = 20240531;

  {  // Soft prediction of an off-centre ellipse.
    RefMap p = blank(), g = blank();
    for (int y = 0; y < kH; ++y)
      for (int x = 0; x < kW; ++x) {
        const double d = std::pow((x - 9.5) / 4.0, 2) + std::pow((y - 6.0) / 3.5, 2);
        g.v[y * kW + x] = d <= 1 ? 1 : 0;
        p.v[y * kW + x] = std::clamp(std::exp(-d) + 0.15 * (fixture_uniform(st) - 0.5), 0.0, 1.0);
      }
    out.push_back({"ellipse", p, g});
  }
  {  // 8-bit quantized noise against a blocky mask: hits threshold boundaries exactly.
    RefMap p = blank(), g = blank();
    for (int i = 0; i < kH * kW; ++i) {
      p.v[i] = std::floor(fixture_uniform(st) * 256) / 255.0;
      g.v[i] = ((i / kW) / 4 + (i % kW) / 4) % 2 == 0 ? 1 : 0;
    }
    out.push_back({"quantized", p, g});
  }
  {  // Empty ground truth.
    RefMap p = blank(), g = blank();
    for (double& v : p.v) v = 0.3 * fixture_uniform(st);
    out.push_back({"empty_gt", p, g});
  }
  {  // Full ground truth.
    RefMap p = blank(), g = blank();
    for (double& v : p.v) v = 0.5 + 0.5 * fixture_uniform(st);
    for (double& v : g.v) v = 1;
    out.push_back({"full_gt", p, g});
  }
  {  // One foreground pixel: single-pixel object statistics.
    RefMap p = blank(), g = blank();
    for (double& v : p.v) v = fixture_uniform(st);
    g.v[5 * kW + 11] = 1;
    out.push_back({"single_pixel", p, g});
  }
  {  // Foreground in the bottom-right corner: split lands on the border, empty blocks.
    RefMap p = blank(), g = blank();
    for (int y = 0; y < kH; ++y)
      for (int x = 0; x < kW; ++x) {
        g.v[y * kW + x] = (y >= 14 && x >= 14) ? 1 : 0;
        p.v[y * kW + x] = fixture_uniform(st);
      }
    out.push_back({"corner", p, g});
  }
  {  // Inverted prediction.
    RefMap p = blank(), g = blank();
    for (int i = 0; i < kH * kW; ++i) {
      g.v[i] = (i % kW) < 7 ? 1 : 0;
      p.v[i] = 1 - g.v[i];
    }
    out.push_back({"inverted", p, g});
  }
  {  // All-zero prediction.
    RefMap p = blank(), g = blank();
    for (int i = 0; i < kH * kW; ++i) g.v[i] = (i / kW) > 9 ? 1 : 0;
    out.push_back({"zero_pred", p, g});
  }
  return out;
}

}  // namespace gldm::testing
