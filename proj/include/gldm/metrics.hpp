#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gldm/common.hpp"

namespace gldm {
inline namespace GLDM_ABI {

/// Row-major single-channel map in double precision.
struct Map2d {
  index_t height = 0;
  index_t width = 0;
  std::vector<double> values;

  Map2d() = default;
  Map2d(index_t h, index_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}
  double& at(index_t y, index_t x) { return values[y * width + x]; }
  double at(index_t y, index_t x) const { return values[y * width + x]; }
  index_t size() const { return height * width; }
};

inline constexpr int kThresholds = 256;
inline constexpr double kBetaSquared = 0.3;
inline constexpr double kStructureAlpha = 0.5;
/// Double machine epsilon, the guard the reference toolboxes use.
inline constexpr double kMetricEps = 2.220446049250313e-16;

/// Per-threshold values for k = 0..255; pixel s counts as foreground at k when 255*s >= k.
struct ThresholdCurve {
  std::array<double, kThresholds> precision{};
  std::array<double, kThresholds> recall{};
  std::array<double, kThresholds> fmeasure{};
  double f_max = 0;
};

double mae(const Map2d& s, const Map2d& g);
ThresholdCurve f_measure_curve(const Map2d& s, const Map2d& g);
double s_measure(const Map2d& s, const Map2d& g);
std::array<double, kThresholds> e_measure_curve(const Map2d& s, const Map2d& g);
/// Maximum of the E-measure curve.
double e_measure(const Map2d& s, const Map2d& g);

struct MetricReport {
  double mae = 0;
  double s_measure = 0;
  double f_max = 0;
  /// Headline E-measure is the maximum of the mean curve; the mean is kept too.
  double e_max = 0;
  double e_mean = 0;
  std::array<double, kThresholds> precision{};
  std::array<double, kThresholds> recall{};
  std::array<double, kThresholds> fmeasure{};
  std::array<double, kThresholds> emeasure{};
  index_t n_images = 0;
  /// Images whose ground truth has no foreground; left out of F and PR.
  index_t n_empty_gt = 0;
};

/// Streams images into a dataset report.
class MetricAccumulator {
 public:
  void add(const Map2d& s, const Map2d& g);
  MetricReport report() const;

 private:
  index_t n_ = 0, n_f_ = 0, n_empty_ = 0;
  double mae_ = 0, s_ = 0;
  std::array<double, kThresholds> p_{}, r_{}, f_{}, e_{};
};

/// Loads an 8-bit image as a [0,1] map.
Map2d load_map(const std::string& path);
/// Maps at least 128 to 1, the rest to 0.
Map2d binarize_gt(const Map2d& raw);
/// (s - min) / (max - min); a constant map is returned unchanged.
Map2d minmax_normalize(const Map2d& s);
Map2d resize_map(const Map2d& s, index_t height, index_t width);

/// Scores each (prediction path, ground-truth path) pair. Predictions are
/// min-max normalized and resized to the mask's size when they differ.
MetricReport evaluate_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

/// Scores every ground-truth mask in `gt_dir` against the same-stem file in `pred_dir`.
MetricReport evaluate_dataset(const std::string& pred_dir, const std::string& gt_dir);

void write_report(const MetricReport& report, const std::string& path);
void write_pr_csv(const MetricReport& report, const std::string& path);
/// One row in the order E, S, F, MAE.
std::string table_row(const MetricReport& report, const std::string& label = "");
void render_pr_curve(const MetricReport& report, const std::string& png_path);

}  // namespace GLDM_ABI
}  // namespace gldm
