#include "gldm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace fs = std::filesystem;
namespace {

void require_same(const Map2d& s, const Map2d& g, const char* what) {
  if (s.height != g.height || s.width != g.width) {
    throw ShapeError(std::string(what) + ": prediction " + std::to_string(s.height) + "x" +
                     std::to_string(s.width) + " vs ground truth " + std::to_string(g.height) +
                     "x" + std::to_string(g.width));
  }
  if (s.size() == 0) throw ShapeError(std::string(what) + ": empty map");
}

// Highest threshold index k with 255*s >= k.
int threshold_bin(double s) {
  const double v = std::floor(s * 255.0);
  return static_cast<int>(std::clamp(v, 0.0, 255.0));
}

// Pixel counts at each threshold: predicted foreground overall and on true foreground.
struct ThresholdCounts {
  std::array<double, kThresholds> pred_fg{};
  std::array<double, kThresholds> true_pos{};
  double gt_fg = 0;
  double n = 0;
};

ThresholdCounts count_thresholds(const Map2d& s, const Map2d& g) {
  std::array<double, kThresholds> hist_fg{}, hist_bg{};
  ThresholdCounts c;
  for (index_t i = 0; i < s.size(); ++i) {
    const int b = threshold_bin(s.values[i]);
    if (g.values[i] > 0.5) {
      hist_fg[b] += 1;
      c.gt_fg += 1;
    } else {
      hist_bg[b] += 1;
    }
  }
  double fg = 0, bg = 0;
  for (int k = kThresholds - 1; k >= 0; --k) {
    fg += hist_fg[k];
    bg += hist_bg[k];
    c.true_pos[k] = fg;
    c.pred_fg[k] = fg + bg;
  }
  c.n = static_cast<double>(s.size());
  return c;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

// Foreground similarity of one region: 2x / (x^2 + 1 + sigma + eps).
double object_similarity(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double x = mean_of(values);
  double var = 0;
  for (double v : values) var += (v - x) * (v - x);
  const double sigma = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
  return 2 * x / (x * x + 1 + sigma + kMetricEps);
}

double object_score(const Map2d& s, const Map2d& g) {
  std::vector<double> fg, bg;
  for (index_t i = 0; i < s.size(); ++i) {
    if (g.values[i] > 0.5) {
      fg.push_back(s.values[i]);
    } else {
      bg.push_back(1.0 - s.values[i]);
    }
  }
  const double u = static_cast<double>(fg.size()) / static_cast<double>(s.size());
  return u * object_similarity(fg) + (1 - u) * object_similarity(bg);
}

double block_ssim(const Map2d& s, const Map2d& g, index_t y0, index_t y1, index_t x0, index_t x1) {
  const double n = static_cast<double>((y1 - y0) * (x1 - x0));
  double mx = 0, my = 0;
  for (index_t y = y0; y < y1; ++y)
    for (index_t x = x0; x < x1; ++x) {
      mx += s.at(y, x);
      my += g.at(y, x);
    }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (index_t y = y0; y < y1; ++y)
    for (index_t x = x0; x < x1; ++x) {
      const double dx = s.at(y, x) - mx, dy = g.at(y, x) - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
  sxx /= (n - 1 + kMetricEps);
  syy /= (n - 1 + kMetricEps);
  sxy /= (n - 1 + kMetricEps);
  const double alpha = 4 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sxx + syy);
  if (alpha != 0) return alpha / (beta + kMetricEps);
  return beta == 0 ? 1.0 : 0.0;
}

double region_score(const Map2d& s, const Map2d& g) {
  const index_t h = s.height, w = s.width;
  double cy = 0, cx = 0, count = 0;
  for (index_t y = 0; y < h; ++y)
    for (index_t x = 0; x < w; ++x)
      if (g.at(y, x) > 0.5) {
        cy += static_cast<double>(y);
        cx += static_cast<double>(x);
        count += 1;
      }
  // Round half to even, then split after that row and column.
  index_t x_split, y_split;
  if (count == 0) {
    x_split = static_cast<index_t>(std::nearbyint(w / 2.0));
    y_split = static_cast<index_t>(std::nearbyint(h / 2.0));
  } else {
    x_split = static_cast<index_t>(std::nearbyint(cx / count)) + 1;
    y_split = static_cast<index_t>(std::nearbyint(cy / count)) + 1;
  }
  const double area = static_cast<double>(h * w);
  const double w1 = static_cast<double>(x_split * y_split) / area;
  const double w2 = static_cast<double>(y_split * (w - x_split)) / area;
  const double w3 = static_cast<double>((h - y_split) * x_split) / area;
  const double w4 = 1 - w1 - w2 - w3;
  struct Block {
    double weight;
    index_t y0, y1, x0, x1;
  };
  const Block blocks[4] = {{w1, 0, y_split, 0, x_split},
                           {w2, 0, y_split, x_split, w},
                           {w3, y_split, h, 0, x_split},
                           {w4, y_split, h, x_split, w}};
  double score = 0;
  for (const Block& b : blocks) {
    // An empty block carries zero weight.
    if (b.y1 <= b.y0 || b.x1 <= b.x0) continue;
    score += b.weight * block_ssim(s, g, b.y0, b.y1, b.x0, b.x1);
  }
  return score;
}

// Enhanced alignment of binary prediction p against binary truth q, given their means.
double enhanced(double p, double q, double mean_p, double mean_q) {
  const double a = p - mean_p, b = q - mean_q;
  const double xi = 2 * a * b / (a * a + b * b + kMetricEps);
  return (xi + 1) * (xi + 1) / 4;
}

std::vector<fs::path> image_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double mae(const Map2d& s, const Map2d& g) {
  require_same(s, g, "mae");
  double acc = 0;
  for (index_t i = 0; i < s.size(); ++i) acc += std::fabs(s.values[i] - g.values[i]);
  return acc / static_cast<double>(s.size());
}

ThresholdCurve f_measure_curve(const Map2d& s, const Map2d& g) {
  require_same(s, g, "f_measure");
  const ThresholdCounts c = count_thresholds(s, g);
  ThresholdCurve curve;
  for (int k = 0; k < kThresholds; ++k) {
    const double tp = c.true_pos[k];
    const double p = c.pred_fg[k] > 0 ? tp / c.pred_fg[k] : 0.0;
    const double r = c.gt_fg > 0 ? tp / c.gt_fg : 0.0;
    const double den = kBetaSquared * p + r;
    curve.precision[k] = p;
    curve.recall[k] = r;
    curve.fmeasure[k] = den > 0 ? (1 + kBetaSquared) * p * r / den : 0.0;
    curve.f_max = std::max(curve.f_max, curve.fmeasure[k]);
  }
  return curve;
}

double s_measure(const Map2d& s, const Map2d& g) {
  require_same(s, g, "s_measure");
  double gt_mean = 0, s_mean = 0;
  for (index_t i = 0; i < s.size(); ++i) {
    gt_mean += g.values[i] > 0.5 ? 1.0 : 0.0;
    s_mean += s.values[i];
  }
  gt_mean /= static_cast<double>(s.size());
  s_mean /= static_cast<double>(s.size());
  if (gt_mean == 0) return 1 - s_mean;
  if (gt_mean == 1) return s_mean;
  const double score = kStructureAlpha * object_score(s, g) + (1 - kStructureAlpha) * region_score(s, g);
  return std::max(0.0, score);
}

std::array<double, kThresholds> e_measure_curve(const Map2d& s, const Map2d& g) {
  require_same(s, g, "e_measure");
  const ThresholdCounts c = count_thresholds(s, g);
  const double n = c.n;
  const double mean_q = c.gt_fg / n;
  std::array<double, kThresholds> curve{};
  for (int k = 0; k < kThresholds; ++k) {
    const double tp = c.true_pos[k];
    const double fp = c.pred_fg[k] - tp;
    const double fn = c.gt_fg - tp;
    const double tn = n - tp - fp - fn;
    double sum;
    if (c.gt_fg == 0) {
      sum = n - c.pred_fg[k];
    } else if (c.gt_fg == n) {
      sum = c.pred_fg[k];
    } else {
      const double mean_p = c.pred_fg[k] / n;
      sum = tp * enhanced(1, 1, mean_p, mean_q) + fp * enhanced(1, 0, mean_p, mean_q) +
            fn * enhanced(0, 1, mean_p, mean_q) + tn * enhanced(0, 0, mean_p, mean_q);
    }
    curve[k] = sum / n;
  }
  return curve;
}

double e_measure(const Map2d& s, const Map2d& g) {
  const auto curve = e_measure_curve(s, g);
  return *std::max_element(curve.begin(), curve.end());
}

void MetricAccumulator::add(const Map2d& s, const Map2d& g) {
  mae_ += mae(s, g);
  s_ += s_measure(s, g);
  const auto e = e_measure_curve(s, g);
  for (int k = 0; k < kThresholds; ++k) e_[k] += e[k];
  bool empty = true;
  for (double v : g.values) {
    if (v > 0.5) {
      empty = false;
      break;
    }
  }
  if (empty) {
    ++n_empty_;
  } else {
    const ThresholdCurve f = f_measure_curve(s, g);
    for (int k = 0; k < kThresholds; ++k) {
      p_[k] += f.precision[k];
      r_[k] += f.recall[k];
      f_[k] += f.fmeasure[k];
    }
    ++n_f_;
  }
  ++n_;
}

MetricReport MetricAccumulator::report() const {
  MetricReport r;
  r.n_images = n_;
  r.n_empty_gt = n_empty_;
  if (n_ == 0) return r;
  const double inv = 1.0 / static_cast<double>(n_);
  r.mae = mae_ * inv;
  r.s_measure = s_ * inv;
  double e_sum = 0;
  for (int k = 0; k < kThresholds; ++k) {
    r.emeasure[k] = e_[k] * inv;
    r.e_max = std::max(r.e_max, r.emeasure[k]);
    e_sum += r.emeasure[k];
  }
  r.e_mean = e_sum / kThresholds;
  if (n_f_ > 0) {
    const double inv_f = 1.0 / static_cast<double>(n_f_);
    for (int k = 0; k < kThresholds; ++k) {
      r.precision[k] = p_[k] * inv_f;
      r.recall[k] = r_[k] * inv_f;
      r.fmeasure[k] = f_[k] * inv_f;
      r.f_max = std::max(r.f_max, r.fmeasure[k]);
    }
  }
  return r;
}

Map2d load_map(const std::string& path) {
  cv::Mat img = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (img.empty()) throw IoError("cannot read image '" + path + "'");
  Map2d m(img.rows, img.cols);
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.cols; ++x) m.at(y, x) = row[x] / 255.0;
  }
  return m;
}

Map2d binarize_gt(const Map2d& raw) {
  Map2d out(raw.height, raw.width);
  for (index_t i = 0; i < raw.size(); ++i) out.values[i] = raw.values[i] > 0.5 ? 1.0 : 0.0;
  return out;
}

Map2d minmax_normalize(const Map2d& s) {
  if (s.size() == 0) return s;
  const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
  const double mn = *lo, mx = *hi;
  // A constant map carries no ranking to stretch; keep it as is, as the
  // reference toolbox does. Otherwise the range is nonzero and needs no guard,
  // which keeps an exact 0/1 map exact.
  if (mx == mn) return s;
  Map2d out(s.height, s.width);
  for (index_t i = 0; i < s.size(); ++i) out.values[i] = (s.values[i] - mn) / (mx - mn);
  return out;
}

Map2d resize_map(const Map2d& s, index_t height, index_t width) {
  if (s.height == height && s.width == width) return s;
  cv::Mat src(static_cast<int>(s.height), static_cast<int>(s.width), CV_64F,
              const_cast<double*>(s.values.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0,
             cv::INTER_LINEAR);
  Map2d out(height, width);
  for (int y = 0; y < dst.rows; ++y)
    for (int x = 0; x < dst.cols; ++x) out.at(y, x) = dst.at<double>(y, x);
  return out;
}

MetricReport evaluate_dataset(const std::string& pred_dir, const std::string& gt_dir) {
  if (!fs::is_directory(gt_dir)) throw DataError("ground-truth directory '" + gt_dir + "' does not exist");
  if (!fs::is_directory(pred_dir)) throw DataError("prediction directory '" + pred_dir + "' does not exist");
  const auto gts = image_files(gt_dir);
  if (gts.empty()) throw DataError("no ground-truth images in '" + gt_dir + "'");
  std::map<std::string, fs::path> preds;
  for (const auto& p : image_files(pred_dir)) preds.emplace(p.stem().string(), p);

  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& gt_path : gts) {
    const auto it = preds.find(gt_path.stem().string());
    if (it == preds.end()) {
      throw DataError("no prediction for '" + gt_path.string() + "' in '" + pred_dir + "'");
    }
    pairs.emplace_back(it->second.string(), gt_path.string());
  }
  return evaluate_pairs(pairs);
}

MetricReport evaluate_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw DataError("nothing to evaluate");
  MetricAccumulator acc;
  for (const auto& [pred_path, gt_path] : pairs) {
    const Map2d g = binarize_gt(load_map(gt_path));
    Map2d s = minmax_normalize(load_map(pred_path));
    s = resize_map(s, g.height, g.width);
    acc.add(s, g);
  }
  return acc.report();
}

void write_report(const MetricReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report '" + path + "'");
  out << std::setprecision(10);
  out << "# headline e_measure is the maximum of the mean E curve; e_measure_mean is its mean\n"
      << "n_images = " << r.n_images << "\n"
      << "n_empty_gt = " << r.n_empty_gt << "\n"
      << "e_measure = " << r.e_max << "\n"
      << "e_measure_mean = " << r.e_mean << "\n"
      << "s_measure = " << r.s_measure << "\n"
      << "f_max = " << r.f_max << "\n"
      << "mae = " << r.mae << "\n";
  if (!out) throw IoError("failed writing report '" + path + "'");
}

void write_pr_csv(const MetricReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write PR curve '" + path + "'");
  out << std::setprecision(10) << "threshold,precision,recall,fmeasure\n";
  for (int k = 0; k < kThresholds; ++k) {
    out << k / 255.0 << "," << r.precision[k] << "," << r.recall[k] << "," << r.fmeasure[k] << "\n";
  }
  if (!out) throw IoError("failed writing PR curve '" + path + "'");
}

std::string table_row(const MetricReport& r, const std::string& label) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  if (!label.empty()) out << label << " ";
  out << "E_xi=" << r.e_max << " S_alpha=" << r.s_measure << " F_beta=" << r.f_max
      << " MAE=" << r.mae;
  return out.str();
}

void render_pr_curve(const MetricReport& r, const std::string& png_path) {
  constexpr int kSize = 512, kMargin = 40;
  cv::Mat img(kSize, kSize, CV_8UC3, cv::Scalar(255, 255, 255));
  const int span = kSize - 2 * kMargin;
  auto to_px = [&](double recall, double precision) {
    return cv::Point(kMargin + static_cast<int>(std::lround(recall * span)),
                     kSize - kMargin - static_cast<int>(std::lround(precision * span)));
  };
  cv::rectangle(img, to_px(0, 0), to_px(1, 1), cv::Scalar(0, 0, 0), 1);
  for (int t = 1; t < 10; ++t) {
    cv::line(img, to_px(t / 10.0, 0), to_px(t / 10.0, 1), cv::Scalar(225, 225, 225), 1);
    cv::line(img, to_px(0, t / 10.0), to_px(1, t / 10.0), cv::Scalar(225, 225, 225), 1);
  }
  for (int k = 1; k < kThresholds; ++k) {
    cv::line(img, to_px(r.recall[k - 1], r.precision[k - 1]), to_px(r.recall[k], r.precision[k]),
             cv::Scalar(200, 60, 20), 2, cv::LINE_AA);
  }
  cv::putText(img, "recall", cv::Point(kSize / 2 - 25, kSize - 10), cv::FONT_HERSHEY_SIMPLEX, 0.5,
              cv::Scalar(0, 0, 0), 1);
  cv::putText(img, "precision", cv::Point(5, kMargin - 15), cv::FONT_HERSHEY_SIMPLEX, 0.5,
              cv::Scalar(0, 0, 0), 1);
  if (!cv::imwrite(png_path, img)) throw IoError("cannot write plot '" + png_path + "'");
}

}  // namespace GLDM_ABI
}  // namespace gldm
