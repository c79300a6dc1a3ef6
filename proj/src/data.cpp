#include "gldm/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace fs = std::filesystem;
namespace {

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp";
}

std::map<std::string, fs::path> images_by_stem(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image(entry.path())) {
      auto [it, inserted] = out.emplace(entry.path().stem().string(), entry.path());
      if (!inserted) {
        throw DataError("duplicate stem '" + it->first + "' in " + dir.string() + ": " +
                        it->second.filename().string() + " and " + entry.path().filename().string());
      }
    }
  }
  return out;
}

// Sizes of the standard splits; only consulted for warnings.
const std::map<std::string, std::map<std::string, std::set<std::size_t>>>& standard_counts() {
  static const std::map<std::string, std::map<std::string, std::set<std::size_t>>> counts{
      {"train", {{"NLPR", {700}}, {"DUT-RGBD", {800}}, {"NJUD", {1485}}}},
      {"test",
       {{"NLPR", {300}}, {"DUT-RGBD", {400}}, {"NJUD", {518}}, {"SIP", {929}},
        {"STEREO", {797, 1000}}, {"SSD", {80}}}},
  };
  return counts;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

cv::Mat read_image(const std::string& path, int flags) {
  cv::Mat img = cv::imread(path, flags);
  if (img.empty()) throw IoError("cannot read image '" + path + "'");
  return img;
}

void minmax_inplace(cv::Mat& m) {
  double lo, hi;
  cv::minMaxLoc(m, &lo, &hi);
  if (hi > lo) {
    // cv's matrix expression folds this into one affine step, which lets the
    // minimum land slightly below zero.
    const float flo = static_cast<float>(lo), range = static_cast<float>(hi - lo);
    m.forEach<float>([&](float& v, const int*) { v = (v - flo) / range; });
  } else {
    m.setTo(0);
  }
}

}  // namespace

std::vector<SampleRecord> build_manifest(const std::string& root, const std::string& split,
                                         std::vector<std::string>* warnings) {
  fs::path base(root);
  if (root.empty() || !fs::is_directory(base)) throw DataError("dataset root '" + root + "' does not exist");
  if (!split.empty() && fs::is_directory(base / split)) base /= split;

  std::vector<fs::path> datasets;
  for (const auto& entry : fs::directory_iterator(base)) {
    if (entry.is_directory() && fs::is_directory(entry.path() / "GT")) datasets.push_back(entry.path());
  }
  std::sort(datasets.begin(), datasets.end());
  if (datasets.empty()) {
    throw DataError("no datasets with a GT directory under '" + base.string() + "'");
  }

  std::vector<SampleRecord> records;
  std::vector<std::string> problems;
  for (const auto& ds : datasets) {
    const std::string name = ds.filename().string();
    for (const char* sub : {"RGB", "depth"}) {
      if (!fs::is_directory(ds / sub)) throw DataError("missing directory '" + (ds / sub).string() + "'");
    }
    const auto rgb = images_by_stem(ds / "RGB");
    const auto depth = images_by_stem(ds / "depth");
    const auto gt = images_by_stem(ds / "GT");
    std::size_t count = 0;
    for (const auto& [stem, gt_path] : gt) {
      const auto r = rgb.find(stem);
      const auto d = depth.find(stem);
      if (r == rgb.end()) problems.push_back("ground truth without RGB: " + gt_path.string());
      if (d == depth.end()) problems.push_back("ground truth without depth: " + gt_path.string());
      if (r == rgb.end() || d == depth.end()) continue;
      records.push_back({name, stem, r->second.string(), d->second.string(), gt_path.string()});
      ++count;
    }
    for (const auto& [stem, path] : rgb) {
      if (!gt.count(stem)) problems.push_back("RGB without ground truth: " + path.string());
    }
    const auto& table = standard_counts();
    if (warnings && table.count(split) && table.at(split).count(name)) {
      const auto& expected = table.at(split).at(name);
      if (!expected.count(count)) {
        warnings->push_back(name + " " + split + " split has " + std::to_string(count) +
                            " samples; the standard split has " + std::to_string(*expected.begin()));
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " orphan file(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  if (records.empty()) throw DataError("no samples found under '" + base.string() + "'");
  return records;
}

std::vector<SampleRecord> build_inference_pairs(const std::string& dir) {
  const fs::path base(dir);
  if (!fs::is_directory(base / "RGB")) throw DataError("missing directory '" + (base / "RGB").string() + "'");
  if (!fs::is_directory(base / "depth")) throw DataError("missing directory '" + (base / "depth").string() + "'");
  const auto rgb = images_by_stem(base / "RGB");
  const auto depth = images_by_stem(base / "depth");
  if (rgb.empty()) throw DataError("no RGB images in '" + (base / "RGB").string() + "'");
  std::vector<SampleRecord> out;
  std::vector<std::string> missing;
  for (const auto& [stem, path] : rgb) {
    const auto d = depth.find(stem);
    if (d == depth.end()) {
      missing.push_back(path.string());
      continue;
    }
    out.push_back({base.filename().string(), stem, path.string(), d->second.string(), ""});
  }
  if (!missing.empty()) {
    std::string msg = "no depth counterpart for:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }
  return out;
}

void write_manifest(const std::vector<SampleRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  for (const auto& r : records) {
    out << r.dataset << '\t' << r.stem << '\t' << r.rgb_path << '\t' << r.depth_path << '\t'
        << r.gt_path << '\n';
  }
}

RawSample load_raw(const SampleRecord& record, index_t size) {
  if (size <= 0 || size % 32 != 0) throw ConfigError("image size must be a positive multiple of 32");
  const cv::Size target(static_cast<int>(size), static_cast<int>(size));
  RawSample s;

  cv::Mat bgr = read_image(record.rgb_path, cv::IMREAD_COLOR);
  s.original_height = bgr.rows;
  s.original_width = bgr.cols;
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  rgb.convertTo(rgb, CV_32FC3, 1.0 / 255.0);
  cv::resize(rgb, s.rgb, target, 0, 0, cv::INTER_LINEAR);

  cv::Mat depth = read_image(record.depth_path, cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
  depth.convertTo(depth, CV_32FC1);
  cv::resize(depth, s.depth, target, 0, 0, cv::INTER_LINEAR);
  minmax_inplace(s.depth);

  if (!record.gt_path.empty()) {
    cv::Mat gt = read_image(record.gt_path, cv::IMREAD_GRAYSCALE);
    gt.convertTo(gt, CV_32FC1, 1.0 / 255.0);
    cv::Mat resized;
    cv::resize(gt, resized, target, 0, 0, cv::INTER_NEAREST);
    cv::threshold(resized, s.gt, 0.5 - 1e-6, 1.0, cv::THRESH_BINARY);
  }
  return s;
}

void augment(RawSample& s, std::uint64_t seed, const AugmentConfig& c) {
  if (!c.enabled) return;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool flip = unit(rng) < c.flip_prob;
  const double angle = (2 * unit(rng) - 1) * c.rotation_deg;
  const double scale = c.crop_min + (1 - c.crop_min) * unit(rng);
  const double ox = unit(rng), oy = unit(rng);
  const double brightness = 1 + (2 * unit(rng) - 1) * c.jitter;
  const double contrast = 1 + (2 * unit(rng) - 1) * c.jitter;
  const double saturation = 1 + (2 * unit(rng) - 1) * c.jitter;

  const bool has_gt = !s.gt.empty();
  auto each = [&](auto&& fn) {
    fn(s.rgb, cv::INTER_LINEAR);
    fn(s.depth, cv::INTER_LINEAR);
    if (has_gt) fn(s.gt, cv::INTER_NEAREST);
  };
  if (flip) each([](cv::Mat& m, int) { cv::flip(m, m, 1); });
  if (angle != 0) {
    const cv::Point2f centre(s.rgb.cols / 2.0f, s.rgb.rows / 2.0f);
    const cv::Mat rot = cv::getRotationMatrix2D(centre, angle, 1.0);
    each([&](cv::Mat& m, int interp) {
      cv::Mat out;
      cv::warpAffine(m, out, rot, m.size(), interp, cv::BORDER_REFLECT_101);
      m = out;
    });
  }
  if (scale < 1) {
    const cv::Size full = s.rgb.size();
    const int cw = std::max(1, static_cast<int>(std::lround(full.width * scale)));
    const int ch = std::max(1, static_cast<int>(std::lround(full.height * scale)));
    const int x0 = static_cast<int>(std::floor(ox * (full.width - cw)));
    const int y0 = static_cast<int>(std::floor(oy * (full.height - ch)));
    const cv::Rect roi(x0, y0, cw, ch);
    each([&](cv::Mat& m, int interp) {
      cv::Mat out;
      cv::resize(m(roi), out, full, 0, 0, interp);
      m = out;
    });
  }
  if (c.jitter > 0) {
    cv::Mat img = s.rgb * brightness;
    cv::Mat gray;
    cv::cvtColor(img, gray, cv::COLOR_RGB2GRAY);
    const double mean_gray = cv::mean(gray)[0];
    img = (img - cv::Scalar::all(mean_gray)) * contrast + cv::Scalar::all(mean_gray);
    cv::cvtColor(img, gray, cv::COLOR_RGB2GRAY);
    cv::Mat gray3;
    cv::cvtColor(gray, gray3, cv::COLOR_GRAY2RGB);
    img = gray3 + (img - gray3) * saturation;
    cv::min(cv::max(img, 0.0), 1.0, s.rgb);
  }
  if (has_gt) cv::threshold(s.gt, s.gt, 0.5, 1.0, cv::THRESH_BINARY);
}

Sample to_tensors(const RawSample& raw, const DataConfig& config) {
  const int h = raw.rgb.rows, w = raw.rgb.cols;
  Sample out;
  out.rgb = Tensor({3, h, w});
  out.depth = Tensor({3, h, w});
  for (int y = 0; y < h; ++y) {
    const auto* rgb_row = raw.rgb.ptr<cv::Vec3f>(y);
    const auto* d_row = raw.depth.ptr<float>(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const index_t at = (static_cast<index_t>(c) * h + y) * w + x;
        out.rgb[at] = static_cast<real>((rgb_row[x][c] - config.mean[c]) / config.std[c]);
        out.depth[at] = static_cast<real>((d_row[x] - config.mean[c]) / config.std[c]);
      }
    }
  }
  if (!raw.gt.empty()) {
    out.gt = Tensor({1, h, w});
    for (int y = 0; y < h; ++y) {
      const auto* row = raw.gt.ptr<float>(y);
      for (int x = 0; x < w; ++x) out.gt[static_cast<index_t>(y) * w + x] = row[x] > 0.5f ? 1 : 0;
    }
  }
  return out;
}

Sample preprocess(const SampleRecord& record, const DataConfig& config) {
  return to_tensors(load_raw(record, config.image_size), config);
}

Batch collate(const std::vector<Sample>& samples, const std::vector<std::string>& stems) {
  if (samples.empty()) throw DataError("cannot collate an empty batch");
  const Shape& s = samples[0].rgb.shape();
  const index_t b = static_cast<index_t>(samples.size());
  Batch batch;
  batch.rgb = Tensor({b, s[0], s[1], s[2]});
  batch.depth = Tensor({b, s[0], s[1], s[2]});
  const bool has_gt = !samples[0].gt.empty();
  if (has_gt) batch.gt = Tensor({b, 1, s[1], s[2]});
  const index_t per = samples[0].rgb.numel();
  const index_t per_gt = s[1] * s[2];
  for (index_t i = 0; i < b; ++i) {
    const Sample& x = samples[i];
    if (x.rgb.shape() != s || x.depth.shape() != s || x.gt.empty() == has_gt) {
      throw ShapeError("samples in a batch must share one shape");
    }
    std::copy_n(x.rgb.data(), per, batch.rgb.data() + i * per);
    std::copy_n(x.depth.data(), per, batch.depth.data() + i * per);
    if (has_gt) std::copy_n(x.gt.data(), per_gt, batch.gt.data() + i * per_gt);
  }
  batch.stems = stems;
  return batch;
}

std::uint64_t sample_seed(std::uint64_t seed, std::int64_t epoch, std::int64_t index) {
  return splitmix(splitmix(splitmix(seed) ^ static_cast<std::uint64_t>(epoch)) ^
                  static_cast<std::uint64_t>(index));
}

std::vector<index_t> epoch_order(index_t n, std::uint64_t seed, std::int64_t epoch, bool shuffle) {
  std::vector<index_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    std::mt19937_64 rng(sample_seed(seed, epoch, -1));
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

namespace {
template <class T>
void write_map_impl(const std::string& path, const T* values, int height, int width) {
  cv::Mat img(height, width, CV_8UC1);
  for (int y = 0; y < height; ++y) {
    auto* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < width; ++x) {
      const double v = std::clamp(static_cast<double>(values[y * width + x]), 0.0, 1.0);
      row[x] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
  }
  if (!cv::imwrite(path, img)) throw IoError("cannot write image '" + path + "'");
}
}  // namespace

void write_map_png(const std::string& path, const float* values, int height, int width) {
  write_map_impl(path, values, height, width);
}

void write_map_png(const std::string& path, const double* values, int height, int width) {
  write_map_impl(path, values, height, width);
}

}  // namespace GLDM_ABI
}  // namespace gldm
