#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "gldm/tensor.hpp"

namespace gldm {
inline namespace GLDM_ABI {

struct SampleRecord {
  std::string dataset;
  std::string stem;
  std::string rgb_path;
  std::string depth_path;
  /// Empty for inference-only inputs.
  std::string gt_path;
};

struct AugmentConfig {
  bool enabled = true;
  double flip_prob = 0.5;
  double rotation_deg = 15.0;
  double crop_min = 0.9;
  double jitter = 0.1;
};

struct DataConfig {
  std::string root;
  index_t image_size = 256;
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
  AugmentConfig augment;
};

/// Every `<root>/<dataset>/{RGB,depth,GT}` triple below root, or below
/// `<root>/<split>` when that directory exists. Sorted by dataset then stem.
/// Record counts that differ from the standard corpora are reported in `warnings`.
std::vector<SampleRecord> build_manifest(const std::string& root, const std::string& split,
                                         std::vector<std::string>* warnings = nullptr);

/// RGB/ and depth/ pairs in `dir`, without ground truth.
std::vector<SampleRecord> build_inference_pairs(const std::string& dir);

void write_manifest(const std::vector<SampleRecord>& records, const std::string& path);

/// Images at the working resolution before standardization: rgb CV_32FC3 in
/// [0,1] (RGB order), depth CV_32FC1 in [0,1], gt CV_32FC1 in {0,1}.
struct RawSample {
  cv::Mat rgb, depth, gt;
  int original_height = 0;
  int original_width = 0;
};

RawSample load_raw(const SampleRecord& record, index_t size);

/// One geometric transform for all three images; colour jitter on RGB only.
void augment(RawSample& sample, std::uint64_t seed, const AugmentConfig& config);

struct Sample {
  Tensor rgb;    // (3, S, S), standardized
  Tensor depth;  // (3, S, S), three identical standardized channels
  Tensor gt;     // (1, S, S) in {0, 1}; empty without ground truth
};

Sample to_tensors(const RawSample& raw, const DataConfig& config);
Sample preprocess(const SampleRecord& record, const DataConfig& config);

struct Batch {
  Tensor rgb, depth, gt;
  std::vector<std::string> stems;
};

Batch collate(const std::vector<Sample>& samples, const std::vector<std::string>& stems);

/// Seed for one sample's augmentation draw.
std::uint64_t sample_seed(std::uint64_t seed, std::int64_t epoch, std::int64_t index);

/// Training order for one epoch, a permutation of 0..n-1.
std::vector<index_t> epoch_order(index_t n, std::uint64_t seed, std::int64_t epoch, bool shuffle);

/// Writes a [0,1] map as an 8-bit grayscale image, value round(255 s).
void write_map_png(const std::string& path, const float* values, int height, int width);
void write_map_png(const std::string& path, const double* values, int height, int width);

}  // namespace GLDM_ABI
}  // namespace gldm
