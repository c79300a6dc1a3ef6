#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "gldm/data.hpp"
#include "gldm/errors.hpp"
#include "support/fixtures.hpp"

using namespace gldm;
namespace fs = std::filesystem;
using gldm::testing::TempDir;
using gldm::testing::write_scenes;

namespace {

bool mats_equal(const cv::Mat& a, const cv::Mat& b) {
  if (a.size() != b.size() || a.type() != b.type()) return false;
  return cv::norm(a, b, cv::NORM_INF) == 0;
}

DataConfig data_config(index_t size = 64) {
  DataConfig c;
  c.image_size = size;
  return c;
}

void write_gray(const fs::path& path, const cv::Mat& m) {
  fs::create_directories(path.parent_path());
  ASSERT_TRUE(cv::imwrite(path.string(), m));
}

}  // namespace

TEST(Manifest, SortedByDatasetThenStem) {
  TempDir dir;
  write_scenes(dir / "train/NLPR", 3, 40, 48, 1, "b");
  write_scenes(dir / "train/DUT", 2, 40, 48, 2, "a");
  std::vector<std::string> warnings;
  const auto records = build_manifest(dir.path().string(), "train", &warnings);
  ASSERT_EQ(records.size(), 5u);
  EXPECT_EQ(records[0].dataset, "DUT");
  EXPECT_EQ(records[0].stem, "a000");
  EXPECT_EQ(records[2].dataset, "NLPR");
  EXPECT_EQ(records[2].stem, "b000");
  EXPECT_EQ(records[4].stem, "b002");
  // NLPR is a standard corpus name, so its small count is flagged but not fatal.
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("NLPR"), std::string::npos);
  EXPECT_EQ(build_manifest(dir.path().string(), "train").size(), 5u);
}

TEST(Manifest, FallsBackToRootWithoutSplitDirectory) {
  TempDir dir;
  write_scenes(dir / "toy", 3, 32, 32, 1);
  const auto records = build_manifest(dir.path().string(), "test");
  ASSERT_EQ(records.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(records[i].stem, "img00" + std::to_string(i));
}

TEST(Manifest, ErrorsNameTheProblem) {
  TempDir dir;
  EXPECT_THROW(build_manifest((dir / "missing").string(), "train"), DataError);
  EXPECT_THROW(build_manifest(dir.path().string(), "train"), DataError);
  EXPECT_THROW(build_manifest("", "train"), DataError);

  write_scenes(dir / "toy", 2, 32, 32, 1);
  fs::remove(dir / "toy/RGB/img001.png");
  try {
    build_manifest(dir.path().string(), "train");
    FAIL() << "orphan ground truth accepted";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("GT/img001.png"), std::string::npos) << e.what();
  }
}

TEST(Manifest, WritesOneLinePerRecord) {
  TempDir dir;
  write_scenes(dir / "toy", 3, 32, 32, 1);
  const auto records = build_manifest(dir.path().string(), "");
  write_manifest(records, (dir / "manifest.tsv").string());
  const auto lines = gldm::testing::read_lines(dir / "manifest.tsv");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[1].rfind("toy\timg001\t", 0), 0u);
}

TEST(InferencePairs, RequireDepthForEveryImage) {
  TempDir dir;
  write_scenes(dir / "in", 3, 32, 32, 1);
  EXPECT_EQ(build_inference_pairs((dir / "in").string()).size(), 3u);
  EXPECT_TRUE(build_inference_pairs((dir / "in").string())[0].gt_path.empty());
  fs::remove(dir / "in/depth/img002.png");
  try {
    build_inference_pairs((dir / "in").string());
    FAIL() << "missing depth accepted";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("img002"), std::string::npos);
  }
  fs::create_directories(dir / "empty/RGB");
  fs::create_directories(dir / "empty/depth");
  EXPECT_THROW(build_inference_pairs((dir / "empty").string()), DataError);
  EXPECT_THROW(build_inference_pairs((dir / "nowhere").string()), DataError);
}

TEST(Preprocess, ResizesEverythingToWorkingSize) {
  TempDir dir;
  write_scenes(dir / "toy", 1, 480, 640, 3);
  const auto records = build_manifest(dir.path().string(), "");
  const Sample s = preprocess(records[0], data_config(64));
  EXPECT_EQ(s.rgb.shape(), (Shape{3, 64, 64}));
  EXPECT_EQ(s.depth.shape(), (Shape{3, 64, 64}));
  EXPECT_EQ(s.gt.shape(), (Shape{1, 64, 64}));
  const RawSample raw = load_raw(records[0], 64);
  EXPECT_EQ(raw.original_height, 480);
  EXPECT_EQ(raw.original_width, 640);
  EXPECT_THROW(load_raw(records[0], 50), ConfigError);
}

TEST(Preprocess, DepthReplicatedAndStandardized) {
  TempDir dir;
  write_scenes(dir / "toy", 1, 64, 64, 4);
  const auto rec = build_manifest(dir.path().string(), "")[0];
  const DataConfig cfg = data_config(64);
  const RawSample raw = load_raw(rec, 64);
  double lo, hi;
  cv::minMaxLoc(raw.depth, &lo, &hi);
  EXPECT_EQ(lo, 0);
  EXPECT_NEAR(hi, 1, 1e-6);
  const Sample s = to_tensors(raw, cfg);
  const index_t plane = 64 * 64;
  for (index_t i = 0; i < plane; ++i) {
    const double d = (s.depth[i] * cfg.std[0] + cfg.mean[0]);
    ASSERT_NEAR((s.depth[plane + i] * cfg.std[1] + cfg.mean[1]), d, 1e-5);
    ASSERT_NEAR((s.depth[2 * plane + i] * cfg.std[2] + cfg.mean[2]), d, 1e-5);
  }
  const int y = 10, x = 20;
  const cv::Vec3f px = raw.rgb.at<cv::Vec3f>(y, x);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(s.rgb[(c * 64 + y) * 64 + x], (px[c] - cfg.mean[c]) / cfg.std[c], 1e-5);
  }
}

TEST(Preprocess, ConstantDepthBecomesZeros) {
  TempDir dir;
  write_scenes(dir / "toy", 1, 64, 64, 5);
  write_gray(dir / "toy/depth/img000.png", cv::Mat(64, 64, CV_8UC1, cv::Scalar(137)));
  const RawSample raw = load_raw(build_manifest(dir.path().string(), "")[0], 64);
  EXPECT_EQ(cv::countNonZero(raw.depth), 0);
}

TEST(Preprocess, GroundTruthBinarizedAtHalf) {
  TempDir dir;
  write_scenes(dir / "toy", 1, 64, 64, 6);
  cv::Mat gt(64, 64, CV_8UC1);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) gt.at<std::uint8_t>(y, x) = x < 20 ? 0 : (x < 40 ? 128 : 255);
  }
  write_gray(dir / "toy/GT/img000.png", gt);
  const Sample s = preprocess(build_manifest(dir.path().string(), "")[0], data_config(64));
  for (index_t i = 0; i < s.gt.numel(); ++i) {
    const int x = static_cast<int>(i % 64);
    ASSERT_EQ(s.gt[i], x < 20 ? 0 : 1) << "x = " << x;
  }
}

TEST(Preprocess, UnreadableFilesAreIoErrors) {
  TempDir dir;
  write_scenes(dir / "toy", 1, 32, 32, 7);
  {
    std::ofstream bad(dir / "toy/RGB/img000.png");
    bad << "not an image";
  }
  EXPECT_THROW(preprocess(build_manifest(dir.path().string(), "")[0], data_config(32)), IoError);
}

class Augment : public ::testing::Test {
 protected:
  void SetUp() override {
    write_scenes(dir_ / "toy", 1, 64, 64, 8);
    raw_ = load_raw(build_manifest(dir_.path().string(), "")[0], 64);
  }
  static RawSample copy(const RawSample& s) {
    RawSample out = s;
    out.rgb = s.rgb.clone();
    out.depth = s.depth.clone();
    out.gt = s.gt.clone();
    return out;
  }
  TempDir dir_;
  RawSample raw_;
};

TEST_F(Augment, SameSeedSameResult) {
  AugmentConfig cfg;
  RawSample a = copy(raw_), b = copy(raw_), c = copy(raw_);
  augment(a, 42, cfg);
  augment(b, 42, cfg);
  augment(c, 43, cfg);
  EXPECT_TRUE(mats_equal(a.rgb, b.rgb));
  EXPECT_TRUE(mats_equal(a.depth, b.depth));
  EXPECT_TRUE(mats_equal(a.gt, b.gt));
  EXPECT_FALSE(mats_equal(a.rgb, c.rgb));
}

TEST_F(Augment, DisabledIsIdentity) {
  AugmentConfig cfg;
  cfg.enabled = false;
  RawSample a = copy(raw_);
  augment(a, 42, cfg);
  EXPECT_TRUE(mats_equal(a.rgb, raw_.rgb));
  EXPECT_TRUE(mats_equal(a.depth, raw_.depth));
  EXPECT_TRUE(mats_equal(a.gt, raw_.gt));
}

TEST_F(Augment, FlipAppliesToAllImagesAndRoundTrips) {
  AugmentConfig cfg;
  cfg.flip_prob = 1;
  cfg.rotation_deg = 0;
  cfg.crop_min = 1;
  cfg.jitter = 0;
  RawSample a = copy(raw_);
  augment(a, 1, cfg);
  EXPECT_FALSE(mats_equal(a.gt, raw_.gt));
  for (cv::Mat* m : {&a.rgb, &a.depth, &a.gt}) cv::flip(*m, *m, 1);
  EXPECT_TRUE(mats_equal(a.rgb, raw_.rgb));
  EXPECT_TRUE(mats_equal(a.depth, raw_.depth));
  EXPECT_TRUE(mats_equal(a.gt, raw_.gt));
}

TEST_F(Augment, GeometryStaysAlignedAcrossModalities) {
  // The fixture object is nearer than the background, so after any shared
  // transform the foreground must still sit on high depth.
  AugmentConfig cfg;
  cfg.flip_prob = 0.5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RawSample a = copy(raw_);
    augment(a, seed, cfg);
    double fg_depth = 0, bg_depth = 0;
    int fg = 0, bg = 0;
    for (int y = 4; y < 60; ++y) {
      for (int x = 4; x < 60; ++x) {
        const float g = a.gt.at<float>(y, x);
        ASSERT_TRUE(g == 0 || g == 1);
        (g ? fg_depth : bg_depth) += a.depth.at<float>(y, x);
        ++(g ? fg : bg);
      }
    }
    ASSERT_GT(fg, 0);
    EXPECT_GT(fg_depth / fg, 0.7) << "seed " << seed;
    EXPECT_LT(bg_depth / bg, 0.35) << "seed " << seed;
  }
}

TEST_F(Augment, JitterLeavesDepthAndTruthAlone) {
  AugmentConfig cfg;
  cfg.flip_prob = 0;
  cfg.rotation_deg = 0;
  cfg.crop_min = 1;
  cfg.jitter = 0.1;
  RawSample a = copy(raw_);
  augment(a, 5, cfg);
  EXPECT_FALSE(mats_equal(a.rgb, raw_.rgb));
  EXPECT_TRUE(mats_equal(a.depth, raw_.depth));
  EXPECT_TRUE(mats_equal(a.gt, raw_.gt));
  double lo, hi;
  cv::minMaxLoc(a.rgb.reshape(1), &lo, &hi);
  EXPECT_GE(lo, 0);
  EXPECT_LE(hi, 1);
}

TEST(Ordering, SeedsAndPermutationsAreDeterministic) {
  EXPECT_EQ(sample_seed(1, 2, 3), sample_seed(1, 2, 3));
  EXPECT_NE(sample_seed(1, 2, 3), sample_seed(1, 2, 4));
  EXPECT_NE(sample_seed(1, 2, 3), sample_seed(1, 3, 3));
  const auto a = epoch_order(20, 7, 1, true);
  EXPECT_EQ(a, epoch_order(20, 7, 1, true));
  EXPECT_NE(a, epoch_order(20, 7, 2, true));
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<index_t> iota(20);
  std::iota(iota.begin(), iota.end(), 0);
  EXPECT_EQ(sorted, iota);
  EXPECT_EQ(epoch_order(20, 7, 1, false), iota);
}

TEST(Collate, StacksSamplesAlongBatch) {
  TempDir dir;
  write_scenes(dir / "toy", 2, 32, 32, 9);
  const auto records = build_manifest(dir.path().string(), "");
  std::vector<Sample> samples{preprocess(records[0], data_config(32)), preprocess(records[1], data_config(32))};
  const Batch b = collate(samples, {"a", "b"});
  EXPECT_EQ(b.rgb.shape(), (Shape{2, 3, 32, 32}));
  EXPECT_EQ(b.gt.shape(), (Shape{2, 1, 32, 32}));
  EXPECT_EQ(b.rgb[3 * 32 * 32 + 5], samples[1].rgb[5]);
  EXPECT_THROW(collate({}, {}), DataError);
  samples.push_back(preprocess(records[0], data_config(64)));
  EXPECT_THROW(collate(samples, {"a", "b", "c"}), ShapeError);
}

TEST(MapPng, WritesRoundedEightBitValues) {
  TempDir dir;
  const float v[4] = {0.0f, 0.5f, 1.0f, 0.2f};
  const std::string path = (dir / "m.png").string();
  write_map_png(path, v, 2, 2);
  const cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  ASSERT_EQ(m.type(), CV_8UC1);
  EXPECT_EQ(m.at<std::uint8_t>(0, 0), 0);
  EXPECT_EQ(m.at<std::uint8_t>(0, 1), 128);
  EXPECT_EQ(m.at<std::uint8_t>(1, 0), 255);
  EXPECT_EQ(m.at<std::uint8_t>(1, 1), 51);
  EXPECT_THROW(write_map_png((dir / "no/such/dir/m.png").string(), v, 2, 2), IoError);
}
