#include "fixtures.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

namespace gldm::testing {
namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  std::string pattern = (fs::temp_directory_path() / (tag + "-XXXXXX")).string();
  if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_scenes(const fs::path& dir, int count, int height, int width, std::uint64_t seed,
                  const std::string& prefix) {
  for (const char* sub : {"RGB", "depth", "GT"}) fs::create_directories(dir / sub);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  for (int n = 0; n < count; ++n) {
    const double cx = width * (0.3 + 0.4 * u(rng)), cy = height * (0.3 + 0.4 * u(rng));
    const double rx = width * (0.12 + 0.14 * u(rng)), ry = height * (0.12 + 0.14 * u(rng));
    const double col[3] = {u(rng), u(rng), u(rng)};
    cv::Mat rgb(height, width, CV_8UC3), depth(height, width, CV_8UC1), gt(height, width, CV_8UC1);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const bool fg = std::pow((x - cx) / rx, 2) + std::pow((y - cy) / ry, 2) <= 1;
        gt.at<std::uint8_t>(y, x) = fg ? 255 : 0;
        auto& px = rgb.at<cv::Vec3b>(y, x);
        for (int c = 0; c < 3; ++c) {
          const double v = fg ? col[c] : 0.5 + 0.3 * std::sin(0.3 * x + c) * std::cos(0.2 * y);
          px[2 - c] = cv::saturate_cast<std::uint8_t>(255 * v);  // stored BGR
        }
        const double d = (fg ? 0.8 : 0.3) + 0.05 * u(rng);
        depth.at<std::uint8_t>(y, x) = cv::saturate_cast<std::uint8_t>(255 * d);
      }
    }
    char stem[64];
    std::snprintf(stem, sizeof stem, "%s%03d", prefix.c_str(), n);
    cv::imwrite((dir / "RGB" / (std::string(stem) + ".png")).string(), rgb);
    cv::imwrite((dir / "depth" / (std::string(stem) + ".png")).string(), depth);
    cv::imwrite((dir / "GT" / (std::string(stem) + ".png")).string(), gt);
  }
}

RunConfig toy_config(const std::string& data_root, int image_size) {
  RunConfig cfg;
  cfg.set("model.encoder", "resnet18");
  cfg.set("fusion.widths", "16,32,64,128");
  cfg.set("fusion.fc_reduction", "4");
  cfg.set("decoder.depths", "1,1,1,1");
  cfg.set("decoder.heads", "1,2,4,8");
  cfg.set("decoder.mlp_ratios", "2,2,2,2");
  cfg.set("decoder.ca_reduction", "4");
  cfg.set("data.root", data_root);
  cfg.set("data.image_size", std::to_string(image_size));
  cfg.set("train.epochs", "2");
  cfg.set("train.batch_size", "2");
  cfg.set("train.seed", "5");
  return cfg;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace gldm::testing
