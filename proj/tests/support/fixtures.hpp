#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gldm/config.hpp"

namespace gldm::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "gldm");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Writes `count` synthetic scenes to `<dir>/{RGB,depth,GT}`: an ellipse of
/// solid colour in front of a textured background, nearer in depth.
/// Stems are `<prefix>NNN`.
void write_scenes(const std::filesystem::path& dir, int count, int height, int width,
                  std::uint64_t seed, const std::string& prefix = "img");

/// Small network and schedule that keep training tests fast.
RunConfig toy_config(const std::string& data_root = "", int image_size = 64);

std::string read_file(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace gldm::testing
