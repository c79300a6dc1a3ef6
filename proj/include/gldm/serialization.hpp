#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gldm/tensor.hpp"

namespace gldm {
inline namespace GLDM_ABI {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Named-parameter archive: magic `GLDMARC1`, then a tensor list and a
/// trailing FNV-1a checksum. Values are stored at the writer's precision and
/// converted on read.
void write_archive(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_archive(const std::filesystem::path& path);

/// Byte-level encoding shared by archives and checkpoints.
class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void str(const std::string& s);
  void tensors(const std::vector<NamedTensor>& list);
  void raw(const void* data, std::size_t n);
  const std::string& bytes() const { return buf_; }
  /// Appends the checksum and writes atomically (temp file + rename).
  void commit(const std::filesystem::path& path) const;

 private:
  std::string buf_;
};

class ByteReader {
 public:
  /// Reads the file and verifies the trailing checksum.
  explicit ByteReader(const std::filesystem::path& path);
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  std::string str();
  std::vector<NamedTensor> tensors();
  void raw(void* out, std::size_t n);
  bool at_end() const { return pos_ == end_; }

 private:
  std::string buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
  std::string origin_;
};

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace GLDM_ABI
}  // namespace gldm
