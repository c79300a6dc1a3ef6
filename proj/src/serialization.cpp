#include "gldm/serialization.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace {

constexpr char kArchiveMagic[8] = {'G', 'L', 'D', 'M', 'A', 'R', 'C', '1'};

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

void ByteWriter::raw(const void* data, std::size_t n) {
  buf_.append(static_cast<const char*>(data), n);
}

void ByteWriter::u32(std::uint32_t v) { raw(&v, sizeof v); }
void ByteWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void ByteWriter::i64(std::int64_t v) { raw(&v, sizeof v); }

void ByteWriter::str(const std::string& s) {
  u64(s.size());
  raw(s.data(), s.size());
}

void ByteWriter::tensors(const std::vector<NamedTensor>& list) {
  u64(list.size());
  u32(static_cast<std::uint32_t>(sizeof(real)));
  for (const auto& [name, t] : list) {
    str(name);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (index_t d : t.shape()) i64(d);
    raw(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(real));
  }
}

void ByteWriter::commit(const std::filesystem::path& path) const {
  const std::uint64_t sum = fnv1a64(buf_.data(), buf_.size());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    out.write(reinterpret_cast<const char*>(&sum), sizeof sum);
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ByteReader::ByteReader(const std::filesystem::path& path) : origin_(path.string()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + origin_);
  std::ostringstream ss;
  ss << in.rdbuf();
  buf_ = ss.str();
  if (buf_.size() < sizeof(std::uint64_t)) throw CheckpointError(origin_ + ": file too short");
  end_ = buf_.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, buf_.data() + end_, sizeof stored);
  if (stored != fnv1a64(buf_.data(), end_)) throw CheckpointError(origin_ + ": checksum mismatch");
}

void ByteReader::raw(void* out, std::size_t n) {
  if (n > end_ - pos_) throw CheckpointError(origin_ + ": truncated record");
  std::memcpy(out, buf_.data() + pos_, n);
  pos_ += n;
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  raw(&v, sizeof v);
  return v;
}

std::uint64_t ByteReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v);
  return v;
}

std::int64_t ByteReader::i64() {
  std::int64_t v;
  raw(&v, sizeof v);
  return v;
}

std::string ByteReader::str() {
  const std::uint64_t n = u64();
  if (n > end_ - pos_) throw CheckpointError(origin_ + ": truncated string");
  std::string s(buf_.data() + pos_, n);
  pos_ += n;
  return s;
}

std::vector<NamedTensor> ByteReader::tensors() {
  const std::uint64_t count = u64();
  const std::uint32_t width = u32();
  if (width != sizeof(float) && width != sizeof(double)) {
    throw CheckpointError(origin_ + ": unsupported scalar width " + std::to_string(width));
  }
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = str();
    const std::uint32_t rank = u32();
    if (rank > 8) throw CheckpointError(origin_ + ": bad rank for " + nt.name);
    Shape shape(rank);
    for (auto& d : shape) {
      d = i64();
      if (d < 0) throw CheckpointError(origin_ + ": bad dimension for " + nt.name);
    }
    Tensor t(shape);
    const auto n = static_cast<std::size_t>(t.numel());
    if (width == sizeof(real)) {
      raw(t.data(), n * sizeof(real));
    } else if (width == sizeof(float)) {
      std::vector<float> tmp(n);
      raw(tmp.data(), n * sizeof(float));
      for (std::size_t j = 0; j < n; ++j) t[static_cast<index_t>(j)] = static_cast<real>(tmp[j]);
    } else {
      std::vector<double> tmp(n);
      raw(tmp.data(), n * sizeof(double));
      for (std::size_t j = 0; j < n; ++j) t[static_cast<index_t>(j)] = static_cast<real>(tmp[j]);
    }
    nt.value = std::move(t);
    out.push_back(std::move(nt));
  }
  return out;
}

void write_archive(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  ByteWriter w;
  w.raw(kArchiveMagic, sizeof kArchiveMagic);
  w.tensors(tensors);
  w.commit(path);
}

std::vector<NamedTensor> read_archive(const std::filesystem::path& path) {
  ByteReader r(path);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kArchiveMagic, sizeof magic) != 0) {
    throw CheckpointError(path.string() + ": not a parameter archive");
  }
  auto out = r.tensors();
  if (!r.at_end()) throw CheckpointError(path.string() + ": trailing bytes");
  return out;
}

}  // namespace GLDM_ABI
}  // namespace gldm
