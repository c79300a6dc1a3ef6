#include "gldm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {

index_t shape_numel(const Shape& shape) {
  index_t n = 1;
  for (index_t d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, real fill)
    : shape_(std::move(shape)), values_(static_cast<std::size_t>(shape_numel(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<real> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_numel(shape_) != static_cast<index_t>(values_.size())) {
    throw ShapeError("value count " + std::to_string(values_.size()) +
                     " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, real stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
  for (auto& v : t.values_) v = static_cast<real>(dist(rng));
  return t;
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, real lo, real hi) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.values_) v = static_cast<real>(dist(rng));
  return t;
}

index_t Tensor::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
  }
  return shape_[static_cast<std::size_t>(a)];
}

real& Tensor::at(index_t n, index_t c, index_t h, index_t w) {
  return values_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
}

real Tensor::at(index_t n, index_t c, index_t h, index_t w) const {
  return values_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
}

void Tensor::fill(real v) { std::fill(values_.begin(), values_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (shape_numel(shape) != numel()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](real v) { return std::isfinite(v); });
}

real max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  real m = 0;
  for (index_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

real max_rel_diff(const Tensor& a, const Tensor& b, real floor) {
  if (!a.same_shape(b)) throw ShapeError("max_rel_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  real m = 0;
  for (index_t i = 0; i < a.numel(); ++i) {
    const real scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    m = std::max(m, std::abs(a[i] - b[i]) / scale);
  }
  return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.numel()) * sizeof(real)) == 0;
}

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Shape: return "ShapeError";
    case ErrorKind::Parameter: return "ParameterError";
    case ErrorKind::Data: return "DataError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Checkpoint: return "CheckpointError";
    case ErrorKind::Numeric: return "NumericError";
  }
  return "Error";
}

}  // namespace GLDM_ABI
}  // namespace gldm
