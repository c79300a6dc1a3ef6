#pragma once

#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gldm/common.hpp"

namespace gldm {
inline namespace GLDM_ABI {

using Shape = std::vector<index_t>;

index_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array with value semantics. Image data uses NCHW.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real fill = real(0));
  Tensor(Shape shape, std::vector<real> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), real(1)); }
  static Tensor randn(Shape shape, std::mt19937_64& rng, real stddev = real(1));
  static Tensor uniform(Shape shape, std::mt19937_64& rng, real lo, real hi);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  /// Size of dimension `axis`; negative axes count from the back.
  index_t dim(int axis) const;
  index_t numel() const { return static_cast<index_t>(values_.size()); }
  bool empty() const { return values_.empty(); }

  real* data() { return values_.data(); }
  const real* data() const { return values_.data(); }
  std::span<real> values() { return values_; }
  std::span<const real> values() const { return values_; }

  real& operator[](index_t i) { return values_[static_cast<std::size_t>(i)]; }
  real operator[](index_t i) const { return values_[static_cast<std::size_t>(i)]; }

  real& at(index_t n, index_t c, index_t h, index_t w);
  real at(index_t n, index_t c, index_t h, index_t w) const;

  void fill(real v);
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  std::vector<real> values_;
};

bool all_finite(const Tensor& t);
real max_abs_diff(const Tensor& a, const Tensor& b);
/// Max over elements of |a-b| / max(|a|, |b|, floor).
real max_rel_diff(const Tensor& a, const Tensor& b, real floor = real(1e-12));
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace GLDM_ABI
}  // namespace gldm
