#pragma once

#include <cstdint>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace hit {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
std::vector<int64_t> row_major_strides(const Shape& shape);

/// Dense n-dimensional array of scalars in row-major order.
/// Instantiated for double (the verification dtype) and float (benchmarks).
template <class S>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(Shape shape)
      : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), S(0)) {}

  TensorT(Shape shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<int64_t>(data_.size())) {
      throw std::invalid_argument("tensor: data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_str(shape_));
    }
  }

  static TensorT full(Shape shape, S value) {
    TensorT t(std::move(shape));
    for (auto& x : t.data_) x = value;
    return t;
  }

  static TensorT scalar(S value) { return TensorT(Shape{}, std::vector<S>{value}); }

  static TensorT arange(Shape shape) {
    TensorT t(std::move(shape));
    for (size_t i = 0; i < t.data_.size(); ++i) t.data_[i] = static_cast<S>(i);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t extent(int axis) const { return shape_.at(static_cast<size_t>(axis)); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  S& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  S operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (S x : data_) {
      if (!std::isfinite(static_cast<double>(x))) return false;
    }
    return true;
  }

  bool bit_equal(const TensorT& other) const {
    if (shape_ != other.shape_) return false;
    for (size_t i = 0; i < data_.size(); ++i) {
      // bitwise comparison; distinguishes -0.0 and matches NaN payloads
      if (std::memcmp(&data_[i], &other.data_[i], sizeof(S)) != 0) return false;
    }
    return true;
  }

  TensorT reshaped(Shape shape) const {
    if (shape_numel(shape) != size()) {
      throw std::invalid_argument("reshape: element count mismatch " + shape_str(shape_) +
                                  " -> " + shape_str(shape));
    }
    return TensorT(std::move(shape), data_);
  }

 private:
  Shape shape_;
  std::vector<S> data_;
};

using Tensor = TensorT<double>;
using Tensor32 = TensorT<float>;

// Elementwise helpers; all require exact shape match.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
double sum(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
double max_rel_diff(const Tensor& a, const Tensor& b);  // denominator max(|a|,|b|,1e-8)

}  // namespace hit
