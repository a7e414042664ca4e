#ifndef ROINET_TENSOR_HPP
#define ROINET_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "roinet/errors.hpp"

namespace roinet {

using Shape = std::vector<int>;

inline long long shape_numel(const Shape& s) {
  long long n = 1;
  for (int e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

// Dense row-major N-dimensional array. The scalar type is a template
// parameter; the library instantiates double everywhere.
template <typename Scalar>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(Shape shape)
      : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<std::size_t>(shape_numel(shape_)), Scalar(0));
  }

  TensorT(Shape shape, std::vector<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (shape_numel(shape_) != static_cast<long long>(data_.size()))
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_str(shape_));
  }

  static TensorT zeros(Shape shape) { return TensorT(std::move(shape)); }

  static TensorT full(Shape shape, Scalar v) {
    TensorT t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  static TensorT scalar(Scalar v) { return TensorT({1}, {v}); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  long long numel() const { return static_cast<long long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::vector<Scalar>& raw() { return data_; }
  const std::vector<Scalar>& raw() const { return data_; }

  Scalar& operator[](long long i) { return data_[static_cast<std::size_t>(i)]; }
  const Scalar& operator[](long long i) const { return data_[static_cast<std::size_t>(i)]; }

  Scalar& operator()(int i, int j) {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  const Scalar& operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  Scalar& operator()(int c, int h, int w) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }
  const Scalar& operator()(int c, int h, int w) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }
  Scalar& operator()(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const Scalar& operator()(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool b) { requires_grad_ = b; }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (Scalar v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Same data, new shape; element count must agree.
  TensorT reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != numel())
      throw DimensionError("reshape " + shape_str(shape_) + " -> " + shape_str(new_shape));
    TensorT t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    t.requires_grad_ = requires_grad_;
    return t;
  }

 private:
  void validate_shape() const {
    for (int e : shape_)
      if (e < 0) throw DimensionError("negative extent in shape " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<Scalar> data_;
  bool requires_grad_ = false;
};

using Tensor = TensorT<double>;

inline Tensor make_tensor(Shape shape, std::initializer_list<double> values) {
  return Tensor(std::move(shape), std::vector<double>(values));
}

}  // namespace roinet

#endif  // ROINET_TENSOR_HPP
