#pragma once

#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tsvmorph/error.hpp"

namespace tsvmorph {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), Index{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major tensor. Batched feature maps are [N, C, H, W]; dense
/// activations are [N, F].
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), data_(Array::Constant(shape_size(shape_), fill)) {}
  Tensor(Shape shape, Array data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw Error(Errc::ShapeMismatch, "data length does not match shape " + to_string(shape_));
  }

  const Shape& shape() const { return shape_; }
  Index dim(std::size_t i) const { return shape_[i]; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Row-major matrix view of the same storage: leading dim x the rest.
  MatrixMap matrix() { return MatrixMap(data(), shape_.empty() ? 0 : shape_[0], inner()); }
  ConstMatrixMap matrix() const {
    return ConstMatrixMap(data(), shape_.empty() ? 0 : shape_[0], inner());
  }
  MatrixMap matrix(Index rows, Index cols) { return MatrixMap(data(), rows, cols); }
  ConstMatrixMap matrix(Index rows, Index cols) const { return ConstMatrixMap(data(), rows, cols); }

  Tensor reshaped(Shape s) const& {
    if (shape_size(s) != size()) throw Error(Errc::ShapeMismatch, "cannot reshape " + to_string(shape_) + " to " + to_string(s));
    return Tensor(std::move(s), data_);
  }
  Tensor reshaped(Shape s) && {
    if (shape_size(s) != size()) throw Error(Errc::ShapeMismatch, "cannot reshape " + to_string(shape_) + " to " + to_string(s));
    return Tensor(std::move(s), std::move(data_));
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>().eval());
  }

  bool all_finite() const { return data_.allFinite(); }

 private:
  Index inner() const { return shape_.empty() || shape_[0] == 0 ? 0 : size() / shape_[0]; }

  Shape shape_;
  Array data_;
};

}  // namespace tsvmorph
