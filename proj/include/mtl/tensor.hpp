#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mtl {

using Index = Eigen::Index;

// Row-major storage so that a flattened tensor reads in the same order as its
// logical layout.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Shape = std::vector<Index>;

std::string shape_string(const Shape& shape);

/// Raised whenever operand shapes are not conformable. The message names both
/// shapes involved.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs);
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Dense tensor of rank 1 or 2 over 64-bit floats.
///
/// Rank-1 tensors of length n behave as 1 x n row vectors in matrix
/// operations. Scalars are rank-1 tensors of shape [1].
class Tensor {
 public:
  Tensor() : shape_{1}, data_(Matrix::Zero(1, 1)) {}
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::span<const double> values);
  explicit Tensor(Matrix m);

  static Tensor scalar(double v);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  Index size() const { return data_.size(); }
  Index rows() const { return data_.rows(); }
  Index cols() const { return data_.cols(); }
  bool is_scalar() const { return data_.size() == 1; }

  const Matrix& matrix() const { return data_; }
  Matrix& matrix() { return data_; }

  std::span<const double> data() const { return {data_.data(), static_cast<std::size_t>(data_.size())}; }

  /// Value of a single-element tensor; throws otherwise.
  double item() const;
  double operator[](Index i) const { return data_.data()[i]; }

  /// Same element count, new shape.
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  Matrix data_;
};

bool same_shape(const Tensor& a, const Tensor& b);

}  // namespace mtl
