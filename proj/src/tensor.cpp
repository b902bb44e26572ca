#include "mtl/tensor.hpp"

#include <numeric>
#include <sstream>

namespace mtl {

namespace {

Index element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw ShapeError("tensor rank must be 1 or 2, got shape " + shape_string(shape));
  }
  for (Index d : shape) {
    if (d < 1) throw ShapeError("tensor dimensions must be >= 1, got " + shape_string(shape));
  }
}

Index rows_of(const Shape& shape) { return shape.size() == 1 ? 1 : shape[0]; }
Index cols_of(const Shape& shape) { return shape.size() == 1 ? shape[0] : shape[1]; }

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

ShapeError::ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs)
    : std::invalid_argument(op + ": shape mismatch between " + shape_string(lhs) + " and " +
                            shape_string(rhs)) {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_ = Matrix::Zero(rows_of(shape_), cols_of(shape_));
}

Tensor::Tensor(Shape shape, std::span<const double> values) : Tensor(std::move(shape)) {
  if (static_cast<Index>(values.size()) != data_.size()) {
    throw ShapeError("tensor of shape " + shape_string(shape_) + " needs " +
                     std::to_string(data_.size()) + " values, got " + std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), data_.data());
}

Tensor::Tensor(Matrix m) : shape_{m.rows(), m.cols()}, data_(std::move(m)) { check_shape(shape_); }

Tensor Tensor::scalar(double v) {
  Tensor t(Shape{1});
  t.data_(0, 0) = v;
  return t;
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{static_cast<Index>(values.size())}, std::span<const double>(values.begin(), values.size()));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() needs a single-element tensor, got " + shape_string(shape_));
  return data_(0, 0);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size()) throw ShapeError("reshape", shape_, shape);
  return Tensor(std::move(shape), data());
}

bool same_shape(const Tensor& a, const Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

}  // namespace mtl
