#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stcnn {

/// Dense NCHW shape. Every tensor in the library is four-dimensional;
/// vectors and scalars use trailing unit dimensions.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Owning row-major NCHW array of doubles with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int n, int c, int y, int x) {
    return data_[index(n, c, y, x)];
  }
  double at(int n, int c, int y, int x) const {
    return data_[index(n, c, y, x)];
  }
  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) *
               shape_.w +
           x;
  }

  /// Pointer to the start of plane (n, c).
  double* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
  const double* plane(int n, int c) const {
    return data_.data() + index(n, c, 0, 0);
  }

  void fill(double v);
  void add_(const Tensor& other);  // in-place elementwise accumulate
  Tensor reshaped(Shape s) const;

  /// Sample `i` of the batch as a tensor with n == 1.
  Tensor sample(int i) const;

  double sum() const;
  bool all_finite() const;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

/// Stacks n==1 tensors (or batches) along the batch axis.
Tensor stack_batch(std::span<const Tensor> parts);

}  // namespace stcnn
