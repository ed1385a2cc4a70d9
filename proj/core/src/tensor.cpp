#include "stcnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stcnn/errors.hpp"

namespace stcnn {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative tensor dimension " + shape.str());
  }
  data_.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape.numel()) {
    throw ShapeError("tensor data size does not match shape " + shape.str());
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_(const Tensor& other) {
  if (!(other.shape_ == shape_)) {
    throw ShapeError("add_: " + shape_.str() + " vs " + other.shape_.str());
  }
  const double* src = other.data();
  double* dst = data();
  for (std::size_t i = 0; i < data_.size(); ++i) dst[i] += src[i];
}

Tensor Tensor::reshaped(Shape s) const {
  if (s.numel() != data_.size()) {
    throw ShapeError("reshape " + shape_.str() + " -> " + s.str());
  }
  return Tensor(s, data_);
}

Tensor Tensor::sample(int i) const {
  if (i < 0 || i >= shape_.n) throw ArgumentError("sample index out of range");
  const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(per * i),
                          data_.begin() + static_cast<std::ptrdiff_t>(per * (i + 1)));
  return Tensor({1, shape_.c, shape_.h, shape_.w}, std::move(out));
}

double Tensor::sum() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor stack_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw ArgumentError("stack_batch: no tensors");
  Shape s = parts.front().shape();
  int n = 0;
  for (const auto& p : parts) {
    if (p.c() != s.c || p.h() != s.h || p.w() != s.w) {
      throw ShapeError("stack_batch: mismatched " + p.shape().str());
    }
    n += p.n();
  }
  std::vector<double> buf;
  buf.reserve(static_cast<std::size_t>(n) * s.c * s.plane());
  for (const auto& p : parts) {
    buf.insert(buf.end(), p.storage().begin(), p.storage().end());
  }
  return Tensor({n, s.c, s.h, s.w}, std::move(buf));
}

}  // namespace stcnn
