#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "stcnn/autograd.hpp"
#include "stcnn/data_model.hpp"
#include "stcnn/params.hpp"
#include "stcnn/rng.hpp"

namespace testing {

using namespace stcnn;

inline Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline Frame random_frame(int h, int w, Rng& rng) {
  return Frame(random_tensor({1, 3, h, w}, rng));
}

/// Rows of '0' / '1' characters.
inline Mask mask_from_rows(const std::vector<std::string>& rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.front().size());
  std::vector<std::uint8_t> labels;
  for (const auto& r : rows) {
    for (char c : r) labels.push_back(c == '1' ? 1 : 0);
  }
  return Mask(h, w, std::move(labels));
}

inline Mask rect_mask(int h, int w, int y0, int x0, int y1, int x1) {
  std::vector<std::uint8_t> labels(std::size_t(h) * w, 0);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) labels[std::size_t(y) * w + x] = 1;
  }
  return Mask(h, w, std::move(labels));
}

inline Mask random_mask(int h, int w, Rng& rng, double p = 0.5) {
  std::vector<std::uint8_t> labels(std::size_t(h) * w);
  for (auto& v : labels) v = rng.bernoulli(p) ? 1 : 0;
  return Mask(h, w, std::move(labels));
}

inline double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// ||analytic - numeric|| / max(||analytic||, ||numeric||).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - n[i];
  const double scale = std::max({norm(a), norm(n), 1e-12});
  return norm(d) / scale;
}

/// Central-difference check of d f(x) / dx for a scalar-valued f.
inline double input_gradient_error(const std::function<ag::Var(const ag::Var&)>& f,
                                   const Tensor& x0, double h = 1e-6) {
  ag::Var x(x0, true);
  f(x).backward();
  const std::vector<double> analytic = x.grad().storage();
  std::vector<double> numeric(x0.size());
  ag::NoGradGuard guard;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    Tensor p = x0, m = x0;
    p[i] += h;
    m[i] -= h;
    numeric[i] = (f(ag::constant(p)).value()[0] - f(ag::constant(m)).value()[0]) / (2 * h);
  }
  return relative_error(analytic, numeric);
}

/// Same check for a few entries of a stored parameter array.
inline double parameter_gradient_error(ParameterStore& ps, const std::string& name,
                                       const std::vector<std::size_t>& indices,
                                       const std::function<ag::Var()>& loss, double h = 1e-6) {
  ps.zero_grad();
  loss().backward();
  const Tensor grad = ps.var(name).grad();
  std::vector<double> analytic, numeric;
  ag::NoGradGuard guard;
  Tensor& w = ps.buffer(name);
  for (std::size_t i : indices) {
    analytic.push_back(grad[i]);
    const double keep = w[i];
    w[i] = keep + h;
    const double up = loss().value()[0];
    w[i] = keep - h;
    const double down = loss().value()[0];
    w[i] = keep;
    numeric.push_back((up - down) / (2 * h));
  }
  ps.zero_grad();
  return relative_error(analytic, numeric);
}

}  // namespace testing
