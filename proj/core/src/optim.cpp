#include "stcnn/optim.hpp"

#include <cmath>

namespace stcnn {

void Adam::step(ParameterStore& ps) {
  if (ps.frozen(group_)) return;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, e] : ps.entries()) {
    if (e.group != group_ || !e.trainable || e.var.grad().empty()) continue;
    Tensor& value = ps.buffer(name);
    const Tensor& grad = e.var.grad();
    auto& mo = state_[name];
    if (mo.m.empty()) {
      mo.m.assign(value.size(), 0.0);
      mo.v.assign(value.size(), 0.0);
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      mo.m[i] = beta1_ * mo.m[i] + (1.0 - beta1_) * g;
      mo.v[i] = beta2_ * mo.v[i] + (1.0 - beta2_) * g * g;
      value[i] -= lr_ * (mo.m[i] / c1) / (std::sqrt(mo.v[i] / c2) + eps_);
    }
  }
}

void Sgd::step(ParameterStore& ps) {
  if (ps.frozen(group_)) return;
  for (const auto& [name, e] : ps.entries()) {
    if (e.group != group_ || !e.trainable || e.var.grad().empty()) continue;
    Tensor& value = ps.buffer(name);
    const Tensor& grad = e.var.grad();
    auto& vel = velocity_[name];
    if (vel.empty()) vel.assign(value.size(), 0.0);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] + weight_decay_ * value[i];
      vel[i] = momentum_ * vel[i] + g;
      value[i] -= lr_ * vel[i];
    }
  }
}

}  // namespace stcnn
