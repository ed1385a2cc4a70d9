#pragma once

#include <map>
#include <string>
#include <vector>

#include "stcnn/params.hpp"

namespace stcnn {

/// Adaptive-moment optimiser over the trainable arrays of one group.
class Adam {
 public:
  Adam(Group group, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : group_(group), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Applies accumulated gradients. A frozen group is left untouched.
  void step(ParameterStore& ps);
  double lr() const { return lr_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  Group group_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Moments> state_;
};

/// Stochastic gradient descent with heavy-ball momentum.
class Sgd {
 public:
  Sgd(Group group, double lr, double momentum = 0.9, double weight_decay = 0.0)
      : group_(group), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

  void step(ParameterStore& ps);
  double lr() const { return lr_; }

 private:
  Group group_;
  double lr_, momentum_, weight_decay_;
  std::map<std::string, std::vector<double>> velocity_;
};

}  // namespace stcnn
