#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "stcnn/tensor.hpp"

namespace stcnn::ag {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  /// Gradient buffer, zero-initialised on first use.
  Tensor& grad_buffer();
};

/// Handle to a node of the dynamic computation graph.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad_buffer() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  void zero_grad() { node_->grad = Tensor(); }

  /// Reverse-mode sweep from this (single-element) node.
  void backward() const;

  /// Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph construction while alive (inference, frozen branches).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

inline Var constant(Tensor t) { return Var(std::move(t), false); }

/// Builds an op result; attaches `fn` only when some parent needs gradients.
Var make_result(Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> fn);

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a * x + b elementwise.
Var affine(const Var& x, double a, double b);
Var relu(const Var& x);
Var clamp(const Var& x, double lo, double hi);
Var neg_log(const Var& x);

/// x: (N,C,H,W), m: (N,1,H,W); broadcasts m over channels.
Var mul_channel_broadcast(const Var& x, const Var& m);

Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(const Var& x, int begin, int count);

// Reductions to a (1,1,1,1) scalar.
Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var mse(const Var& a, const Var& b);

/// Per-sample values of a (N,1,1,1) tensor averaged over the batch.
Var batch_mean(const Var& x);

struct ConvOptions {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

/// w: (Cout, Cin, k, k). `bias` may be undefined.
Var conv2d(const Var& x, const Var& w, const Var& bias, ConvOptions opt);

/// w: (Cin, Cout, k, k); output size (H-1)*stride - 2*pad + k + output_pad.
Var conv_transpose2d(const Var& x, const Var& w, const Var& bias, int stride,
                     int pad, int output_pad);

struct BatchNormState {
  Tensor* running_mean = nullptr;  // (1,C,1,1)
  Tensor* running_var = nullptr;
  bool use_batch_stats = true;
  bool update_running = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               const BatchNormState& state);

/// Bilinear resampling with half-pixel centres (edge-clamped).
Var resize_bilinear(const Var& x, int out_h, int out_w);

/// Average pooling into a bins×bins grid with floor/ceil cell bounds.
Var adaptive_avg_pool(const Var& x, int bins);

/// logits (N,2,H,W) -> foreground softmax probability (N,1,H,W).
Var fg_probability(const Var& logits);

/// -sum[t*log(p) + (1-t)*log(1-p)] with p clamped to [eps, 1-eps];
/// `target` must share p's shape and hold values in {0,1}.
Var bce_sum(const Var& p, const Tensor& target, double eps);

}  // namespace stcnn::ag
