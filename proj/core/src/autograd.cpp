#include "stcnn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "stcnn/errors.hpp"

namespace stcnn::ag {

namespace {
thread_local bool g_grad_enabled = true;

void require_same(const Var& a, const Var& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}
}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty() && value.size() != 0) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

void Var::backward() const {
  if (node_->value.size() != 1) {
    throw ShapeError("backward() requires a single-element root");
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var make_result(Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(fn);
  }
  return Var(std::move(node));
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  out.add_(b.value());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->grad_buffer().add_(self.grad);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  const double* pb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= pb[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) {
      self.parents[0]->grad_buffer().add_(self.grad);
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  const double* pb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      Tensor& g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      Tensor& g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return make_result(std::move(out), {a}, [s](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Var affine(const Var& x, double a, double b) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * out[i] + b;
  return make_result(std::move(out), {x}, [a](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += a * self.grad[i];
  });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], 0.0);
  return make_result(std::move(out), {x}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const Tensor& xv = self.parents[0]->value;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Var clamp(const Var& x, double lo, double hi) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], lo, hi);
  return make_result(std::move(out), {x}, [lo, hi](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const Tensor& xv = self.parents[0]->value;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > lo && xv[i] < hi) g[i] += self.grad[i];
    }
  });
}

Var neg_log(const Var& x) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0)) throw ArgumentError("neg_log of non-positive value");
    out[i] = -std::log(out[i]);
  }
  return make_result(std::move(out), {x}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const Tensor& xv = self.parents[0]->value;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] / xv[i];
  });
}

Var mul_channel_broadcast(const Var& x, const Var& m) {
  const Shape xs = x.shape();
  const Shape ms = m.shape();
  if (ms.n != xs.n || ms.c != 1 || ms.h != xs.h || ms.w != xs.w) {
    throw ShapeError("mul_channel_broadcast: " + xs.str() + " vs " + ms.str());
  }
  Tensor out = x.value();
  const std::size_t hw = xs.plane();
  for (int n = 0; n < xs.n; ++n) {
    const double* mp = m.value().plane(n, 0);
    for (int c = 0; c < xs.c; ++c) {
      double* op = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) op[i] *= mp[i];
    }
  }
  return make_result(std::move(out), {x, m}, [xs, hw](Node& self) {
    auto& px = self.parents[0];
    auto& pm = self.parents[1];
    for (int n = 0; n < xs.n; ++n) {
      const double* mp = pm->value.plane(n, 0);
      for (int c = 0; c < xs.c; ++c) {
        const double* gp = self.grad.plane(n, c);
        if (px->requires_grad) {
          double* dx = px->grad_buffer().plane(n, c);
          for (std::size_t i = 0; i < hw; ++i) dx[i] += gp[i] * mp[i];
        }
        if (pm->requires_grad) {
          const double* xp = px->value.plane(n, c);
          double* dm = pm->grad_buffer().plane(n, 0);
          for (std::size_t i = 0; i < hw; ++i) dm[i] += gp[i] * xp[i];
        }
      }
    }
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat_channels: no inputs");
  const Shape s0 = parts.front().shape();
  int channels = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w) {
      throw ShapeError("concat_channels: " + s0.str() + " vs " + s.str());
    }
    channels += s.c;
  }
  Tensor out({s0.n, channels, s0.h, s0.w});
  const std::size_t hw = s0.plane();
  for (int n = 0; n < s0.n; ++n) {
    int offset = 0;
    for (const auto& p : parts) {
      const int c = p.shape().c;
      std::copy_n(p.value().plane(n, 0), c * hw, out.plane(n, offset));
      offset += c;
    }
  }
  return make_result(std::move(out), parts, [hw](Node& self) {
    const int batch = self.value.n();
    int offset = 0;
    for (auto& p : self.parents) {
      const int c = p->value.c();
      if (p->requires_grad) {
        Tensor& g = p->grad_buffer();
        for (int n = 0; n < batch; ++n) {
          const double* src = self.grad.plane(n, offset);
          double* dst = g.plane(n, 0);
          for (std::size_t i = 0; i < c * hw; ++i) dst[i] += src[i];
        }
      }
      offset += c;
    }
  });
}

Var slice_channels(const Var& x, int begin, int count) {
  const Shape s = x.shape();
  if (begin < 0 || count <= 0 || begin + count > s.c) {
    throw ShapeError("slice_channels out of range");
  }
  Tensor out({s.n, count, s.h, s.w});
  const std::size_t hw = s.plane();
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(x.value().plane(n, begin), count * hw, out.plane(n, 0));
  }
  return make_result(std::move(out), {x}, [begin, count, hw](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (int n = 0; n < self.value.n(); ++n) {
      const double* src = self.grad.plane(n, 0);
      double* dst = g.plane(n, begin);
      for (std::size_t i = 0; i < count * hw; ++i) dst[i] += src[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum_all(const Var& x) {
  return make_result(Tensor::scalar(x.value().sum()), {x}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double s = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s;
  });
}

Var mean_all(const Var& x) {
  const double count = static_cast<double>(x.value().size());
  return make_result(Tensor::scalar(x.value().sum() / count), {x},
                     [count](Node& self) {
                       Tensor& g = self.parents[0]->grad_buffer();
                       const double s = self.grad[0] / count;
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += s;
                     });
}

Var mse(const Var& a, const Var& b) {
  require_same(a, b, "mse");
  const std::size_t count = a.value().size();
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = a.value()[i] - b.value()[i];
    acc += d * d;
  }
  return make_result(
      Tensor::scalar(acc / static_cast<double>(count)), {a, b},
      [count](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        const double k = 2.0 * self.grad[0] / static_cast<double>(count);
        for (std::size_t i = 0; i < count; ++i) {
          const double d = k * (pa->value[i] - pb->value[i]);
          if (pa->requires_grad) pa->grad_buffer()[i] += d;
          if (pb->requires_grad) pb->grad_buffer()[i] -= d;
        }
      });
}

Var batch_mean(const Var& x) {
  if (x.shape().c != 1 || x.shape().h != 1 || x.shape().w != 1) {
    throw ShapeError("batch_mean expects (N,1,1,1), got " + x.shape().str());
  }
  return mean_all(x);
}

// ---------------------------------------------------------------------------
// Resampling and pooling

namespace {

struct AxisWeights {
  std::vector<int> i0, i1;
  std::vector<double> frac;
};

AxisWeights bilinear_axis(int in, int out) {
  AxisWeights a;
  a.i0.resize(out);
  a.i1.resize(out);
  a.frac.resize(out);
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    a.i0[o] = lo;
    a.i1[o] = std::min(lo + 1, in - 1);
    a.frac[o] = src - lo;
  }
  return a;
}

}  // namespace

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  const Shape s = x.shape();
  if (out_h <= 0 || out_w <= 0) throw ArgumentError("resize to empty size");
  if (s.h == out_h && s.w == out_w) {
    return make_result(x.value(), {x}, [](Node& self) {
      self.parents[0]->grad_buffer().add_(self.grad);
    });
  }
  const AxisWeights ay = bilinear_axis(s.h, out_h);
  const AxisWeights ax = bilinear_axis(s.w, out_w);
  Tensor out({s.n, s.c, out_h, out_w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = x.value().plane(n, c);
      double* dst = out.plane(n, c);
      for (int y = 0; y < out_h; ++y) {
        const double fy = ay.frac[y];
        const double* r0 = src + static_cast<std::size_t>(ay.i0[y]) * s.w;
        const double* r1 = src + static_cast<std::size_t>(ay.i1[y]) * s.w;
        for (int xo = 0; xo < out_w; ++xo) {
          const double fx = ax.frac[xo];
          const int x0 = ax.i0[xo], x1 = ax.i1[xo];
          const double top = r0[x0] + fx * (r0[x1] - r0[x0]);
          const double bot = r1[x0] + fx * (r1[x1] - r1[x0]);
          dst[static_cast<std::size_t>(y) * out_w + xo] = top + fy * (bot - top);
        }
      }
    }
  }
  return make_result(std::move(out), {x}, [s, ay, ax, out_h, out_w](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const double* go = self.grad.plane(n, c);
        double* gi = g.plane(n, c);
        for (int y = 0; y < out_h; ++y) {
          const double fy = ay.frac[y];
          double* r0 = gi + static_cast<std::size_t>(ay.i0[y]) * s.w;
          double* r1 = gi + static_cast<std::size_t>(ay.i1[y]) * s.w;
          for (int xo = 0; xo < out_w; ++xo) {
            const double fx = ax.frac[xo];
            const double v = go[static_cast<std::size_t>(y) * out_w + xo];
            const int x0 = ax.i0[xo], x1 = ax.i1[xo];
            r0[x0] += v * (1 - fy) * (1 - fx);
            r0[x1] += v * (1 - fy) * fx;
            r1[x0] += v * fy * (1 - fx);
            r1[x1] += v * fy * fx;
          }
        }
      }
    }
  });
}

Var adaptive_avg_pool(const Var& x, int bins) {
  const Shape s = x.shape();
  if (bins <= 0) throw ArgumentError("adaptive_avg_pool: bins must be positive");
  if (s.h < bins || s.w < bins) {
    throw ShapeError("adaptive_avg_pool: " + std::to_string(bins) +
                     " bins exceed spatial size " + s.str());
  }
  auto bounds = [](int len, int bins_) {
    std::vector<std::pair<int, int>> b(bins_);
    for (int i = 0; i < bins_; ++i) {
      b[i].first = (i * len) / bins_;
      b[i].second = ((i + 1) * len + bins_ - 1) / bins_;
    }
    return b;
  };
  const auto by = bounds(s.h, bins);
  const auto bx = bounds(s.w, bins);
  Tensor out({s.n, s.c, bins, bins});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = x.value().plane(n, c);
      for (int i = 0; i < bins; ++i) {
        for (int j = 0; j < bins; ++j) {
          double acc = 0.0;
          for (int y = by[i].first; y < by[i].second; ++y) {
            for (int xx = bx[j].first; xx < bx[j].second; ++xx) {
              acc += src[static_cast<std::size_t>(y) * s.w + xx];
            }
          }
          const int cnt = (by[i].second - by[i].first) * (bx[j].second - bx[j].first);
          out.at(n, c, i, j) = acc / cnt;
        }
      }
    }
  }
  return make_result(std::move(out), {x}, [s, by, bx, bins](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        double* gi = g.plane(n, c);
        for (int i = 0; i < bins; ++i) {
          for (int j = 0; j < bins; ++j) {
            const int cnt = (by[i].second - by[i].first) * (bx[j].second - bx[j].first);
            const double v = self.grad.at(n, c, i, j) / cnt;
            for (int y = by[i].first; y < by[i].second; ++y) {
              for (int xx = bx[j].first; xx < bx[j].second; ++xx) {
                gi[static_cast<std::size_t>(y) * s.w + xx] += v;
              }
            }
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Normalisation

Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               const BatchNormState& st) {
  const Shape s = x.shape();
  if (gamma.shape().c != s.c || beta.shape().c != s.c) {
    throw ShapeError("batch_norm: channel mismatch " + s.str());
  }
  const std::size_t hw = s.plane();
  const double count = static_cast<double>(s.n) * hw;
  std::vector<double> mean(s.c), invstd(s.c);
  if (st.use_batch_stats) {
    for (int c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.value().plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) acc += p[i];
      }
      const double mu = acc / count;
      double var = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.value().plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) var += (p[i] - mu) * (p[i] - mu);
      }
      var /= count;
      mean[c] = mu;
      invstd[c] = 1.0 / std::sqrt(var + st.eps);
      if (st.update_running && grad_enabled()) {
        const double unbiased = count > 1 ? var * count / (count - 1) : var;
        (*st.running_mean)[c] = (1 - st.momentum) * (*st.running_mean)[c] + st.momentum * mu;
        (*st.running_var)[c] = (1 - st.momentum) * (*st.running_var)[c] + st.momentum * unbiased;
      }
    }
  } else {
    for (int c = 0; c < s.c; ++c) {
      mean[c] = (*st.running_mean)[c];
      invstd[c] = 1.0 / std::sqrt((*st.running_var)[c] + st.eps);
    }
  }
  Tensor xhat(s);
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* p = x.value().plane(n, c);
      double* h = xhat.plane(n, c);
      double* o = out.plane(n, c);
      const double gm = gamma.value()[c], bt = beta.value()[c];
      for (std::size_t i = 0; i < hw; ++i) {
        h[i] = (p[i] - mean[c]) * invstd[c];
        o[i] = gm * h[i] + bt;
      }
    }
  }
  const bool batch_stats = st.use_batch_stats;
  return make_result(
      std::move(out), {x, gamma, beta},
      [s, hw, count, invstd, batch_stats, xhat = std::move(xhat)](Node& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        for (int c = 0; c < s.c; ++c) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (int n = 0; n < s.n; ++n) {
            const double* dy = self.grad.plane(n, c);
            const double* h = xhat.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) {
              sum_dy += dy[i];
              sum_dy_xhat += dy[i] * h[i];
            }
          }
          if (pg->requires_grad) pg->grad_buffer()[c] += sum_dy_xhat;
          if (pb->requires_grad) pb->grad_buffer()[c] += sum_dy;
          if (!px->requires_grad) continue;
          const double gm = pg->value[c];
          for (int n = 0; n < s.n; ++n) {
            const double* dy = self.grad.plane(n, c);
            const double* h = xhat.plane(n, c);
            double* dx = px->grad_buffer().plane(n, c);
            if (batch_stats) {
              const double k = gm * invstd[c] / count;
              for (std::size_t i = 0; i < hw; ++i) {
                dx[i] += k * (count * dy[i] - sum_dy - h[i] * sum_dy_xhat);
              }
            } else {
              const double k = gm * invstd[c];
              for (std::size_t i = 0; i < hw; ++i) dx[i] += k * dy[i];
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Segmentation heads

Var fg_probability(const Var& logits) {
  const Shape s = logits.shape();
  if (s.c != 2) throw ShapeError("fg_probability expects 2 channels, got " + s.str());
  Tensor out({s.n, 1, s.h, s.w});
  const std::size_t hw = s.plane();
  for (int n = 0; n < s.n; ++n) {
    const double* l0 = logits.value().plane(n, 0);
    const double* l1 = logits.value().plane(n, 1);
    double* o = out.plane(n, 0);
    for (std::size_t i = 0; i < hw; ++i) {
      const double d = l1[i] - l0[i];
      // Two-class softmax written in the overflow-safe sigmoid form.
      o[i] = d >= 0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
    }
  }
  return make_result(std::move(out), {logits}, [hw](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (int n = 0; n < self.value.n(); ++n) {
      const double* p = self.value.plane(n, 0);
      const double* go = self.grad.plane(n, 0);
      double* g0 = g.plane(n, 0);
      double* g1 = g.plane(n, 1);
      for (std::size_t i = 0; i < hw; ++i) {
        const double d = go[i] * p[i] * (1.0 - p[i]);
        g1[i] += d;
        g0[i] -= d;
      }
    }
  });
}

Var bce_sum(const Var& p, const Tensor& target, double eps) {
  if (!(p.shape() == target.shape())) {
    throw ShapeError("bce_sum: " + p.shape().str() + " vs " + target.shape().str());
  }
  double acc = 0.0;
  const std::size_t count = target.size();
  for (std::size_t i = 0; i < count; ++i) {
    const double q = std::clamp(p.value()[i], eps, 1.0 - eps);
    acc -= target[i] > 0.5 ? std::log(q) : std::log(1.0 - q);
  }
  return make_result(Tensor::scalar(acc), {p}, [target, eps](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const Tensor& pv = self.parents[0]->value;
    const double s = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double q = pv[i];
      if (q <= eps || q >= 1.0 - eps) continue;
      g[i] += target[i] > 0.5 ? -s / q : s / (1.0 - q);
    }
  });
}

}  // namespace stcnn::ag
