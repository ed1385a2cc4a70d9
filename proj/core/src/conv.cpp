// Convolution and transposed convolution via im2col + GEMM.

#include <Eigen/Core>
#include <algorithm>

#include "stcnn/autograd.hpp"
#include "stcnn/errors.hpp"

namespace stcnn::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct Geometry {
  int channels, in_h, in_w, k, stride, pad, dilation, out_h, out_w;

  int rows() const { return channels * k * k; }
  int cols() const { return out_h * out_w; }
  bool trivial() const { return k == 1 && stride == 1 && pad == 0; }
};

Geometry make_geometry(int c, int h, int w, int k, ConvOptions o) {
  Geometry g{c, h, w, k, o.stride, o.pad, o.dilation, 0, 0};
  g.out_h = (h + 2 * o.pad - o.dilation * (k - 1) - 1) / o.stride + 1;
  g.out_w = (w + 2 * o.pad - o.dilation * (k - 1) - 1) / o.stride + 1;
  return g;
}

void im2col(const double* src, const Geometry& g, double* col) {
  const int P = g.cols();
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        double* row = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * P;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dilation;
          double* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill_n(dst, g.out_w, 0.0);
            continue;
          }
          const double* line = src + (static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dilation;
            dst[ox] = (ix >= 0 && ix < g.in_w) ? line[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, const Geometry& g, double* dst) {
  const int P = g.cols();
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const double* row = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * P;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dilation;
          if (iy < 0 || iy >= g.in_h) continue;
          double* line = dst + (static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w;
          const double* s = row + static_cast<std::size_t>(oy) * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dilation;
            if (ix >= 0 && ix < g.in_w) line[ix] += s[ox];
          }
        }
      }
    }
  }
}

void add_bias(Tensor& out, const Var& bias) {
  if (!bias.defined()) return;
  const std::size_t hw = out.shape().plane();
  for (int n = 0; n < out.n(); ++n) {
    for (int c = 0; c < out.c(); ++c) {
      double* p = out.plane(n, c);
      const double b = bias.value()[c];
      for (std::size_t i = 0; i < hw; ++i) p[i] += b;
    }
  }
}

void bias_backward(const Node& self, Node& bias) {
  Tensor& gb = bias.grad_buffer();
  const std::size_t hw = self.value.shape().plane();
  for (int n = 0; n < self.value.n(); ++n) {
    for (int c = 0; c < self.value.c(); ++c) {
      const double* p = self.grad.plane(n, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += p[i];
      gb[c] += acc;
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& bias, ConvOptions opt) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  if (ws.c != xs.c) {
    throw ShapeError("conv2d: input channels " + std::to_string(xs.c) +
                     " but weight expects " + std::to_string(ws.c));
  }
  if (ws.h != ws.w) throw ShapeError("conv2d: non-square kernel");
  const Geometry g = make_geometry(xs.c, xs.h, xs.w, ws.h, opt);
  if (g.out_h <= 0 || g.out_w <= 0) throw ShapeError("conv2d: empty output");
  const int cout = ws.n;
  Tensor out({xs.n, cout, g.out_h, g.out_w});
  ConstMapMat W(w.value().data(), cout, g.rows());
  std::vector<double> col(g.trivial() ? 0 : static_cast<std::size_t>(g.rows()) * g.cols());
  for (int n = 0; n < xs.n; ++n) {
    const double* src = x.value().plane(n, 0);
    if (!g.trivial()) im2col(src, g, col.data());
    ConstMapMat C(g.trivial() ? src : col.data(), g.rows(), g.cols());
    MapMat Y(out.plane(n, 0), cout, g.cols());
    Y.noalias() = W * C;
  }
  add_bias(out, bias);
  std::vector<Var> parents{x, w};
  if (bias.defined()) parents.push_back(bias);
  return make_result(std::move(out), std::move(parents), [g, cout](Node& self) {
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    ConstMapMat W(pw->value.data(), cout, g.rows());
    std::vector<double> col(static_cast<std::size_t>(g.rows()) * g.cols());
    for (int n = 0; n < self.value.n(); ++n) {
      ConstMapMat dY(self.grad.plane(n, 0), cout, g.cols());
      if (pw->requires_grad) {
        const double* src = px->value.plane(n, 0);
        if (!g.trivial()) im2col(src, g, col.data());
        ConstMapMat C(g.trivial() ? src : col.data(), g.rows(), g.cols());
        MapMat dW(pw->grad_buffer().data(), cout, g.rows());
        dW.noalias() += dY * C.transpose();
      }
      if (px->requires_grad) {
        double* dx = px->grad_buffer().plane(n, 0);
        if (g.trivial()) {
          MapMat dX(dx, g.rows(), g.cols());
          dX.noalias() += W.transpose() * dY;
        } else {
          MapMat dC(col.data(), g.rows(), g.cols());
          dC.noalias() = W.transpose() * dY;
          col2im(col.data(), g, dx);
        }
      }
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      bias_backward(self, *self.parents[2]);
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& bias, int stride,
                     int pad, int output_pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();  // (Cin, Cout, k, k)
  if (ws.n != xs.c) {
    throw ShapeError("conv_transpose2d: input channels " + std::to_string(xs.c) +
                     " but weight expects " + std::to_string(ws.n));
  }
  const int k = ws.h;
  const int cout = ws.c;
  const int out_h = (xs.h - 1) * stride - 2 * pad + k + output_pad;
  const int out_w = (xs.w - 1) * stride - 2 * pad + k + output_pad;
  // The transposed conv is the data-gradient of a conv from the output grid
  // back onto the input grid.
  Geometry g = make_geometry(cout, out_h, out_w, k, {stride, pad, 1});
  if (g.out_h != xs.h || g.out_w != xs.w) {
    throw ShapeError("conv_transpose2d: inconsistent geometry");
  }
  Tensor out({xs.n, cout, out_h, out_w});
  ConstMapMat W(w.value().data(), xs.c, g.rows());
  std::vector<double> col(static_cast<std::size_t>(g.rows()) * g.cols());
  for (int n = 0; n < xs.n; ++n) {
    ConstMapMat X(x.value().plane(n, 0), xs.c, g.cols());
    MapMat C(col.data(), g.rows(), g.cols());
    C.noalias() = W.transpose() * X;
    col2im(col.data(), g, out.plane(n, 0));
  }
  add_bias(out, bias);
  std::vector<Var> parents{x, w};
  if (bias.defined()) parents.push_back(bias);
  const int cin = xs.c;
  return make_result(std::move(out), std::move(parents), [g, cin](Node& self) {
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    ConstMapMat W(pw->value.data(), cin, g.rows());
    std::vector<double> col(static_cast<std::size_t>(g.rows()) * g.cols());
    for (int n = 0; n < self.value.n(); ++n) {
      im2col(self.grad.plane(n, 0), g, col.data());
      ConstMapMat dC(col.data(), g.rows(), g.cols());
      if (px->requires_grad) {
        MapMat dX(px->grad_buffer().plane(n, 0), cin, g.cols());
        dX.noalias() += W * dC;
      }
      if (pw->requires_grad) {
        ConstMapMat X(px->value.plane(n, 0), cin, g.cols());
        MapMat dW(pw->grad_buffer().data(), cin, g.rows());
        dW.noalias() += X * dC.transpose();
      }
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      bias_backward(self, *self.parents[2]);
    }
  });
}

}  // namespace stcnn::ag
