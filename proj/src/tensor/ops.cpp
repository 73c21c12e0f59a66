#include "tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tensor/gemm.hpp"

namespace sf {
namespace {

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  require(a == b, ErrorCode::kInvalidArgument,
          std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require_rank(const char* op, const Shape& s, int rank) {
  require(static_cast<int>(s.size()) == rank, ErrorCode::kInvalidArgument,
          std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(s));
}

template <class T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.ptr();
  const T* s = src.ptr();
  for (std::size_t i = 0; i < src.numel(); ++i) d[i] += s[i];
}

// im2col for one group: rows = cin_g*k*k, cols = Ho*Wo.
template <class T>
void im2col(const Conv2dGeometry& g, const T* x, int group, T* cols) {
  const int cin_g = g.in_channels / g.groups;
  const int k = g.kernel;
  const std::size_t P = static_cast<std::size_t>(g.out_height) * g.out_width;
  for (int c = 0; c < cin_g; ++c) {
    const T* xc = x + static_cast<std::size_t>(group * cin_g + c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * P;
        for (int oy = 0; oy < g.out_height; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.out_width;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_width, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const Conv2dGeometry& g, const T* cols, int group, T* gx) {
  const int cin_g = g.in_channels / g.groups;
  const int k = g.kernel;
  const std::size_t P = static_cast<std::size_t>(g.out_height) * g.out_width;
  for (int c = 0; c < cin_g; ++c) {
    T* gc = gx + static_cast<std::size_t>(group * cin_g + c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * P;
        for (int oy = 0; oy < g.out_height; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          const T* src = row + static_cast<std::size_t>(oy) * g.out_width;
          T* dst = gc + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Valid output range [lo, hi) along one axis for a given kernel tap.
inline void tap_range(int out_extent, int in_extent, int stride, int padding, int tap, int& lo,
                      int& hi) {
  // need 0 <= o*stride - padding + tap < in_extent
  lo = 0;
  while (lo < out_extent && lo * stride - padding + tap < 0) ++lo;
  hi = out_extent;
  while (hi > lo && (hi - 1) * stride - padding + tap >= in_extent) --hi;
}

template <class T>
void depthwise_forward(const Conv2dGeometry& g, const T* x, const T* w, T* out) {
  const int k = g.kernel;
  const std::size_t hw_in = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t hw_out = static_cast<std::size_t>(g.out_height) * g.out_width;
  for (int c = 0; c < g.in_channels; ++c) {
    const T* xc = x + c * hw_in;
    T* oc = out + c * hw_out;
    std::fill(oc, oc + hw_out, T(0));
    for (int ky = 0; ky < k; ++ky) {
      int y0, y1;
      tap_range(g.out_height, g.height, g.stride, g.padding, ky, y0, y1);
      for (int kx = 0; kx < k; ++kx) {
        int x0, x1;
        tap_range(g.out_width, g.width, g.stride, g.padding, kx, x0, x1);
        const T wv = w[(static_cast<std::size_t>(c) * k + ky) * k + kx];
        for (int oy = y0; oy < y1; ++oy) {
          const T* src = xc + static_cast<std::size_t>(oy * g.stride - g.padding + ky) * g.width;
          T* dst = oc + static_cast<std::size_t>(oy) * g.out_width;
          if (g.stride == 1) {
            const T* s = src - g.padding + kx;
            for (int ox = x0; ox < x1; ++ox) dst[ox] += wv * s[ox];
          } else {
            for (int ox = x0; ox < x1; ++ox) dst[ox] += wv * src[ox * g.stride - g.padding + kx];
          }
        }
      }
    }
  }
}

template <class T>
void depthwise_backward(const Conv2dGeometry& g, const T* x, const T* w, const T* gy, T* gx,
                        T* gw) {
  const int k = g.kernel;
  const std::size_t hw_in = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t hw_out = static_cast<std::size_t>(g.out_height) * g.out_width;
  for (int c = 0; c < g.in_channels; ++c) {
    const T* xc = x + c * hw_in;
    const T* gc = gy + c * hw_out;
    for (int ky = 0; ky < k; ++ky) {
      int y0, y1;
      tap_range(g.out_height, g.height, g.stride, g.padding, ky, y0, y1);
      for (int kx = 0; kx < k; ++kx) {
        int x0, x1;
        tap_range(g.out_width, g.width, g.stride, g.padding, kx, x0, x1);
        const std::size_t widx = (static_cast<std::size_t>(c) * k + ky) * k + kx;
        const T wv = w[widx];
        T acc = T(0);
        for (int oy = y0; oy < y1; ++oy) {
          const std::size_t in_row = static_cast<std::size_t>(oy * g.stride - g.padding + ky) * g.width;
          const T* grow = gc + static_cast<std::size_t>(oy) * g.out_width;
          for (int ox = x0; ox < x1; ++ox) {
            const std::size_t ix = in_row + ox * g.stride - g.padding + kx;
            if (gx) gx[c * hw_in + ix] += wv * grow[ox];
            acc += grow[ox] * xc[ix];
          }
        }
        if (gw) gw[widx] += acc;
      }
    }
  }
}

}  // namespace

Conv2dGeometry conv2d_geometry(const Shape& in, const Shape& w, int stride, int padding,
                               int groups) {
  const std::string shapes = "input " + shape_str(in) + ", weight " + shape_str(w);
  require(in.size() == 3, ErrorCode::kInvalidArgument, "conv2d: input must be [C,H,W]; " + shapes);
  require(w.size() == 4, ErrorCode::kInvalidArgument,
          "conv2d: weight must be [Cout,Cin/groups,k,k]; " + shapes);
  require(groups >= 1 && in[0] % groups == 0, ErrorCode::kInvalidArgument,
          "conv2d: input channels " + std::to_string(in[0]) + " not divisible by groups " +
              std::to_string(groups));
  require(w[0] % groups == 0, ErrorCode::kInvalidArgument,
          "conv2d: output channels " + std::to_string(w[0]) + " not divisible by groups " +
              std::to_string(groups));
  require(w[1] == in[0] / groups, ErrorCode::kInvalidArgument,
          "conv2d: shape mismatch, " + shapes);
  require(w[2] == w[3], ErrorCode::kInvalidArgument, "conv2d: kernel must be square; " + shapes);
  require(stride >= 1 && padding >= 0, ErrorCode::kInvalidArgument,
          "conv2d: stride must be >= 1 and padding >= 0");
  Conv2dGeometry g{};
  g.in_channels = in[0];
  g.height = in[1];
  g.width = in[2];
  g.out_channels = w[0];
  g.kernel = w[2];
  g.stride = stride;
  g.padding = padding;
  g.groups = groups;
  const int span_h = g.height + 2 * padding - g.kernel;
  const int span_w = g.width + 2 * padding - g.kernel;
  require(span_h >= 0 && span_w >= 0, ErrorCode::kInvalidArgument,
          "conv2d: kernel larger than padded input; " + shapes);
  g.out_height = span_h / stride + 1;
  g.out_width = span_w / stride + 1;
  return g;
}

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride, int padding,
              int groups) {
  const Conv2dGeometry g = conv2d_geometry(x.shape(), w.shape(), stride, padding, groups);
  if (bias.valid()) {
    require(bias.shape() == Shape{g.out_channels}, ErrorCode::kInvalidArgument,
            "conv2d: bias " + shape_str(bias.shape()) + " does not match weight " +
                shape_str(w.shape()));
  }
  const int cin_g = g.in_channels / g.groups;
  const int cout_g = g.out_channels / g.groups;
  const bool depthwise = cin_g == 1 && cout_g == 1;
  const bool pointwise = g.kernel == 1 && g.stride == 1 && g.padding == 0;
  const std::size_t P = static_cast<std::size_t>(g.out_height) * g.out_width;
  const std::size_t K = static_cast<std::size_t>(cin_g) * g.kernel * g.kernel;
  const std::size_t hw_in = static_cast<std::size_t>(g.height) * g.width;

  Tensor<T> out(Shape{g.out_channels, g.out_height, g.out_width});
  const T* xd = x.value().ptr();
  const T* wd = w.value().ptr();
  if (depthwise) {
    depthwise_forward(g, xd, wd, out.ptr());
  } else {
    std::vector<T> cols(pointwise ? 0 : K * P);
    for (int gi = 0; gi < g.groups; ++gi) {
      const T* colp = xd + static_cast<std::size_t>(gi) * cin_g * hw_in;
      if (!pointwise) {
        im2col(g, xd, gi, cols.data());
        colp = cols.data();
      }
      kernel::gemm_nn<T>(cout_g, P, K, wd + static_cast<std::size_t>(gi) * cout_g * K, colp,
                         out.ptr() + static_cast<std::size_t>(gi) * cout_g * P, false);
    }
  }
  if (bias.valid()) {
    const T* bd = bias.value().ptr();
    for (int c = 0; c < g.out_channels; ++c) {
      T* oc = out.ptr() + c * P;
      for (std::size_t p = 0; p < P; ++p) oc[p] += bd[c];
    }
  }

  std::vector<Var<T>> inputs{x, w};
  if (bias.valid()) inputs.push_back(bias);
  const bool has_bias = bias.valid();
  return x.tape()->record(
      std::move(out), inputs,
      [g, has_bias, depthwise, pointwise, P, K, hw_in, cin_g, cout_g](Tape<T>& t, int self) {
        const int xi = t.input(self, 0);
        const int wi = t.input(self, 1);
        const T* gy = t.grad(self).ptr();
        const T* xd = t.value(xi).ptr();
        const T* wd = t.value(wi).ptr();
        if (has_bias) {
          const int bi = t.input(self, 2);
          if (t.needs_grad(bi)) {
            T* gb = t.grad_slot(bi).ptr();
            for (int c = 0; c < g.out_channels; ++c) {
              T acc = T(0);
              for (std::size_t p = 0; p < P; ++p) acc += gy[c * P + p];
              gb[c] += acc;
            }
          }
        }
        const bool need_x = t.needs_grad(xi);
        const bool need_w = t.needs_grad(wi);
        if (!need_x && !need_w) return;
        T* gx = need_x ? t.grad_slot(xi).ptr() : nullptr;
        T* gw = need_w ? t.grad_slot(wi).ptr() : nullptr;
        if (depthwise) {
          depthwise_backward(g, xd, wd, gy, gx, gw);
          return;
        }
        std::vector<T> cols(pointwise ? 0 : K * P);
        std::vector<T> dcols(need_x && !pointwise ? K * P : 0);
        for (int gi = 0; gi < g.groups; ++gi) {
          const T* gyg = gy + static_cast<std::size_t>(gi) * cout_g * P;
          const T* wg = wd + static_cast<std::size_t>(gi) * cout_g * K;
          if (need_w) {
            const T* colp = xd + static_cast<std::size_t>(gi) * cin_g * hw_in;
            if (!pointwise) {
              im2col(g, xd, gi, cols.data());
              colp = cols.data();
            }
            kernel::gemm_nt<T>(cout_g, K, P, gyg, colp,
                               gw + static_cast<std::size_t>(gi) * cout_g * K, true);
          }
          if (need_x) {
            if (pointwise) {
              kernel::gemm_tn<T>(K, P, cout_g, wg, gyg,
                                 gx + static_cast<std::size_t>(gi) * cin_g * hw_in, true);
            } else {
              kernel::gemm_tn<T>(K, P, cout_g, wg, gyg, dcols.data(), false);
              col2im_add(g, dcols.data(), gi, gx);
            }
          }
        }
      });
}

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require_rank("matmul", a.shape(), 2);
  require_rank("matmul", b.shape(), 2);
  const int M = a.shape()[0], K = a.shape()[1], N = b.shape()[1];
  require(b.shape()[0] == K, ErrorCode::kInvalidArgument,
          "matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
              shape_str(b.shape()));
  Tensor<T> out(Shape{M, N});
  kernel::gemm_nn<T>(M, N, K, a.value().ptr(), b.value().ptr(), out.ptr(), false);
  return a.tape()->record(std::move(out), {a, b}, [M, N, K](Tape<T>& t, int self) {
    const int ai = t.input(self, 0), bi = t.input(self, 1);
    const T* gy = t.grad(self).ptr();
    if (t.needs_grad(ai)) {
      // dA = gY * B^T
      kernel::gemm_nt<T>(M, K, N, gy, t.value(bi).ptr(), t.grad_slot(ai).ptr(), true);
    }
    if (t.needs_grad(bi)) {
      // dB = A^T * gY
      kernel::gemm_tn<T>(K, N, M, t.value(ai).ptr(), gy, t.grad_slot(bi).ptr(), true);
    }
  });
}

template <class T>
Var<T> softmax(const Var<T>& x, int axis) {
  const Shape& s = x.shape();
  require(axis >= 0 && axis < static_cast<int>(s.size()), ErrorCode::kInvalidArgument,
          "softmax: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Tensor<T> out(s);
  const T* xd = x.value().ptr();
  T* yd = out.ptr();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T m = xd[base];
      for (std::size_t i = 1; i < n; ++i) m = std::max(m, xd[base + i * inner]);
      T z = T(0);
      for (std::size_t i = 0; i < n; ++i) {
        const T e = std::exp(xd[base + i * inner] - m);
        yd[base + i * inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < n; ++i) yd[base + i * inner] /= z;
    }
  }
  return x.tape()->record(std::move(out), {x}, [outer, inner, n](Tape<T>& t, int self) {
    const int xi = t.input(self, 0);
    if (!t.needs_grad(xi)) return;
    const T* y = t.value(self).ptr();
    const T* g = t.grad(self).ptr();
    T* gx = t.grad_slot(xi).ptr();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        T dotp = T(0);
        for (std::size_t i = 0; i < n; ++i) dotp += g[base + i * inner] * y[base + i * inner];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = base + i * inner;
          gx[j] += y[j] * (g[j] - dotp);
        }
      }
    }
  });
}

template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps) {
  require_rank("layer_norm", x.shape(), 3);
  require(eps > 0, ErrorCode::kInvalidArgument, "layer_norm: eps must be positive");
  const int C = x.shape()[0];
  require(gamma.shape() == Shape{C} && beta.shape() == Shape{C}, ErrorCode::kInvalidArgument,
          "layer_norm: gamma " + shape_str(gamma.shape()) + " / beta " +
              shape_str(beta.shape()) + " do not match input " + shape_str(x.shape()));
  const std::size_t P = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
  const T* xd = x.value().ptr();
  std::vector<T> mu(P, T(0)), inv_std(P, T(0));
  for (int c = 0; c < C; ++c)
    for (std::size_t p = 0; p < P; ++p) mu[p] += xd[c * P + p];
  for (std::size_t p = 0; p < P; ++p) mu[p] /= static_cast<T>(C);
  std::vector<T> var(P, T(0));
  for (int c = 0; c < C; ++c)
    for (std::size_t p = 0; p < P; ++p) {
      const T d = xd[c * P + p] - mu[p];
      var[p] += d * d;
    }
  for (std::size_t p = 0; p < P; ++p)
    inv_std[p] = T(1) / std::sqrt(var[p] / static_cast<T>(C) + static_cast<T>(eps));
  std::vector<T> xhat(static_cast<std::size_t>(C) * P);
  Tensor<T> out(x.shape());
  const T* gd = gamma.value().ptr();
  const T* bd = beta.value().ptr();
  for (int c = 0; c < C; ++c)
    for (std::size_t p = 0; p < P; ++p) {
      const T h = (xd[c * P + p] - mu[p]) * inv_std[p];
      xhat[c * P + p] = h;
      out[c * P + p] = gd[c] * h + bd[c];
    }
  return x.tape()->record(
      std::move(out), {x, gamma, beta},
      [C, P, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, int self) {
        const int xi = t.input(self, 0), gi = t.input(self, 1), bi = t.input(self, 2);
        const T* g = t.grad(self).ptr();
        const T* gam = t.value(gi).ptr();
        if (t.needs_grad(gi)) {
          T* gg = t.grad_slot(gi).ptr();
          for (int c = 0; c < C; ++c) {
            T acc = T(0);
            for (std::size_t p = 0; p < P; ++p) acc += g[c * P + p] * xhat[c * P + p];
            gg[c] += acc;
          }
        }
        if (t.needs_grad(bi)) {
          T* gb = t.grad_slot(bi).ptr();
          for (int c = 0; c < C; ++c) {
            T acc = T(0);
            for (std::size_t p = 0; p < P; ++p) acc += g[c * P + p];
            gb[c] += acc;
          }
        }
        if (t.needs_grad(xi)) {
          std::vector<T> m1(P, T(0)), m2(P, T(0));
          for (int c = 0; c < C; ++c)
            for (std::size_t p = 0; p < P; ++p) {
              const T gh = g[c * P + p] * gam[c];
              m1[p] += gh;
              m2[p] += gh * xhat[c * P + p];
            }
          const T invC = T(1) / static_cast<T>(C);
          T* gx = t.grad_slot(xi).ptr();
          for (int c = 0; c < C; ++c)
            for (std::size_t p = 0; p < P; ++p) {
              const T gh = g[c * P + p] * gam[c];
              gx[c * P + p] +=
                  inv_std[p] * (gh - m1[p] * invC - xhat[c * P + p] * m2[p] * invC);
            }
        }
      });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape("add", a.shape(), b.shape());
  Tensor<T> out(a.shape());
  const T* ad = a.value().ptr();
  const T* bd = b.value().ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = ad[i] + bd[i];
  return a.tape()->record(std::move(out), {a, b}, [](Tape<T>& t, int self) {
    for (int k = 0; k < 2; ++k) {
      const int in = t.input(self, k);
      if (t.needs_grad(in)) accumulate(t.grad_slot(in), t.grad(self));
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape("sub", a.shape(), b.shape());
  Tensor<T> out(a.shape());
  const T* ad = a.value().ptr();
  const T* bd = b.value().ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = ad[i] - bd[i];
  return a.tape()->record(std::move(out), {a, b}, [](Tape<T>& t, int self) {
    const int ai = t.input(self, 0), bi = t.input(self, 1);
    if (t.needs_grad(ai)) accumulate(t.grad_slot(ai), t.grad(self));
    if (t.needs_grad(bi)) {
      T* gb = t.grad_slot(bi).ptr();
      const T* g = t.grad(self).ptr();
      for (std::size_t i = 0; i < t.grad(self).numel(); ++i) gb[i] -= g[i];
    }
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape("mul", a.shape(), b.shape());
  Tensor<T> out(a.shape());
  const T* ad = a.value().ptr();
  const T* bd = b.value().ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = ad[i] * bd[i];
  return a.tape()->record(std::move(out), {a, b}, [](Tape<T>& t, int self) {
    const int ai = t.input(self, 0), bi = t.input(self, 1);
    const T* g = t.grad(self).ptr();
    const std::size_t n = t.grad(self).numel();
    if (t.needs_grad(ai)) {
      T* ga = t.grad_slot(ai).ptr();
      const T* bd = t.value(bi).ptr();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bd[i];
    }
    if (t.needs_grad(bi)) {
      T* gb = t.grad_slot(bi).ptr();
      const T* ad = t.value(ai).ptr();
      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * ad[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& x, double factor) {
  const T f = static_cast<T>(factor);
  Tensor<T> out(x.shape());
  const T* xd = x.value().ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f * xd[i];
  return x.tape()->record(std::move(out), {x}, [f](Tape<T>& t, int self) {
    const int xi = t.input(self, 0);
    if (!t.needs_grad(xi)) return;
    T* gx = t.grad_slot(xi).ptr();
    const T* g = t.grad(self).ptr();
    for (std::size_t i = 0; i < t.grad(self).numel(); ++i) gx[i] += f * g[i];
  });
}

template <class T>
Var<T> scalar_mul(const Var<T>& x, const Var<T>& s) {
  require(s.value().numel() == 1, ErrorCode::kInvalidArgument,
          "scalar_mul: scalar operand has shape " + shape_str(s.shape()));
  const T sv = s.value()[0];
  Tensor<T> out(x.shape());
  const T* xd = x.value().ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = sv * xd[i];
  return x.tape()->record(std::move(out), {x, s}, [](Tape<T>& t, int self) {
    const int xi = t.input(self, 0), si = t.input(self, 1);
    const T* g = t.grad(self).ptr();
    const std::size_t n = t.grad(self).numel();
    if (t.needs_grad(xi)) {
      const T sv = t.value(si)[0];
      T* gx = t.grad_slot(xi).ptr();
      for (std::size_t i = 0; i < n; ++i) gx[i] += sv * g[i];
    }
    if (t.needs_grad(si)) {
      const T* xd = t.value(xi).ptr();
      T acc = T(0);
      for (std::size_t i = 0; i < n; ++i) acc += g[i] * xd[i];
      t.grad_slot(si)[0] += acc;
    }
  });
}

template <class T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& s) {
  require_rank("channel_scale", x.shape(), 3);
  const int C = x.shape()[0];
  require(s.value().numel() == static_cast<std::size_t>(C), ErrorCode::kInvalidArgument,
          "channel_scale: scale " + shape_str(s.shape()) + " does not match input " +
              shape_str(x.shape()));
  const std::size_t P = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
  Tensor<T> out(x.shape());
  const T* xd = x.value().ptr();
  const T* sd = s.value().ptr();
  for (int c = 0; c < C; ++c)
    for (std::size_t p = 0; p < P; ++p) out[c * P + p] = xd[c * P + p] * sd[c];
  return x.tape()->record(std::move(out), {x, s}, [C, P](Tape<T>& t, int self) {
    const int xi = t.input(self, 0), si = t.input(self, 1);
    const T* g = t.grad(self).ptr();
    if (t.needs_grad(xi)) {
      const T* sd = t.value(si).ptr();
      T* gx = t.grad_slot(xi).ptr();
      for (int c = 0; c < C; ++c)
        for (std::size_t p = 0; p < P; ++p) gx[c * P + p] += g[c * P + p] * sd[c];
    }
    if (t.needs_grad(si)) {
      const T* xd = t.value(xi).ptr();
      T* gs = t.grad_slot(si).ptr();
      for (int c = 0; c < C; ++c) {
        T acc = T(0);
        for (std::size_t p = 0; p < P; ++p) acc += g[c * P + p] * xd[c * P + p];
        gs[c] += acc;
      }
    }
  });
}

namespace {

// Elementwise unary op; Deriv computes dy/dx from (x, y).
template <class T, class Fwd, class Deriv>
Var<T> unary(const Var<T>& x, Fwd fwd, Deriv deriv) {
  Tensor<T> out(x.shape());
  const T* xd = x.value().ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = fwd(xd[i]);
  return x.tape()->record(std::move(out), {x}, [deriv](Tape<T>& t, int self) {
    const int xi = t.input(self, 0);
    if (!t.needs_grad(xi)) return;
    const T* xv = t.value(xi).ptr();
    const T* yv = t.value(self).ptr();
    const T* g = t.grad(self).ptr();
    T* gx = t.grad_slot(xi).ptr();
    for (std::size_t i = 0; i < t.grad(self).numel(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> relu(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> gelu(const Var<T>& x) {
  return unary<T>(
      x,
      [](T v) { return static_cast<T>(0.5) * v * (T(1) + std::erf(v * static_cast<T>(M_SQRT1_2))); },
      [](T v, T) {
        const T cdf = static_cast<T>(0.5) * (T(1) + std::erf(v * static_cast<T>(M_SQRT1_2)));
        const T pdf = static_cast<T>(0.3989422804014327) * std::exp(static_cast<T>(-0.5) * v * v);
        return cdf + v * pdf;
      });
}

template <class T>
Var<T> exp(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Var<T> global_avg_pool(const Var<T>& x) {
  require_rank("global_avg_pool", x.shape(), 3);
  const int C = x.shape()[0];
  const std::size_t P = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
  Tensor<T> out(Shape{C, 1, 1});
  const T* xd = x.value().ptr();
  for (int c = 0; c < C; ++c) {
    T acc = T(0);
    for (std::size_t p = 0; p < P; ++p) acc += xd[c * P + p];
    out[c] = acc / static_cast<T>(P);
  }
  return x.tape()->record(std::move(out), {x}, [C, P](Tape<T>& t, int self) {
    const int xi = t.input(self, 0);
    if (!t.needs_grad(xi)) return;
    T* gx = t.grad_slot(xi).ptr();
    const T* g = t.grad(self).ptr();
    for (int c = 0; c < C; ++c) {
      const T v = g[c] / static_cast<T>(P);
      for (std::size_t p = 0; p < P; ++p) gx[c * P + p] += v;
    }
  });
}

template <class T>
Var<T> sum(const Var<T>& x) {
  T acc = T(0);
  for (T v : x.value().data()) acc += v;
  return x.tape()->record(Tensor<T>(Shape{1}, std::vector<T>{acc}), {x},
                          [](Tape<T>& t, int self) {
                            const int xi = t.input(self, 0);
                            if (!t.needs_grad(xi)) return;
                            const T g = t.grad(self)[0];
                            for (T& v : t.grad_slot(xi).data()) v += g;
                          });
}

template <class T>
Var<T> mean(const Var<T>& x) {
  const std::size_t n = x.value().numel();
  T acc = T(0);
  for (T v : x.value().data()) acc += v;
  acc /= static_cast<T>(n);
  return x.tape()->record(Tensor<T>(Shape{1}, std::vector<T>{acc}), {x},
                          [n](Tape<T>& t, int self) {
                            const int xi = t.input(self, 0);
                            if (!t.needs_grad(xi)) return;
                            const T g = t.grad(self)[0] / static_cast<T>(n);
                            for (T& v : t.grad_slot(xi).data()) v += g;
                          });
}

template <class T>
Var<T> concat_channels(std::span<const Var<T>> parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_channels: no inputs");
  Shape rest(parts[0].shape().begin() + 1, parts[0].shape().end());
  int total = 0;
  for (const auto& p : parts) {
    Shape r(p.shape().begin() + 1, p.shape().end());
    require(r == rest, ErrorCode::kInvalidArgument,
            "concat_channels: shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                shape_str(p.shape()));
    total += p.shape()[0];
  }
  Shape out_shape = parts[0].shape();
  out_shape[0] = total;
  Tensor<T> out(out_shape);
  std::vector<std::size_t> sizes;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.ptr() + offset);
    sizes.push_back(p.value().numel());
    offset += p.value().numel();
  }
  return parts[0].tape()->record(std::move(out), parts, [sizes](Tape<T>& t, int self) {
    const T* g = t.grad(self).ptr();
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const int in = t.input(self, k);
      if (t.needs_grad(in)) {
        T* gi = t.grad_slot(in).ptr();
        for (std::size_t i = 0; i < sizes[k]; ++i) gi[i] += g[off + i];
      }
      off += sizes[k];
    }
  });
}

template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Var<T> parts[2] = {a, b};
  return concat_channels<T>(std::span<const Var<T>>(parts, 2));
}

template <class T>
std::vector<Var<T>> split_channels(const Var<T>& x, int parts) {
  require(x.shape().size() >= 1 && parts >= 1 && x.shape()[0] % parts == 0,
          ErrorCode::kInvalidArgument,
          "split_channels: leading dimension of " + shape_str(x.shape()) +
              " not divisible by " + std::to_string(parts));
  Shape part_shape = x.shape();
  part_shape[0] /= parts;
  const std::size_t n = shape_numel(part_shape);
  std::vector<Var<T>> out;
  for (int k = 0; k < parts; ++k) {
    const std::size_t off = static_cast<std::size_t>(k) * n;
    std::vector<T> d(x.value().ptr() + off, x.value().ptr() + off + n);
    out.push_back(x.tape()->record(Tensor<T>(part_shape, std::move(d)), {x},
                                   [off, n](Tape<T>& t, int self) {
                                     const int xi = t.input(self, 0);
                                     if (!t.needs_grad(xi)) return;
                                     T* gx = t.grad_slot(xi).ptr() + off;
                                     const T* g = t.grad(self).ptr();
                                     for (std::size_t i = 0; i < n; ++i) gx[i] += g[i];
                                   }));
  }
  return out;
}

namespace {

// Index map shared by pixel_shuffle/unshuffle: for every element of the
// unshuffled layout, its offset in the spatial layout.
std::vector<std::size_t> unshuffle_index(int C, int H, int W, int r) {
  const int Ho = H / r, Wo = W / r;
  std::vector<std::size_t> idx(static_cast<std::size_t>(C) * H * W);
  std::size_t o = 0;
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j)
        for (int y = 0; y < Ho; ++y)
          for (int x = 0; x < Wo; ++x)
            idx[o++] = (static_cast<std::size_t>(c) * H + y * r + i) * W + x * r + j;
  return idx;
}

}  // namespace

template <class T>
Var<T> pixel_unshuffle(const Var<T>& x, int r) {
  require_rank("pixel_unshuffle", x.shape(), 3);
  const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  require(r >= 1 && H % r == 0 && W % r == 0, ErrorCode::kInvalidArgument,
          "pixel_unshuffle: spatial size of " + shape_str(x.shape()) + " not divisible by " +
              std::to_string(r));
  auto idx = unshuffle_index(C, H, W, r);
  Tensor<T> out(Shape{C * r * r, H / r, W / r});
  const T* xd = x.value().ptr();
  for (std::size_t o = 0; o < idx.size(); ++o) out[o] = xd[idx[o]];
  return x.tape()->record(std::move(out), {x}, [idx = std::move(idx)](Tape<T>& t, int self) {
    const int xi = t.input(self, 0);
    if (!t.needs_grad(xi)) return;
    T* gx = t.grad_slot(xi).ptr();
    const T* g = t.grad(self).ptr();
    for (std::size_t o = 0; o < idx.size(); ++o) gx[idx[o]] += g[o];
  });
}

template <class T>
Var<T> pixel_shuffle(const Var<T>& x, int r) {
  require_rank("pixel_shuffle", x.shape(), 3);
  const int Cr = x.shape()[0], Ho = x.shape()[1], Wo = x.shape()[2];
  require(r >= 1 && Cr % (r * r) == 0, ErrorCode::kInvalidArgument,
          "pixel_shuffle: channels of " + shape_str(x.shape()) + " not divisible by " +
              std::to_string(r * r));
  const int C = Cr / (r * r);
  auto idx = unshuffle_index(C, Ho * r, Wo * r, r);
  Tensor<T> out(Shape{C, Ho * r, Wo * r});
  const T* xd = x.value().ptr();
  for (std::size_t o = 0; o < idx.size(); ++o) out[idx[o]] = xd[o];
  return x.tape()->record(std::move(out), {x}, [idx = std::move(idx)](Tape<T>& t, int self) {
    const int xi = t.input(self, 0);
    if (!t.needs_grad(xi)) return;
    T* gx = t.grad_slot(xi).ptr();
    const T* g = t.grad(self).ptr();
    for (std::size_t o = 0; o < idx.size(); ++o) gx[o] += g[idx[o]];
  });
}

template <class T>
Var<T> transpose2d(const Var<T>& x) {
  require_rank("transpose2d", x.shape(), 2);
  const int M = x.shape()[0], N = x.shape()[1];
  Tensor<T> out(Shape{N, M});
  const T* xd = x.value().ptr();
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) out[static_cast<std::size_t>(j) * M + i] = xd[static_cast<std::size_t>(i) * N + j];
  return x.tape()->record(std::move(out), {x}, [M, N](Tape<T>& t, int self) {
    const int xi = t.input(self, 0);
    if (!t.needs_grad(xi)) return;
    T* gx = t.grad_slot(xi).ptr();
    const T* g = t.grad(self).ptr();
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < N; ++j) gx[static_cast<std::size_t>(i) * N + j] += g[static_cast<std::size_t>(j) * M + i];
  });
}

template <class T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return x.tape()->record(std::move(out), {x}, [](Tape<T>& t, int self) {
    const int xi = t.input(self, 0);
    if (!t.needs_grad(xi)) return;
    T* gx = t.grad_slot(xi).ptr();
    const T* g = t.grad(self).ptr();
    for (std::size_t i = 0; i < t.grad(self).numel(); ++i) gx[i] += g[i];
  });
}

template <class T>
Var<T> normalize_rows(const Var<T>& x, double eps) {
  require_rank("normalize_rows", x.shape(), 2);
  const int R = x.shape()[0], N = x.shape()[1];
  const T e = static_cast<T>(eps);
  std::vector<T> norms(R);
  Tensor<T> out(x.shape());
  const T* xd = x.value().ptr();
  for (int r = 0; r < R; ++r) {
    const T* row = xd + static_cast<std::size_t>(r) * N;
    const T n = std::max(std::sqrt(kernel::dot(row, row, N)), e);
    norms[r] = n;
    for (int j = 0; j < N; ++j) out[static_cast<std::size_t>(r) * N + j] = row[j] / n;
  }
  return x.tape()->record(std::move(out), {x}, [R, N, e, norms = std::move(norms)](Tape<T>& t, int self) {
    const int xi = t.input(self, 0);
    if (!t.needs_grad(xi)) return;
    const T* y = t.value(self).ptr();
    const T* g = t.grad(self).ptr();
    T* gx = t.grad_slot(xi).ptr();
    for (int r = 0; r < R; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * N;
      const T n = norms[r];
      // below eps the denominator is constant
      const T proj = n > e ? kernel::dot(y + off, g + off, N) : T(0);
      for (int j = 0; j < N; ++j) gx[off + j] += (g[off + j] - y[off + j] * proj) / n;
    }
  });
}

#define SF_INSTANTIATE_OPS(T)                                                                  \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int, int);         \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                       \
  template Var<T> softmax(const Var<T>&, int);                                                \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, double);            \
  template Var<T> add(const Var<T>&, const Var<T>&);                                          \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                          \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                          \
  template Var<T> scale(const Var<T>&, double);                                               \
  template Var<T> scalar_mul(const Var<T>&, const Var<T>&);                                   \
  template Var<T> channel_scale(const Var<T>&, const Var<T>&);                                \
  template Var<T> sigmoid(const Var<T>&);                                                     \
  template Var<T> relu(const Var<T>&);                                                        \
  template Var<T> gelu(const Var<T>&);                                                        \
  template Var<T> exp(const Var<T>&);                                                         \
  template Var<T> global_avg_pool(const Var<T>&);                                             \
  template Var<T> mean(const Var<T>&);                                                        \
  template Var<T> sum(const Var<T>&);                                                         \
  template Var<T> concat_channels(std::span<const Var<T>>);                                   \
  template Var<T> concat_channels(const Var<T>&, const Var<T>&);                              \
  template std::vector<Var<T>> split_channels(const Var<T>&, int);                            \
  template Var<T> pixel_unshuffle(const Var<T>&, int);                                        \
  template Var<T> pixel_shuffle(const Var<T>&, int);                                          \
  template Var<T> transpose2d(const Var<T>&);                                                 \
  template Var<T> reshape(const Var<T>&, Shape);                                              \
  template Var<T> normalize_rows(const Var<T>&, double);

SF_INSTANTIATE_OPS(float)
SF_INSTANTIATE_OPS(double)

}  // namespace sf
