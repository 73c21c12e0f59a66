#pragma once

#include <span>
#include <vector>

#include "tensor/tape.hpp"

// Differentiable operations over Var<T>. Every op validates shapes and throws
// an invalid-argument Error naming the shapes involved. Binary elementwise ops
// require equal shapes; the only broadcasts are scalar_mul and channel_scale.

namespace sf {

struct Conv2dGeometry {
  int in_channels, height, width;
  int out_channels, kernel;
  int stride, padding, groups;
  int out_height, out_width;
};

/// Output geometry for conv2d; throws invalid-argument on incompatible shapes.
/// Output extent is floor((H + 2p - k) / stride) + 1 and must be >= 1.
Conv2dGeometry conv2d_geometry(const Shape& input, const Shape& weight, int stride, int padding,
                               int groups);

/// Cross-correlation of x[Cin,H,W] with w[Cout,Cin/groups,k,k] plus optional
/// bias[Cout] (pass a default-constructed Var for none). Zero padding.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride, int padding,
              int groups);

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

/// Max-subtracted softmax along `axis`.
template <class T>
Var<T> softmax(const Var<T>& x, int axis);

/// Normalizes each pixel of x[C,H,W] across channels; gamma/beta are [C].
template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps);

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> scale(const Var<T>& x, double factor);
/// x * s where s holds a single element (learnable scalar).
template <class T>
Var<T> scalar_mul(const Var<T>& x, const Var<T>& s);
/// x[C,H,W] scaled per channel by s[C,1,1].
template <class T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& s);
template <class T>
Var<T> sigmoid(const Var<T>& x);
template <class T>
Var<T> relu(const Var<T>& x);
/// Exact erf form: 0.5 x (1 + erf(x / sqrt 2)).
template <class T>
Var<T> gelu(const Var<T>& x);
template <class T>
Var<T> exp(const Var<T>& x);

/// [C,H,W] -> [C,1,1]
template <class T>
Var<T> global_avg_pool(const Var<T>& x);
/// Mean of all elements, shape [1].
template <class T>
Var<T> mean(const Var<T>& x);
/// Sum of all elements, shape [1].
template <class T>
Var<T> sum(const Var<T>& x);

/// Concatenates along axis 0; remaining dims must agree.
template <class T>
Var<T> concat_channels(std::span<const Var<T>> parts);
template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);
/// Splits axis 0 into `parts` equal slices.
template <class T>
std::vector<Var<T>> split_channels(const Var<T>& x, int parts);

/// [C,H,W] -> [C*r*r, H/r, W/r]; out[(c*r+i)*r+j, y, x] = in[c, y*r+i, x*r+j].
template <class T>
Var<T> pixel_unshuffle(const Var<T>& x, int r);
/// Inverse of pixel_unshuffle.
template <class T>
Var<T> pixel_shuffle(const Var<T>& x, int r);
template <class T>
Var<T> transpose2d(const Var<T>& x);
template <class T>
Var<T> reshape(const Var<T>& x, Shape shape);

/// Rows of x[R,N] divided by max(||row||_2, eps).
template <class T>
Var<T> normalize_rows(const Var<T>& x, double eps);

}  // namespace sf
