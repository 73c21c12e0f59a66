#pragma once

#include "tensor/tape.hpp"

namespace sf {

/// mean(sqrt((pred - target)^2 + eps^2)) accumulated in double.
double charbonnier_value(const Tensor<float>& pred, const Tensor<float>& target, double eps);

/// Differentiable with respect to `pred`; `target` is treated as a constant.
template <class T>
Var<T> charbonnier_loss(const Var<T>& pred, const Tensor<T>& target, double eps);

}  // namespace sf
