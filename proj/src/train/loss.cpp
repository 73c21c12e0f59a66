#include "train/loss.hpp"

#include <cmath>

namespace sf {

template <class T>
static void check_args(const Tensor<T>& pred, const Tensor<T>& target, double eps) {
  require(pred.shape() == target.shape(), ErrorCode::kInvalidArgument,
          "charbonnier: shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  require(eps > 0.0, ErrorCode::kInvalidArgument, "charbonnier: eps must be positive");
}

double charbonnier_value(const Tensor<float>& pred, const Tensor<float>& target, double eps) {
  check_args(pred, target, eps);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    acc += std::sqrt(d * d + eps * eps);
  }
  return acc / static_cast<double>(pred.numel());
}

template <class T>
Var<T> charbonnier_loss(const Var<T>& pred, const Tensor<T>& target, double eps) {
  check_args(pred.value(), target, eps);
  const Tensor<T>& p = pred.value();
  const std::size_t n = p.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(p[i]) - target[i];
    acc += std::sqrt(d * d + eps * eps);
  }
  Tensor<T> out(Shape{1}, std::vector<T>{static_cast<T>(acc / n)});
  return pred.tape()->record(std::move(out), {pred}, [target, eps, n](Tape<T>& t, int self) {
    const int pi = t.input(self, 0);
    if (!t.needs_grad(pi)) return;
    const double g = static_cast<double>(t.grad(self)[0]) / static_cast<double>(n);
    const Tensor<T>& pv = t.value(pi);
    Tensor<T>& slot = t.grad_slot(pi);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = static_cast<double>(pv[i]) - target[i];
      slot[i] += static_cast<T>(g * d / std::sqrt(d * d + eps * eps));
    }
  });
}

template Var<float> charbonnier_loss(const Var<float>&, const Tensor<float>&, double);
template Var<double> charbonnier_loss(const Var<double>&, const Tensor<double>&, double);

}  // namespace sf
