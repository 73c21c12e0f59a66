#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "tensor/ops.hpp"

namespace sf {

struct GradCheckOptions {
  double step = 1e-3;
  /// Coordinates probed per input; tensors at or below this size are probed fully.
  int coords_per_tensor = 12;
  /// Denominator floor: |a - n| / max(|a|, |n|, floor).
  double floor = 1e-2;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  double worst_rel_error = 0.0;
  std::string worst_location;
  int probes = 0;

  void merge(const GradCheckResult& other) {
    if (worst_location.empty() || other.worst_rel_error > worst_rel_error) {
      worst_rel_error = other.worst_rel_error;
      worst_location = other.worst_location;
    }
    probes += other.probes;
  }
};

/// Compares reverse-mode gradients (32-bit tape) against central finite
/// differences evaluated on a 64-bit replay of the same forward function.
///
/// `fn` is called as fn(Tape<T>&, const std::vector<Var<T>>&) -> Var<T> for
/// both T = float and T = double, so it is usually a generic lambda. The
/// scalar probed is sum(out * R) for a fixed random R in [-1, 1].
template <class F>
GradCheckResult check_gradients(F&& fn, const std::vector<Tensor<float>>& inputs,
                                const std::vector<std::string>& names,
                                const std::vector<bool>& differentiable,
                                const GradCheckOptions& opt = {}) {
  CounterRng rng(opt.seed, 0x67726164ULL);

  // analytic pass
  std::vector<Tensor<float>> analytic;
  Tensor<float> proj;
  {
    Tape<float> tape;
    std::vector<Var<float>> leaves;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      leaves.push_back(tape.leaf(inputs[i], differentiable[i]));
    Var<float> out = fn(tape, leaves);
    proj = Tensor<float>(out.shape());
    for (auto& v : proj.data()) v = rng.uniform(-1.0f, 1.0f);
    Var<float> loss = sum(mul(out, tape.leaf(proj, false)));
    auto grads = tape.backward(loss);
    for (std::size_t i = 0; i < inputs.size(); ++i)
      analytic.push_back(differentiable[i] ? grads.at(leaves[i]) : Tensor<float>());
  }

  const Tensor<double> proj64 = proj.cast<double>();
  std::vector<Tensor<double>> base;
  for (const auto& t : inputs) base.push_back(t.cast<double>());

  auto evaluate = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    for (const auto& x : xs) leaves.push_back(tape.leaf(x, false));
    Var<double> out = fn(tape, leaves);
    long double acc = 0;
    const auto& o = out.value();
    for (std::size_t i = 0; i < o.numel(); ++i) acc += static_cast<long double>(o[i]) * proj64[i];
    return static_cast<double>(acc);
  };

  GradCheckResult result;
  auto consider = [&](double a, double n, const std::string& where) {
    const double denom = std::max({std::abs(a), std::abs(n), opt.floor});
    const double rel = std::abs(a - n) / denom;
    ++result.probes;
    if (result.worst_location.empty() || rel > result.worst_rel_error) {
      result.worst_rel_error = rel;
      result.worst_location = where;
    }
  };

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!differentiable[i]) continue;
    const std::size_t n = inputs[i].numel();
    std::set<std::size_t> coords;
    if (n <= static_cast<std::size_t>(opt.coords_per_tensor)) {
      for (std::size_t k = 0; k < n; ++k) coords.insert(k);
    } else {
      while (coords.size() < static_cast<std::size_t>(opt.coords_per_tensor))
        coords.insert(static_cast<std::size_t>(rng.below(n)));
    }
    for (std::size_t k : coords) {
      auto xs = base;
      xs[i][k] = base[i][k] + opt.step;
      const double fp = evaluate(xs);
      xs[i][k] = base[i][k] - opt.step;
      const double fm = evaluate(xs);
      consider(analytic[i][k], (fp - fm) / (2 * opt.step),
               names[i] + "[" + std::to_string(k) + "]");
    }
    if (n > coords.size()) {
      // one random direction covers every coordinate at once
      std::vector<double> dir(n);
      double a = 0;
      for (std::size_t k = 0; k < n; ++k) {
        dir[k] = rng.uniform() < 0.5f ? -1.0 : 1.0;
        a += dir[k] * analytic[i][k];
      }
      const double h = opt.step / std::sqrt(static_cast<double>(n));
      auto xs = base;
      for (std::size_t k = 0; k < n; ++k) xs[i][k] = base[i][k] + h * dir[k];
      const double fp = evaluate(xs);
      for (std::size_t k = 0; k < n; ++k) xs[i][k] = base[i][k] - h * dir[k];
      const double fm = evaluate(xs);
      consider(a / std::sqrt(static_cast<double>(n)), (fp - fm) / (2 * opt.step),
               names[i] + "[direction]");
    }
  }
  return result;
}

}  // namespace sf
