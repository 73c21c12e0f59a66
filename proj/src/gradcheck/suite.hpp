#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gradcheck/gradcheck.hpp"
#include "model/model.hpp"

namespace sf {

/// Random parameter values for gradient checks: weights Kaiming-uniform,
/// biases U(-0.2, 0.2), unit-initialised entries 1 + U(-0.2, 0.2).
std::vector<Tensor<float>> randomized_params(const std::vector<ParamSpec>& specs, std::uint64_t seed);

/// Checks a block whose data inputs have `data_shapes`, followed by every
/// parameter in `specs`. `fwd(binder, data_vars)` is called for float and double.
template <class Fwd>
GradCheckResult check_block(const std::vector<Shape>& data_shapes,
                            const std::vector<ParamSpec>& specs, Fwd&& fwd, std::uint64_t seed,
                            const GradCheckOptions& base = {}) {
  std::vector<Tensor<float>> inputs;
  std::vector<std::string> names;
  CounterRng rng(seed, 0x64617461ULL);
  for (std::size_t i = 0; i < data_shapes.size(); ++i) {
    Tensor<float> t(data_shapes[i]);
    for (auto& v : t.data()) v = rng.uniform(-1.0f, 1.0f);
    inputs.push_back(std::move(t));
    names.push_back("input" + std::to_string(i));
  }
  auto params = randomized_params(specs, seed);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    inputs.push_back(std::move(params[i]));
    names.push_back(specs[i].name);
  }
  const std::size_t nd = data_shapes.size();
  auto fn = [&](auto& tape, const auto& vars) {
    using V = std::decay_t<decltype(vars[0])>;
    using T = std::decay_t<decltype(vars[0].value()[0])>;
    ParamBinder<T> p(tape, nullptr, false);
    for (std::size_t i = 0; i < specs.size(); ++i) p.bind(specs[i].name, vars[nd + i]);
    std::vector<V> data(vars.begin(), vars.begin() + static_cast<std::ptrdiff_t>(nd));
    return fwd(p, data);
  };
  GradCheckOptions opt = base;
  opt.seed = seed;
  return check_gradients(fn, inputs, names, std::vector<bool>(inputs.size(), true), opt);
}

struct SuiteRow {
  std::string block;
  GradCheckResult result;
  int instances = 0;
};

/// Every network block plus a one-stage full network, `instances` random
/// instances each. Rows come back in a fixed order.
std::vector<SuiteRow> run_gradcheck_suite(std::uint64_t seed, int instances,
                                          const std::function<void(const SuiteRow&)>& progress = {});

std::vector<std::string> gradcheck_suite_blocks();

/// Runs a single named block from the suite.
SuiteRow run_gradcheck_block(const std::string& block, std::uint64_t seed, int instances);

}  // namespace sf
