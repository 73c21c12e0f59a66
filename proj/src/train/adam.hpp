#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "model/params.hpp"

namespace sf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments in parameter-store order.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor<float>> m;
  std::vector<Tensor<float>> v;

  static AdamState zeros_like(const ParamStore& params);
  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update. `grads` is indexed like the store; arithmetic
/// is done in double and stored as float. Missing moments or shape drift is a state error.
void adam_step(ParamStore& params, const std::vector<Tensor<float>>& grads, AdamState& state,
               const AdamConfig& cfg);

}  // namespace sf
