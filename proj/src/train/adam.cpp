#include "train/adam.hpp"

#include <cmath>

namespace sf {

AdamState AdamState::zeros_like(const ParamStore& params) {
  AdamState s;
  for (const auto& [name, t] : params.entries()) {
    s.m.emplace_back(t.shape());
    s.v.emplace_back(t.shape());
  }
  return s;
}

void adam_step(ParamStore& params, const std::vector<Tensor<float>>& grads, AdamState& state,
               const AdamConfig& cfg) {
  auto& entries = params.entries();
  require(grads.size() == entries.size() && state.m.size() == entries.size() &&
              state.v.size() == entries.size(),
          ErrorCode::kState, "adam: parameter, gradient and moment counts differ");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Tensor<float>& p = entries[k].second;
    const Tensor<float>& g = grads[k];
    Tensor<float>& m = state.m[k];
    Tensor<float>& v = state.v[k];
    require(g.shape() == p.shape() && m.shape() == p.shape() && v.shape() == p.shape(),
            ErrorCode::kState, "adam: shape drift on " + entries[k].first);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = cfg.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
      p[i] = static_cast<float>(p[i] - update);
    }
  }
}

}  // namespace sf
