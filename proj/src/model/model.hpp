#pragma once

#include <cstdint>
#include <vector>

#include "image/image.hpp"
#include "model/blocks.hpp"

namespace sf {

/// Every parameter of the network in forward order.
std::vector<ParamSpec> declare_model(const ModelConfig& cfg);

/// image [3,H,W] -> restored [3,H,W], unclamped. Throws invalid-argument if
/// H or W is not a multiple of cfg.size_multiple().
template <class T>
Var<T> sandformer_forward(ParamBinder<T>& p, const ModelConfig& cfg, const Var<T>& image);

class Model {
 public:
  Model(ModelConfig cfg, ParamStore params);

  static Model build(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Inference: no gradients, output clamped to [0,1].
  Tensor<float> infer(const Tensor<float>& image) const;
  ImageBuffer restore(const ImageBuffer& image) const;

 private:
  ModelConfig cfg_;
  ParamStore params_;
};

}  // namespace sf
