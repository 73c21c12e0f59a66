#include "model/model.hpp"

#include <algorithm>

namespace sf {

std::vector<ParamSpec> declare_model(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> s;
  const int c0 = cfg.base_channels;
  declare_conv(s, "stem.conv", 3, c0, 3, 1, false);
  declare_conv(s, "stem.res.conv1", c0, 2 * c0, 3, 1, false);
  declare_conv(s, "stem.res.conv2", c0, c0, 3, 1, false);
  int c = c0;
  for (int st = 0; st < cfg.stages; ++st) {
    const std::string pre = "stage" + std::to_string(st);
    const int co = cfg.stage_channels(st);
    if (cfg.has_cnn()) declare_cnn_block(s, pre + ".cnn", c, cfg.downsample, cfg.zero_init);
    if (cfg.has_transformer()) {
      if (cfg.downsample) declare_conv(s, pre + ".tr_down", 4 * c, co, 1, 1, false);
      declare_transformer_block(s, pre + ".tr", co, cfg.heads_at(st), cfg.ffn_hidden(co), cfg.zero_init);
    }
    if (cfg.fusion == FusionKind::kGate) declare_gate_fusion(s, pre + ".fuse", co, cfg.zero_init);
    if (cfg.fusion == FusionKind::kSk) declare_sk_fusion(s, pre + ".fuse", co);
    c = co;
  }
  if (cfg.downsample)
    for (int st = cfg.stages - 1; st >= 0; --st) {
      const int cs = cfg.stage_channels(st);
      declare_conv(s, "head.up" + std::to_string(st), cs, 2 * cs, 1, 1, false);
    }
  declare_conv(s, "head.out", c0, 3, 3, 1, cfg.zero_init);
  return s;
}

template <class T>
Var<T> sandformer_forward(ParamBinder<T>& p, const ModelConfig& cfg, const Var<T>& image) {
  const Shape& s = image.shape();
  require(s.size() == 3 && s[0] == 3, ErrorCode::kInvalidArgument,
          "expected a [3,H,W] image, got " + shape_str(s));
  const int m = cfg.size_multiple();
  require(s[1] % m == 0 && s[2] % m == 0, ErrorCode::kInvalidArgument,
          "image height and width must be multiples of " + std::to_string(m) + " for " +
              std::to_string(cfg.stages) + " downsampling stages, got " + std::to_string(s[1]) + "x" +
              std::to_string(s[2]));

  Var<T> x0 = conv_layer(p, "stem.conv", image, 1, 1, 1);
  Var<T> r = conv_layer(p, "stem.res.conv2", simple_gate(conv_layer(p, "stem.res.conv1", x0, 1, 1, 1)), 1, 1, 1);
  const Var<T> shallow = add(x0, r);

  Var<T> fc = shallow, ft = shallow;
  for (int st = 0; st < cfg.stages; ++st) {
    const std::string pre = "stage" + std::to_string(st);
    if (cfg.has_cnn()) fc = cnn_block(p, pre + ".cnn", fc, cfg.downsample);
    if (cfg.has_transformer()) {
      if (cfg.downsample) ft = conv_layer(p, pre + ".tr_down", pixel_unshuffle(ft, 2), 1, 0, 1);
      ft = transformer_block(p, pre + ".tr", ft, cfg.heads_at(st), cfg.ln_eps);
    }
    switch (cfg.fusion) {
      case FusionKind::kGate: std::tie(fc, ft) = gate_fusion(p, pre + ".fuse", fc, ft); break;
      case FusionKind::kSk: std::tie(fc, ft) = sk_fusion(p, pre + ".fuse", fc, ft); break;
      case FusionKind::kAdd: std::tie(fc, ft) = add_fusion(fc, ft); break;
      case FusionKind::kNone: break;
    }
  }
  Var<T> feat = cfg.branches == Branches::kBoth ? add(fc, ft) : (cfg.has_cnn() ? fc : ft);
  if (cfg.downsample)
    for (int st = cfg.stages - 1; st >= 0; --st)
      feat = pixel_shuffle(conv_layer(p, "head.up" + std::to_string(st), feat, 1, 0, 1), 2);
  feat = add(feat, shallow);
  return add(conv_layer(p, "head.out", feat, 1, 1, 1), image);
}

template Var<float> sandformer_forward(ParamBinder<float>&, const ModelConfig&, const Var<float>&);
template Var<double> sandformer_forward(ParamBinder<double>&, const ModelConfig&, const Var<double>&);

Model::Model(ModelConfig cfg, ParamStore params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  for (const auto& spec : declare_model(cfg_)) {
    require(params_.contains(spec.name), ErrorCode::kConfigMismatch,
            "parameter store lacks " + spec.name);
    require(params_.at(spec.name).shape() == spec.shape, ErrorCode::kConfigMismatch,
            "parameter " + spec.name + " has shape " + shape_str(params_.at(spec.name).shape()) +
                ", config expects " + shape_str(spec.shape));
  }
}

Model Model::build(const ModelConfig& cfg, std::uint64_t seed) {
  ParamStore store;
  for (const auto& spec : declare_model(cfg)) store.add(spec.name, init_param(spec, seed));
  return Model(cfg, std::move(store));
}

Tensor<float> Model::infer(const Tensor<float>& image) const {
  Tape<float> tape;
  ParamBinder<float> p(tape, &params_, false);
  Tensor<float> out = sandformer_forward(p, cfg_, tape.leaf(image, false)).value();
  for (auto& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

ImageBuffer Model::restore(const ImageBuffer& image) const {
  return ImageBuffer::from_tensor(infer(image.to_tensor()));
}

}  // namespace sf
