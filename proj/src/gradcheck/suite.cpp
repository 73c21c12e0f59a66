#include "gradcheck/suite.hpp"

#include <map>

namespace sf {

std::vector<Tensor<float>> randomized_params(const std::vector<ParamSpec>& specs, std::uint64_t seed) {
  std::vector<Tensor<float>> out;
  for (const auto& s : specs) {
    CounterRng rng(seed, hash_string(s.name) ^ 0x5eedULL);
    Tensor<float> t(s.shape);
    const bool is_weight = s.shape.size() == 4;
    if (is_weight) {
      ParamSpec k = s;
      k.init = InitKind::kKaiming;
      t = init_param(k, seed);
    } else {
      const float base = s.init == InitKind::kOne ? 1.0f : 0.0f;
      for (auto& v : t.data()) v = base + rng.uniform(-0.2f, 0.2f);
    }
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

using BlockFn = std::function<GradCheckResult(std::uint64_t)>;

// Single-op check; inputs drawn from U(lo, hi).
template <class F>
GradCheckResult check_op(const std::vector<Shape>& shapes, F&& fn, std::uint64_t seed, float lo = -1.0f,
                         float hi = 1.0f) {
  std::vector<Tensor<float>> inputs;
  std::vector<std::string> names;
  CounterRng rng(seed, 0x6f70ULL);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Tensor<float> t(shapes[i]);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    inputs.push_back(std::move(t));
    names.push_back("input" + std::to_string(i));
  }
  GradCheckOptions opt;
  opt.seed = seed;
  return check_gradients(fn, inputs, names, std::vector<bool>(shapes.size(), true), opt);
}

#define SF_OP(name, shapes, expr, ...)                                                          \
  {                                                                                             \
    "op." name, [](std::uint64_t s) {                                                           \
      return check_op(shapes, [](auto&, const auto& v) { return expr; }, s, ##__VA_ARGS__);     \
    }                                                                                           \
  }

using Shapes = std::vector<Shape>;

ModelConfig tiny_network() {
  ModelConfig c;
  c.base_channels = 8;
  c.stages = 1;
  c.heads = {2};
  c.ffn_expansion = 2.0;
  c.zero_init = false;
  return c;
}

const std::vector<std::pair<std::string, BlockFn>>& registry() {
  static const std::vector<std::pair<std::string, BlockFn>> blocks = {
      SF_OP("conv_dense", (Shapes{{2, 5, 5}, {3, 2, 3, 3}, {3}}), conv2d(v[0], v[1], v[2], 1, 1, 1)),
      SF_OP("conv_strided", (Shapes{{2, 6, 6}, {4, 2, 3, 3}, {4}}), conv2d(v[0], v[1], v[2], 2, 1, 1)),
      SF_OP("conv_pointwise", (Shapes{{3, 4, 4}, {5, 3, 1, 1}, {5}}), conv2d(v[0], v[1], v[2], 1, 0, 1)),
      SF_OP("conv_depthwise3", (Shapes{{3, 5, 4}, {3, 1, 3, 3}, {3}}), conv2d(v[0], v[1], v[2], 1, 1, 3)),
      SF_OP("conv_depthwise1", (Shapes{{3, 4, 4}, {3, 1, 1, 1}, {3}}), conv2d(v[0], v[1], v[2], 1, 0, 3)),
      SF_OP("conv_grouped", (Shapes{{4, 5, 5}, {6, 2, 3, 3}, {6}}), conv2d(v[0], v[1], v[2], 1, 1, 2)),
      SF_OP("matmul", (Shapes{{3, 4}, {4, 5}}), matmul(v[0], v[1])),
      SF_OP("softmax", (Shapes{{3, 6}}), softmax(v[0], 1), -3.0f, 3.0f),
      SF_OP("softmax_axis0", (Shapes{{4, 3, 2}}), softmax(v[0], 0), -3.0f, 3.0f),
      SF_OP("layer_norm", (Shapes{{5, 3, 3}, {5}, {5}}), layer_norm(v[0], v[1], v[2], 1e-5)),
      SF_OP("normalize_rows", (Shapes{{3, 7}}), normalize_rows(v[0], 1e-12)),
      SF_OP("add", (Shapes{{2, 3, 3}, {2, 3, 3}}), add(v[0], v[1])),
      SF_OP("sub", (Shapes{{2, 3, 3}, {2, 3, 3}}), sub(v[0], v[1])),
      SF_OP("mul", (Shapes{{2, 3, 3}, {2, 3, 3}}), mul(v[0], v[1])),
      SF_OP("scale", (Shapes{{2, 3, 3}}), scale(v[0], -1.7)),
      SF_OP("scalar_mul", (Shapes{{2, 3, 3}, {1}}), scalar_mul(v[0], v[1])),
      SF_OP("channel_scale", (Shapes{{3, 3, 3}, {3, 1, 1}}), channel_scale(v[0], v[1])),
      SF_OP("sigmoid", (Shapes{{2, 3, 3}}), sigmoid(v[0]), -4.0f, 4.0f),
      SF_OP("gelu", (Shapes{{2, 3, 3}}), gelu(v[0]), -3.0f, 3.0f),
      SF_OP("exp", (Shapes{{2, 3, 3}}), exp(v[0])),
      // relu probed away from its kink
      SF_OP("relu_pos", (Shapes{{2, 3, 3}}), relu(v[0]), 0.05f, 1.0f),
      SF_OP("relu_neg", (Shapes{{2, 3, 3}}), relu(v[0]), -1.0f, -0.05f),
      SF_OP("global_avg_pool", (Shapes{{3, 4, 5}}), global_avg_pool(v[0])),
      SF_OP("mean", (Shapes{{3, 4}}), mean(v[0])),
      SF_OP("sum", (Shapes{{3, 4}}), sum(v[0])),
      SF_OP("concat", (Shapes{{2, 3, 3}, {1, 3, 3}}), concat_channels(v[0], v[1])),
      SF_OP("split", (Shapes{{4, 3, 3}}), mul(split_channels(v[0], 2)[0], split_channels(v[0], 2)[1])),
      SF_OP("pixel_unshuffle", (Shapes{{2, 4, 6}}), pixel_unshuffle(v[0], 2)),
      SF_OP("pixel_shuffle", (Shapes{{8, 2, 3}}), pixel_shuffle(v[0], 2)),
      SF_OP("transpose2d", (Shapes{{3, 5}}), transpose2d(v[0])),
      SF_OP("reshape", (Shapes{{2, 3, 4}}), reshape(v[0], {6, 4})),
      {"simple_gate",
       [](std::uint64_t s) {
         return check_block({{4, 3, 3}}, {}, [](auto&, const auto& x) { return simple_gate(x[0]); }, s);
       }},
      {"channel_attention",
       [](std::uint64_t s) {
         std::vector<ParamSpec> sp{{"ca.weight", {4, 4, 1, 1}}, {"ca.bias", {4}, InitKind::kOne}};
         return check_block({{4, 5, 5}}, sp, [](auto& p, const auto& x) {
           return channel_attention(x[0], p("ca.weight"), p("ca.bias"));
         }, s);
       }},
      {"cnn_block",
       [](std::uint64_t s) {
         std::vector<ParamSpec> sp;
         declare_cnn_block(sp, "cnn", 2, true, false);
         return check_block({{2, 6, 6}}, sp, [](auto& p, const auto& x) { return cnn_block(p, "cnn", x[0], true); }, s);
       }},
      {"mdta",
       [](std::uint64_t s) {
         std::vector<ParamSpec> sp;
         declare_mdta(sp, "attn", 8, 2, false);
         return check_block({{8, 4, 4}}, sp, [](auto& p, const auto& x) { return mdta(p, "attn", x[0], 2); }, s);
       }},
      {"dswaffn",
       [](std::uint64_t s) {
         std::vector<ParamSpec> sp;
         declare_dswaffn(sp, "ffn", 3, 6, false);
         return check_block({{3, 4, 4}}, sp, [](auto& p, const auto& x) { return dswaffn(p, "ffn", x[0]); }, s);
       }},
      {"transformer_block",
       [](std::uint64_t s) {
         std::vector<ParamSpec> sp;
         declare_transformer_block(sp, "tr", 8, 2, 16, false);
         return check_block({{8, 4, 4}}, sp, [](auto& p, const auto& x) {
           return transformer_block(p, "tr", x[0], 2, 1e-5);
         }, s);
       }},
      {"gate_fusion",
       [](std::uint64_t s) {
         std::vector<ParamSpec> sp;
         declare_gate_fusion(sp, "fuse", 3, false);
         return check_block({{3, 4, 4}, {3, 4, 4}}, sp, [](auto& p, const auto& x) {
           auto [a, b] = gate_fusion(p, "fuse", x[0], x[1]);
           return concat_channels(a, b);
         }, s);
       }},
      {"sk_fusion",
       [](std::uint64_t s) {
         std::vector<ParamSpec> sp;
         declare_sk_fusion(sp, "fuse", 3);
         return check_block({{3, 4, 4}, {3, 4, 4}}, sp, [](auto& p, const auto& x) {
           return sk_fusion(p, "fuse", x[0], x[1]).first;
         }, s);
       }},
      {"sandformer",
       [](std::uint64_t s) {
         const ModelConfig cfg = tiny_network();
         return check_block({{3, 8, 8}}, declare_model(cfg), [cfg](auto& p, const auto& x) {
           return sandformer_forward(p, cfg, x[0]);
         }, s);
       }},
  };
  return blocks;
}

}  // namespace

std::vector<std::string> gradcheck_suite_blocks() {
  std::vector<std::string> names;
  for (const auto& b : registry()) names.push_back(b.first);
  return names;
}

SuiteRow run_gradcheck_block(const std::string& block, std::uint64_t seed, int instances) {
  for (const auto& [name, fn] : registry()) {
    if (name != block) continue;
    SuiteRow row{name, {}, instances};
    for (int i = 0; i < instances; ++i) row.result.merge(fn(mix64(seed + 0x9e37ULL * (i + 1))));
    return row;
  }
  fail(ErrorCode::kInvalidArgument, "unknown gradcheck block '" + block + "'");
}

std::vector<SuiteRow> run_gradcheck_suite(std::uint64_t seed, int instances,
                                          const std::function<void(const SuiteRow&)>& progress) {
  std::vector<SuiteRow> rows;
  for (const auto& name : gradcheck_suite_blocks()) {
    rows.push_back(run_gradcheck_block(name, seed, instances));
    if (progress) progress(rows.back());
  }
  return rows;
}

}  // namespace sf
