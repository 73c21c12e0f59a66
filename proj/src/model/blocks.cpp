#include "model/blocks.hpp"

namespace sf {

void declare_conv(std::vector<ParamSpec>& out, const std::string& name, int cin, int cout, int k,
                  int groups, bool zero) {
  out.push_back({name + ".weight", {cout, cin / groups, k, k}, zero ? InitKind::kZero : InitKind::kKaiming});
  out.push_back({name + ".bias", {cout}, InitKind::kZero});
}

void declare_cnn_block(std::vector<ParamSpec>& out, const std::string& prefix, int c,
                       bool downsample, bool zero_init) {
  const int co = downsample ? 2 * c : c;
  if (downsample) declare_conv(out, prefix + ".down", c, co, 3, 1, false);
  declare_conv(out, prefix + ".pa.expand", co, 2 * co, 1, 1, false);
  declare_conv(out, prefix + ".pa.dw", 2 * co, 2 * co, 1, 2 * co, false);
  declare_conv(out, prefix + ".pb.expand", co, 2 * co, 1, 1, false);
  declare_conv(out, prefix + ".pb.dw", 2 * co, 2 * co, 3, 2 * co, false);
  out.push_back({prefix + ".ca.weight", {co, co, 1, 1}, InitKind::kKaiming});
  out.push_back({prefix + ".ca.bias", {co}, InitKind::kOne});
  declare_conv(out, prefix + ".proj", co, co, 1, 1, zero_init);
}

void declare_mdta(std::vector<ParamSpec>& out, const std::string& prefix, int c, int heads,
                  bool zero_init) {
  declare_conv(out, prefix + ".qkv", c, 3 * c, 1, 1, false);
  declare_conv(out, prefix + ".qkv_dw", 3 * c, 3 * c, 3, 3 * c, false);
  out.push_back({prefix + ".temperature", {heads}, InitKind::kOne});
  declare_conv(out, prefix + ".proj", c, c, 1, 1, zero_init);
}

void declare_dswaffn(std::vector<ParamSpec>& out, const std::string& prefix, int c, int hidden,
                     bool zero_init) {
  declare_conv(out, prefix + ".expand", c, hidden, 1, 1, false);
  declare_conv(out, prefix + ".dw1", hidden, hidden, 1, hidden, false);
  declare_conv(out, prefix + ".dw3", hidden, hidden, 3, hidden, false);
  declare_conv(out, prefix + ".proj", hidden, c, 1, 1, zero_init);
}

void declare_transformer_block(std::vector<ParamSpec>& out, const std::string& prefix, int c,
                               int heads, int hidden, bool zero_init) {
  out.push_back({prefix + ".ln1.gamma", {c}, InitKind::kOne});
  out.push_back({prefix + ".ln1.beta", {c}, InitKind::kZero});
  declare_mdta(out, prefix + ".attn", c, heads, zero_init);
  out.push_back({prefix + ".ln2.gamma", {c}, InitKind::kOne});
  out.push_back({prefix + ".ln2.beta", {c}, InitKind::kZero});
  declare_dswaffn(out, prefix + ".ffn", c, hidden, zero_init);
}

void declare_gate_fusion(std::vector<ParamSpec>& out, const std::string& prefix, int c,
                         bool zero_init) {
  declare_conv(out, prefix + ".conv1", 2 * c, 4 * c, 3, 1, false);
  declare_conv(out, prefix + ".conv2", 2 * c, 2 * c, 3, 1, false);
  declare_conv(out, prefix + ".mix", 2 * c, 2 * c, 1, 1, zero_init);
}

void declare_sk_fusion(std::vector<ParamSpec>& out, const std::string& prefix, int c) {
  declare_conv(out, prefix + ".fc", c, 2 * c, 1, 1, false);
}

template <class T>
Var<T> simple_gate(const Var<T>& x) {
  require(x.shape().size() == 3 && x.shape()[0] % 2 == 0, ErrorCode::kInvalidArgument,
          "simple_gate needs an even channel count, got " + shape_str(x.shape()));
  auto h = split_channels(x, 2);
  return mul(h[0], h[1]);
}

template <class T>
Var<T> channel_attention(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  return channel_scale(x, conv2d(global_avg_pool(x), w, b, 1, 0, 1));
}

template <class T>
Var<T> conv_layer(ParamBinder<T>& p, const std::string& name, const Var<T>& x, int stride,
                  int padding, int groups) {
  return conv2d(x, p(name + ".weight"), p(name + ".bias"), stride, padding, groups);
}

template <class T>
Var<T> cnn_block(ParamBinder<T>& p, const std::string& prefix, const Var<T>& x, bool downsample) {
  Var<T> h = x;
  if (downsample) {
    require(x.shape()[1] % 2 == 0 && x.shape()[2] % 2 == 0, ErrorCode::kInvalidArgument,
            "cnn block downsampling needs even height and width, got " + shape_str(x.shape()));
    h = conv_layer(p, prefix + ".down", x, 2, 1, 1);
  }
  const int c2 = 2 * h.shape()[0];
  Var<T> a = simple_gate(conv_layer(p, prefix + ".pa.dw", conv_layer(p, prefix + ".pa.expand", h, 1, 0, 1), 1, 0, c2));
  Var<T> b = simple_gate(conv_layer(p, prefix + ".pb.dw", conv_layer(p, prefix + ".pb.expand", h, 1, 0, 1), 1, 1, c2));
  Var<T> s = channel_attention(add(a, b), p(prefix + ".ca.weight"), p(prefix + ".ca.bias"));
  return add(h, conv_layer(p, prefix + ".proj", s, 1, 0, 1));
}

template <class T>
Var<T> mdta(ParamBinder<T>& p, const std::string& prefix, const Var<T>& x, int heads,
            std::vector<Var<T>>* attention) {
  const Shape& s = x.shape();
  const int c = s[0], hh = s[1], ww = s[2];
  require(heads >= 1 && c % heads == 0, ErrorCode::kInvalidArgument,
          "mdta: " + std::to_string(heads) + " heads do not divide " + std::to_string(c) + " channels");
  Var<T> qkv = conv_layer(p, prefix + ".qkv_dw", conv_layer(p, prefix + ".qkv", x, 1, 0, 1), 1, 1, 3 * c);
  auto parts = split_channels(qkv, 3);
  auto q = split_channels(parts[0], heads);
  auto k = split_channels(parts[1], heads);
  auto v = split_channels(parts[2], heads);
  auto temp = split_channels(p(prefix + ".temperature"), heads);
  const int ch = c / heads;
  std::vector<Var<T>> outs;
  for (int h = 0; h < heads; ++h) {
    Var<T> qr = normalize_rows(reshape(q[h], {ch, hh * ww}), 1e-12);
    Var<T> kr = normalize_rows(reshape(k[h], {ch, hh * ww}), 1e-12);
    Var<T> attn = softmax(scalar_mul(matmul(qr, transpose2d(kr)), temp[h]), 1);
    if (attention) attention->push_back(attn);
    outs.push_back(reshape(matmul(attn, reshape(v[h], {ch, hh * ww})), {ch, hh, ww}));
  }
  Var<T> merged = heads == 1 ? outs[0] : concat_channels<T>(outs);
  return conv_layer(p, prefix + ".proj", merged, 1, 0, 1);
}

template <class T>
Var<T> dswaffn_delta(const DswaffnParts<T>& w, const Var<T>& x, DswaffnTrace<T>* trace) {
  Var<T> ua = conv2d(x, w.expand_a_w, w.expand_a_b, 1, 0, 1);
  Var<T> ub = conv2d(x, w.expand_b_w, w.expand_b_b, 1, 0, 1);
  const int hidden = ua.shape()[0];
  Var<T> p1 = conv2d(ua, w.dw1_w, w.dw1_b, 1, 0, hidden);
  Var<T> p3 = conv2d(ub, w.dw3_w, w.dw3_b, 1, 1, hidden);
  if (trace) *trace = {p1, p3};
  Var<T> m = add(mul(sigmoid(p1), p3), mul(sigmoid(p3), p1));
  return conv2d(m, w.proj_w, w.proj_b, 1, 0, 1);
}

template <class T>
DswaffnParts<T> dswaffn_parts(ParamBinder<T>& p, const std::string& prefix) {
  Var<T> ew = p(prefix + ".expand.weight"), eb = p(prefix + ".expand.bias");
  return {ew, eb, ew, eb,
          p(prefix + ".dw1.weight"), p(prefix + ".dw1.bias"),
          p(prefix + ".dw3.weight"), p(prefix + ".dw3.bias"),
          p(prefix + ".proj.weight"), p(prefix + ".proj.bias")};
}

template <class T>
Var<T> dswaffn(ParamBinder<T>& p, const std::string& prefix, const Var<T>& x, DswaffnTrace<T>* trace) {
  return add(x, dswaffn_delta(dswaffn_parts(p, prefix), x, trace));
}

template <class T>
Var<T> transformer_block(ParamBinder<T>& p, const std::string& prefix, const Var<T>& x, int heads,
                         double ln_eps) {
  Var<T> n1 = layer_norm(x, p(prefix + ".ln1.gamma"), p(prefix + ".ln1.beta"), ln_eps);
  Var<T> y = add(x, mdta(p, prefix + ".attn", n1, heads));
  Var<T> n2 = layer_norm(y, p(prefix + ".ln2.gamma"), p(prefix + ".ln2.beta"), ln_eps);
  return add(y, dswaffn_delta(dswaffn_parts(p, prefix + ".ffn"), n2));
}

static void require_same(const Shape& a, const Shape& b, const char* what) {
  require(a == b, ErrorCode::kInvalidArgument,
          std::string(what) + ": branch shapes differ " + shape_str(a) + " vs " + shape_str(b));
}

template <class T>
std::pair<Var<T>, Var<T>> gate_fusion(ParamBinder<T>& p, const std::string& prefix,
                                      const Var<T>& f_cnn, const Var<T>& f_tr) {
  require_same(f_cnn.shape(), f_tr.shape(), "gate_fusion");
  Var<T> g = concat_channels(f_cnn, f_tr);
  Var<T> r = conv_layer(p, prefix + ".conv1", g, 1, 1, 1);
  r = conv_layer(p, prefix + ".conv2", simple_gate(r), 1, 1, 1);
  r = add(r, g);
  auto d = split_channels(conv_layer(p, prefix + ".mix", r, 1, 0, 1), 2);
  return {add(f_cnn, d[0]), add(f_tr, d[1])};
}

template <class T>
std::pair<Var<T>, Var<T>> sk_fusion(ParamBinder<T>& p, const std::string& prefix,
                                    const Var<T>& f_cnn, const Var<T>& f_tr) {
  require_same(f_cnn.shape(), f_tr.shape(), "sk_fusion");
  const int c = f_cnn.shape()[0];
  Var<T> logits = conv_layer(p, prefix + ".fc", global_avg_pool(add(f_cnn, f_tr)), 1, 0, 1);
  auto w = split_channels(softmax(reshape(logits, {2, c}), 0), 2);
  Var<T> fused = add(channel_scale(f_cnn, reshape(w[0], {c, 1, 1})),
                     channel_scale(f_tr, reshape(w[1], {c, 1, 1})));
  return {fused, fused};
}

template <class T>
std::pair<Var<T>, Var<T>> add_fusion(const Var<T>& f_cnn, const Var<T>& f_tr) {
  require_same(f_cnn.shape(), f_tr.shape(), "add_fusion");
  Var<T> s = add(f_cnn, f_tr);
  return {s, s};
}

#define SF_INSTANTIATE_BLOCKS(T)                                                                \
  template Var<T> simple_gate(const Var<T>&);                                                   \
  template Var<T> channel_attention(const Var<T>&, const Var<T>&, const Var<T>&);               \
  template Var<T> conv_layer(ParamBinder<T>&, const std::string&, const Var<T>&, int, int, int); \
  template Var<T> cnn_block(ParamBinder<T>&, const std::string&, const Var<T>&, bool);          \
  template Var<T> mdta(ParamBinder<T>&, const std::string&, const Var<T>&, int,                 \
                       std::vector<Var<T>>*);                                                   \
  template Var<T> dswaffn_delta(const DswaffnParts<T>&, const Var<T>&, DswaffnTrace<T>*);       \
  template DswaffnParts<T> dswaffn_parts(ParamBinder<T>&, const std::string&);                  \
  template Var<T> dswaffn(ParamBinder<T>&, const std::string&, const Var<T>&, DswaffnTrace<T>*); \
  template Var<T> transformer_block(ParamBinder<T>&, const std::string&, const Var<T>&, int,     \
                                    double);                                                    \
  template std::pair<Var<T>, Var<T>> gate_fusion(ParamBinder<T>&, const std::string&,           \
                                                 const Var<T>&, const Var<T>&);                 \
  template std::pair<Var<T>, Var<T>> sk_fusion(ParamBinder<T>&, const std::string&,             \
                                               const Var<T>&, const Var<T>&);                   \
  template std::pair<Var<T>, Var<T>> add_fusion(const Var<T>&, const Var<T>&);

SF_INSTANTIATE_BLOCKS(float)
SF_INSTANTIATE_BLOCKS(double)

}  // namespace sf
