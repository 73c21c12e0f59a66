#pragma once

#include <string>
#include <utility>
#include <vector>

#include "model/config.hpp"
#include "model/params.hpp"
#include "tensor/ops.hpp"

namespace sf {

// Parameter declarations. Names are "<prefix>.<layer>.weight|bias"; shapes
// follow conv2d's [Cout, Cin/groups, k, k].

void declare_conv(std::vector<ParamSpec>& out, const std::string& name, int cin, int cout, int k,
                  int groups, bool zero);
void declare_cnn_block(std::vector<ParamSpec>& out, const std::string& prefix, int channels,
                       bool downsample, bool zero_init);
void declare_mdta(std::vector<ParamSpec>& out, const std::string& prefix, int channels, int heads,
                  bool zero_init);
void declare_dswaffn(std::vector<ParamSpec>& out, const std::string& prefix, int channels,
                     int hidden, bool zero_init);
void declare_transformer_block(std::vector<ParamSpec>& out, const std::string& prefix,
                               int channels, int heads, int hidden, bool zero_init);
void declare_gate_fusion(std::vector<ParamSpec>& out, const std::string& prefix, int channels,
                         bool zero_init);
void declare_sk_fusion(std::vector<ParamSpec>& out, const std::string& prefix, int channels);

// Forward functions. `p` resolves parameter names to tape vars.

/// Splits channels in half and multiplies the halves.
template <class T>
Var<T> simple_gate(const Var<T>& x);

/// x scaled per channel by conv1x1(global_avg_pool(x)); no squashing.
template <class T>
Var<T> channel_attention(const Var<T>& x, const Var<T>& w, const Var<T>& b);

template <class T>
Var<T> conv_layer(ParamBinder<T>& p, const std::string& name, const Var<T>& x, int stride,
                  int padding, int groups);

template <class T>
Var<T> cnn_block(ParamBinder<T>& p, const std::string& prefix, const Var<T>& x, bool downsample);

/// Transposed (channel) attention without residual. When `attention` is given,
/// the per-head softmax maps are appended to it.
template <class T>
Var<T> mdta(ParamBinder<T>& p, const std::string& prefix, const Var<T>& x, int heads,
            std::vector<Var<T>>* attention = nullptr);

/// Dual-path FFN residual delta: the k=1 and k=3 depthwise paths each expand
/// x with their own weight var. Passing the same var twice is the shared form.
template <class T>
struct DswaffnParts {
  Var<T> expand_a_w, expand_a_b, expand_b_w, expand_b_b;
  Var<T> dw1_w, dw1_b, dw3_w, dw3_b;
  Var<T> proj_w, proj_b;
};

template <class T>
struct DswaffnTrace {
  Var<T> path1, path3;
};

template <class T>
Var<T> dswaffn_delta(const DswaffnParts<T>& w, const Var<T>& x, DswaffnTrace<T>* trace = nullptr);

/// Shared-weight parts looked up under `prefix` (one expansion weight).
template <class T>
DswaffnParts<T> dswaffn_parts(ParamBinder<T>& p, const std::string& prefix);

/// x + dswaffn_delta(x).
template <class T>
Var<T> dswaffn(ParamBinder<T>& p, const std::string& prefix, const Var<T>& x,
               DswaffnTrace<T>* trace = nullptr);

/// y = x + mdta(LN1(x)); z = y + dswaffn_delta(LN2(y)).
template <class T>
Var<T> transformer_block(ParamBinder<T>& p, const std::string& prefix, const Var<T>& x, int heads,
                         double ln_eps);

template <class T>
std::pair<Var<T>, Var<T>> gate_fusion(ParamBinder<T>& p, const std::string& prefix,
                                      const Var<T>& f_cnn, const Var<T>& f_tr);

template <class T>
std::pair<Var<T>, Var<T>> sk_fusion(ParamBinder<T>& p, const std::string& prefix,
                                    const Var<T>& f_cnn, const Var<T>& f_tr);

/// Both outputs are f_cnn + f_tr.
template <class T>
std::pair<Var<T>, Var<T>> add_fusion(const Var<T>& f_cnn, const Var<T>& f_tr);

}  // namespace sf
