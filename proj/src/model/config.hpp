#pragma once

#include <string>
#include <vector>

#include "common/options.hpp"

namespace sf {

enum class FusionKind { kGate, kSk, kAdd, kNone };
enum class Branches { kBoth, kCnn, kTransformer };

const char* fusion_name(FusionKind k);
FusionKind parse_fusion(const std::string& s);
const char* branches_name(Branches b);
Branches parse_branches(const std::string& s);

struct ModelConfig {
  int base_channels = 16;
  int stages = 2;
  /// One entry per stage; a single entry applies to every stage.
  std::vector<int> heads{1};
  double ffn_expansion = 2.0;
  FusionKind fusion = FusionKind::kGate;
  Branches branches = Branches::kBoth;
  bool downsample = true;
  /// Zero-initialise block-final projections so the fresh network is the identity.
  bool zero_init = true;
  double ln_eps = 1e-5;

  int heads_at(int stage) const;
  /// Channel width of both branches after `stage` (0-based) has run.
  int stage_channels(int stage) const;
  int ffn_hidden(int channels) const;
  /// Input height/width must be a multiple of this.
  int size_multiple() const;

  bool has_cnn() const { return branches != Branches::kTransformer; }
  bool has_transformer() const { return branches != Branches::kCnn; }

  /// Throws a config error listing every violated invariant.
  void validate() const;

  /// Keys: base_channels, stages, heads, ffn_expansion, fusion, branches, downsample.
  static ModelConfig from_options(const Options& opts, const ModelConfig& defaults);
  static ModelConfig from_options(const Options& opts);
  Options to_options() const;
  /// Stable text form used as the checkpoint config echo.
  std::string canonical() const;
  /// Stages 4, C0 32, heads 1,2,4,8.
  static ModelConfig paper_preset();
};

}  // namespace sf
