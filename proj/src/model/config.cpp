#include "model/config.hpp"

#include <cmath>
#include <cstdio>

#include "common/error.hpp"

namespace sf {

const char* fusion_name(FusionKind k) {
  switch (k) {
    case FusionKind::kGate: return "gate";
    case FusionKind::kSk: return "sk";
    case FusionKind::kAdd: return "add";
    case FusionKind::kNone: return "none";
  }
  return "?";
}

FusionKind parse_fusion(const std::string& s) {
  if (s == "gate") return FusionKind::kGate;
  if (s == "sk") return FusionKind::kSk;
  if (s == "add") return FusionKind::kAdd;
  if (s == "none") return FusionKind::kNone;
  fail(ErrorCode::kConfig, "unknown fusion '" + s + "' (gate, sk, add, none)");
}

const char* branches_name(Branches b) {
  switch (b) {
    case Branches::kBoth: return "both";
    case Branches::kCnn: return "cnn";
    case Branches::kTransformer: return "transformer";
  }
  return "?";
}

Branches parse_branches(const std::string& s) {
  if (s == "both") return Branches::kBoth;
  if (s == "cnn") return Branches::kCnn;
  if (s == "transformer") return Branches::kTransformer;
  fail(ErrorCode::kConfig, "unknown branches '" + s + "' (both, cnn, transformer)");
}

int ModelConfig::heads_at(int stage) const {
  if (heads.size() == 1) return heads[0];
  return heads.at(static_cast<std::size_t>(stage));
}

int ModelConfig::stage_channels(int stage) const {
  return downsample ? base_channels << (stage + 1) : base_channels;
}

int ModelConfig::ffn_hidden(int channels) const {
  return static_cast<int>(std::lround(ffn_expansion * channels));
}

int ModelConfig::size_multiple() const { return downsample ? 1 << stages : 1; }

void ModelConfig::validate() const {
  std::vector<std::string> bad;
  if (base_channels < 2 || base_channels % 2 != 0)
    bad.push_back("base_channels must be even and >= 2 (got " + std::to_string(base_channels) + ")");
  if (stages < 1 || stages > 8) bad.push_back("stages must be in [1,8] (got " + std::to_string(stages) + ")");
  const bool heads_shape_ok =
      !heads.empty() && (heads.size() == 1 || static_cast<int>(heads.size()) == stages);
  if (!heads_shape_ok)
    bad.push_back("heads needs one value or one per stage (" + std::to_string(stages) + ")");
  if (!(ffn_expansion > 0.0)) bad.push_back("ffn_expansion must be positive");
  if (!(ln_eps > 0.0)) bad.push_back("ln_eps must be positive");
  if (fusion == FusionKind::kNone && branches == Branches::kBoth)
    bad.push_back("fusion=none needs a single branch (branches=cnn or branches=transformer)");
  if (fusion != FusionKind::kNone && branches != Branches::kBoth)
    bad.push_back(std::string("fusion=") + fusion_name(fusion) + " needs branches=both");
  if (heads_shape_ok && base_channels >= 2 && stages >= 1 && stages <= 8) {
    for (int s = 0; s < stages; ++s) {
      const int h = heads_at(s), c = stage_channels(s);
      if (h < 1 || c % h != 0)
        bad.push_back("heads " + std::to_string(h) + " must divide stage " + std::to_string(s) +
                      " channel count " + std::to_string(c));
      else if (ffn_expansion > 0.0 && ffn_hidden(c) < 1)
        bad.push_back("ffn_expansion too small for " + std::to_string(c) + " channels");
    }
  }
  if (bad.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& b : bad) msg += "\n  - " + b;
  fail(ErrorCode::kConfig, msg);
}

ModelConfig ModelConfig::from_options(const Options& o, const ModelConfig& d) {
  ModelConfig c = d;
  c.base_channels = static_cast<int>(o.get_int("base_channels", d.base_channels));
  c.stages = static_cast<int>(o.get_int("stages", d.stages));
  if (o.has("heads")) {
    c.heads.clear();
    for (const auto& part : split(o.get_string("heads", ""), ',')) {
      Options one;
      one.set("heads", trim(part));
      c.heads.push_back(static_cast<int>(one.get_int("heads", 0)));
    }
  }
  c.ffn_expansion = o.get_double("ffn_expansion", d.ffn_expansion);
  if (o.has("fusion")) c.fusion = parse_fusion(o.get_string("fusion", ""));
  if (o.has("branches")) c.branches = parse_branches(o.get_string("branches", ""));
  c.downsample = o.get_bool("downsample", d.downsample);
  c.validate();
  return c;
}

ModelConfig ModelConfig::from_options(const Options& o) { return from_options(o, ModelConfig{}); }

Options ModelConfig::to_options() const {
  Options o;
  o.set("base_channels", std::to_string(base_channels));
  o.set("stages", std::to_string(stages));
  std::string h;
  for (std::size_t i = 0; i < heads.size(); ++i) h += (i ? "," : "") + std::to_string(heads[i]);
  o.set("heads", h);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", ffn_expansion);
  o.set("ffn_expansion", buf);
  o.set("fusion", fusion_name(fusion));
  o.set("branches", branches_name(branches));
  o.set("downsample", downsample ? "true" : "false");
  return o;
}

std::string ModelConfig::canonical() const { return to_options().canonical(); }

ModelConfig ModelConfig::paper_preset() {
  ModelConfig c;
  c.base_channels = 32;
  c.stages = 4;
  c.heads = {1, 2, 4, 8};
  return c;
}

}  // namespace sf
