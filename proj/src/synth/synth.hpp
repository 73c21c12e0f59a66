#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "common/options.hpp"
#include "common/rng.hpp"
#include "image/image.hpp"

namespace sf {

enum class Severity { kDust, kSand, kSandstorm };

const char* severity_name(Severity s);
Severity parse_severity(const std::string& name);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Sampling ranges of one severity preset.
struct PresetRanges {
  Interval beta;
  Interval k1;
  Interval k2;
};

/// Sand airlight: A = (A_R, k1*A_R + b1, k2*A_R + b2).
struct AirlightParams {
  float a_r = 0.0f;
  float k1 = 1.0f;
  float k2 = 1.0f;
  float b1 = 0.0f;
  float b2 = 0.0f;

  std::array<float, 3> rgb() const;
  /// Both derived channels in [0,1] and A_R >= A_G >= A_B.
  bool valid() const;
};

struct DepthMode {
  enum class Kind { kConstant, kVerticalRamp, kFile };
  Kind kind = Kind::kVerticalRamp;
  double depth = 1.0;  // constant mode
  double d_min = 0.5;
  double d_max = 3.0;
  std::string path;    // file mode

  /// "constant:D", "ramp:DMIN:DMAX" or "file:PATH:DMIN:DMAX".
  static DepthMode parse(const std::string& text);
  std::string describe() const;
};

struct SynthConfig {
  Interval a_r{0.7, 0.95};
  Interval b{-0.02, 0.02};
  std::map<Severity, PresetRanges> presets;
  DepthMode depth;

  static SynthConfig defaults();
  /// Overrides from keys ar_range, b_range, {dust,sand,sandstorm}_{beta,k1,k2}, depth_mode.
  void apply(const Options& opts);
  const PresetRanges& preset(Severity s) const;
};

/// Draws (a_r, k1, k2, b1, b2) from the preset until the sand ordering and
/// [0,1] bounds hold; configuration error after 1000 rejected draws.
AirlightParams sample_airlight(CounterRng& rng, const PresetRanges& preset, const SynthConfig& cfg);

FloatMap make_depth(const DepthMode& mode, int width, int height);

/// t = exp(-beta * depth), elementwise.
FloatMap transmission_map(const FloatMap& depth, double beta);

/// I = J t + A (1 - t) per channel, clamped to [0,1].
ImageBuffer degrade(const ImageBuffer& clean, const std::array<float, 3>& airlight,
                    const FloatMap& transmission);

struct SynthSample {
  ImageBuffer clean;
  ImageBuffer degraded;
  FloatMap transmission;
  AirlightParams airlight;
  float beta = 0.0f;
  Severity severity = Severity::kDust;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
};

/// Regenerates one sample from (global seed, sample index); independent of
/// the order in which samples are produced.
SynthSample synthesize_sample(const ImageBuffer& clean, Severity severity, const SynthConfig& cfg,
                              std::uint64_t seed, std::uint64_t index);

struct ManifestRow {
  std::string id;
  std::string source;
  Severity severity = Severity::kDust;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  AirlightParams airlight;
  std::array<float, 3> rgb{};
  float beta = 0.0f;
  std::string depth_mode;
  std::string degraded;      // relative to the manifest directory
  std::string clean;
  std::string transmission;
};

struct Manifest {
  std::vector<ManifestRow> rows;
  int skipped = 0;
  std::string directory;  // directory holding the manifest; row paths resolve against it

  std::string resolve(const std::string& relative) const;
};

/// Rebuilds a sample from a manifest row and its clean source image alone.
SynthSample regenerate_sample(const ManifestRow& row, const ImageBuffer& clean);

/// Tab-separated text: header row, one row per sample, then a footer line
/// "#footer\trows=N\tskipped=K\tcrc32=XXXXXXXX" whose CRC covers all preceding bytes.
std::string format_manifest(const Manifest& m);
Manifest parse_manifest(const std::string& text, const std::string& directory);
Manifest read_manifest(const std::string& path);

using LogFn = std::function<void(const std::string&)>;

/// Writes degraded/, clean/, transmission/ and manifest.tsv under out_dir.
Manifest synthesize_dataset(const std::string& clean_dir, const std::string& out_dir,
                            const std::vector<Severity>& presets, int per_image,
                            std::uint64_t seed, const SynthConfig& cfg, const LogFn& log);

}  // namespace sf
