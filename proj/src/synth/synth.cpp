#include "synth/synth.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "common/crc32.hpp"

namespace fs = std::filesystem;

namespace sf {

const char* severity_name(Severity s) {
  switch (s) {
    case Severity::kDust: return "dust";
    case Severity::kSand: return "sand";
    case Severity::kSandstorm: return "sandstorm";
  }
  return "?";
}

Severity parse_severity(const std::string& name) {
  if (name == "dust") return Severity::kDust;
  if (name == "sand") return Severity::kSand;
  if (name == "sandstorm") return Severity::kSandstorm;
  fail(ErrorCode::kConfig, "unknown severity preset '" + name + "' (dust, sand, sandstorm)");
}

std::array<float, 3> AirlightParams::rgb() const {
  return {a_r, k1 * a_r + b1, k2 * a_r + b2};
}

bool AirlightParams::valid() const {
  const auto a = rgb();
  for (float v : a)
    if (!(v >= 0.0f && v <= 1.0f)) return false;
  return a[0] >= a[1] && a[1] >= a[2];
}

DepthMode DepthMode::parse(const std::string& text) {
  const auto parts = split(text, ':');
  DepthMode m;
  auto num = [&](std::size_t i) {
    try {
      std::size_t used = 0;
      const double v = std::stod(parts.at(i), &used);
      if (used != parts.at(i).size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(ErrorCode::kConfig, "malformed depth_mode '" + text + "'");
    }
  };
  if (parts[0] == "constant" && parts.size() == 2) {
    m.kind = Kind::kConstant;
    m.depth = num(1);
    require(m.depth >= 0, ErrorCode::kConfig, "depth must be non-negative");
  } else if (parts[0] == "ramp" && parts.size() == 3) {
    m.kind = Kind::kVerticalRamp;
    m.d_min = num(1);
    m.d_max = num(2);
  } else if (parts[0] == "file" && parts.size() == 4) {
    m.kind = Kind::kFile;
    m.path = parts[1];
    m.d_min = num(2);
    m.d_max = num(3);
  } else {
    fail(ErrorCode::kConfig, "malformed depth_mode '" + text +
                                 "' (constant:D | ramp:DMIN:DMAX | file:PATH:DMIN:DMAX)");
  }
  if (m.kind != Kind::kConstant)
    require(m.d_min >= 0 && m.d_min <= m.d_max, ErrorCode::kConfig,
            "depth range must satisfy 0 <= d_min <= d_max");
  return m;
}

static std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string DepthMode::describe() const {
  switch (kind) {
    case Kind::kConstant: return "constant:" + fmt_g(depth);
    case Kind::kVerticalRamp: return "ramp:" + fmt_g(d_min) + ":" + fmt_g(d_max);
    case Kind::kFile: return "file:" + path + ":" + fmt_g(d_min) + ":" + fmt_g(d_max);
  }
  return "";
}

SynthConfig SynthConfig::defaults() {
  SynthConfig c;
  c.presets[Severity::kDust] = {{0.4, 0.8}, {0.85, 0.95}, {0.65, 0.85}};
  c.presets[Severity::kSand] = {{0.8, 1.5}, {0.75, 0.9}, {0.5, 0.75}};
  c.presets[Severity::kSandstorm] = {{1.5, 3.0}, {0.65, 0.85}, {0.35, 0.6}};
  return c;
}

void SynthConfig::apply(const Options& opts) {
  auto range = [&](const std::string& key, Interval& iv) {
    auto r = opts.get_range(key, {iv.lo, iv.hi});
    iv = {r.first, r.second};
  };
  range("ar_range", a_r);
  range("b_range", b);
  for (auto& [sev, p] : presets) {
    const std::string n = severity_name(sev);
    range(n + "_beta", p.beta);
    range(n + "_k1", p.k1);
    range(n + "_k2", p.k2);
  }
  if (opts.has("depth_mode")) depth = DepthMode::parse(opts.get_string("depth_mode", ""));
}

const PresetRanges& SynthConfig::preset(Severity s) const {
  auto it = presets.find(s);
  require(it != presets.end(), ErrorCode::kConfig,
          std::string("no ranges configured for preset ") + severity_name(s));
  return it->second;
}

AirlightParams sample_airlight(CounterRng& rng, const PresetRanges& preset, const SynthConfig& cfg) {
  auto draw = [&](const Interval& iv) {
    return rng.uniform(static_cast<float>(iv.lo), static_cast<float>(iv.hi));
  };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    AirlightParams p;
    p.a_r = draw(cfg.a_r);
    p.k1 = draw(preset.k1);
    p.k2 = draw(preset.k2);
    p.b1 = draw(cfg.b);
    p.b2 = draw(cfg.b);
    if (p.valid()) return p;
  }
  fail(ErrorCode::kConfig,
       "airlight ranges cannot satisfy A_R >= A_G >= A_B within [0,1] (1000 draws rejected)");
}

FloatMap make_depth(const DepthMode& mode, int width, int height) {
  FloatMap d(width, height);
  switch (mode.kind) {
    case DepthMode::Kind::kConstant:
      std::fill(d.data.begin(), d.data.end(), static_cast<float>(mode.depth));
      break;
    case DepthMode::Kind::kVerticalRamp:
      // sky-far: top row is d_max, bottom row d_min
      for (int y = 0; y < height; ++y) {
        const double f = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
        const auto v = static_cast<float>(mode.d_max + (mode.d_min - mode.d_max) * f);
        for (int x = 0; x < width; ++x) d.at(y, x) = v;
      }
      break;
    case DepthMode::Kind::kFile: {
      FloatMap g = load_gray(mode.path);
      require(g.width == width && g.height == height, ErrorCode::kInvalidArgument,
              "depth file " + mode.path + " is " + std::to_string(g.width) + "x" +
                  std::to_string(g.height) + ", image is " + std::to_string(width) + "x" +
                  std::to_string(height));
      for (std::size_t i = 0; i < d.data.size(); ++i)
        d.data[i] = static_cast<float>(mode.d_min + (mode.d_max - mode.d_min) * g.data[i]);
      break;
    }
  }
  return d;
}

FloatMap transmission_map(const FloatMap& depth, double beta) {
  require(beta >= 0, ErrorCode::kInvalidArgument, "beta must be non-negative");
  FloatMap t(depth.width, depth.height);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    require(depth.data[i] >= 0, ErrorCode::kInvalidArgument, "depth must be non-negative");
    t.data[i] = static_cast<float>(std::exp(-beta * static_cast<double>(depth.data[i])));
  }
  return t;
}

ImageBuffer degrade(const ImageBuffer& clean, const std::array<float, 3>& airlight,
                    const FloatMap& t) {
  require(clean.width() == t.width && clean.height() == t.height, ErrorCode::kInvalidArgument,
          "degrade: image " + std::to_string(clean.width()) + "x" + std::to_string(clean.height()) +
              " vs transmission " + std::to_string(t.width) + "x" + std::to_string(t.height));
  ImageBuffer out(clean.width(), clean.height());
  for (int y = 0; y < clean.height(); ++y)
    for (int x = 0; x < clean.width(); ++x) {
      const double tv = t.at(y, x);
      for (int c = 0; c < 3; ++c) {
        // A + (J - A) t evaluated in double: exact at t = 1 and monotone in t
        const double a = airlight[c];
        const double v = a + (static_cast<double>(clean.at(y, x, c)) - a) * tv;
        out.at(y, x, c) = std::clamp(static_cast<float>(v), 0.0f, 1.0f);
      }
    }
  return out;
}

SynthSample synthesize_sample(const ImageBuffer& clean, Severity severity, const SynthConfig& cfg,
                              std::uint64_t seed, std::uint64_t index) {
  CounterRng rng(seed, index);
  SynthSample s;
  s.severity = severity;
  s.seed = seed;
  s.index = index;
  const PresetRanges& p = cfg.preset(severity);
  s.airlight = sample_airlight(rng, p, cfg);
  s.beta = rng.uniform(static_cast<float>(p.beta.lo), static_cast<float>(p.beta.hi));
  s.clean = clean;
  s.transmission = transmission_map(make_depth(cfg.depth, clean.width(), clean.height()), s.beta);
  s.degraded = degrade(clean, s.airlight.rgb(), s.transmission);
  return s;
}

SynthSample regenerate_sample(const ManifestRow& row, const ImageBuffer& clean) {
  SynthSample s;
  s.severity = row.severity;
  s.seed = row.seed;
  s.index = row.index;
  s.airlight = row.airlight;
  s.beta = row.beta;
  s.clean = clean;
  s.transmission = transmission_map(
      make_depth(DepthMode::parse(row.depth_mode), clean.width(), clean.height()), row.beta);
  s.degraded = degrade(clean, row.airlight.rgb(), s.transmission);
  return s;
}

std::string Manifest::resolve(const std::string& relative) const {
  if (relative.empty() || fs::path(relative).is_absolute() || directory.empty()) return relative;
  return (fs::path(directory) / relative).string();
}

static const char* kManifestHeader =
    "id\tsource\tseverity\tseed\tindex\ta_r\tk1\tk2\tb1\tb2\tA_R\tA_G\tA_B\tbeta\tdepth_mode\t"
    "degraded\tclean\ttransmission";

std::string format_manifest(const Manifest& m) {
  std::ostringstream out;
  out << kManifestHeader << "\n";
  for (const auto& r : m.rows) {
    out << r.id << "\t" << r.source << "\t" << severity_name(r.severity) << "\t" << r.seed << "\t"
        << r.index << "\t" << fmt_g(r.airlight.a_r) << "\t" << fmt_g(r.airlight.k1) << "\t"
        << fmt_g(r.airlight.k2) << "\t" << fmt_g(r.airlight.b1) << "\t" << fmt_g(r.airlight.b2)
        << "\t" << fmt_g(r.rgb[0]) << "\t" << fmt_g(r.rgb[1]) << "\t" << fmt_g(r.rgb[2]) << "\t"
        << fmt_g(r.beta) << "\t" << r.depth_mode << "\t" << r.degraded << "\t" << r.clean << "\t"
        << r.transmission << "\n";
  }
  std::string body = out.str();
  char footer[128];
  std::snprintf(footer, sizeof footer, "#footer\trows=%zu\tskipped=%d\tcrc32=%08x\n", m.rows.size(),
                m.skipped, crc32(body));
  return body + footer;
}

Manifest parse_manifest(const std::string& text, const std::string& directory) {
  Manifest m;
  m.directory = directory;
  const auto footer_pos = text.rfind("#footer\t");
  require(footer_pos != std::string::npos, ErrorCode::kFormat, "manifest has no footer line");
  const std::string body = text.substr(0, footer_pos);
  const std::string footer = trim(text.substr(footer_pos));
  std::size_t rows = 0;
  unsigned crc = 0;
  require(std::sscanf(footer.c_str(), "#footer\trows=%zu\tskipped=%d\tcrc32=%x", &rows, &m.skipped,
                      &crc) == 3,
          ErrorCode::kFormat, "malformed manifest footer: " + footer);
  require(crc == crc32(body), ErrorCode::kCorruption, "manifest checksum mismatch");

  std::istringstream in(body);
  std::string line;
  require(std::getline(in, line) && line == kManifestHeader, ErrorCode::kFormat,
          "unexpected manifest header");
  auto to_f = [](const std::string& s) { return std::strtof(s.c_str(), nullptr); };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line, '\t');
    require(f.size() == 18, ErrorCode::kFormat, "manifest row has " + std::to_string(f.size()) +
                                                    " fields, expected 18: " + line);
    ManifestRow r;
    r.id = f[0];
    r.source = f[1];
    r.severity = parse_severity(f[2]);
    r.seed = std::stoull(f[3]);
    r.index = std::stoull(f[4]);
    r.airlight = {to_f(f[5]), to_f(f[6]), to_f(f[7]), to_f(f[8]), to_f(f[9])};
    r.rgb = {to_f(f[10]), to_f(f[11]), to_f(f[12])};
    r.beta = to_f(f[13]);
    r.depth_mode = f[14];
    r.degraded = f[15];
    r.clean = f[16];
    r.transmission = f[17];
    m.rows.push_back(std::move(r));
  }
  require(m.rows.size() == rows, ErrorCode::kFormat, "manifest row count disagrees with footer");
  return m;
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open manifest " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), fs::path(path).parent_path().string());
}

static bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm";
}

Manifest synthesize_dataset(const std::string& clean_dir, const std::string& out_dir,
                            const std::vector<Severity>& presets, int per_image,
                            std::uint64_t seed, const SynthConfig& cfg, const LogFn& log) {
  require(per_image >= 1, ErrorCode::kConfig, "per_image must be >= 1");
  require(!presets.empty(), ErrorCode::kConfig, "at least one preset is required");
  require(fs::is_directory(clean_dir), ErrorCode::kIo, "input directory not found: " + clean_dir);
  std::vector<fs::path> sources;
  for (const auto& e : fs::directory_iterator(clean_dir))
    if (e.is_regular_file() && is_image_file(e.path())) sources.push_back(e.path());
  std::sort(sources.begin(), sources.end());
  require(!sources.empty(), ErrorCode::kIo, "no PNG/PPM images in " + clean_dir);

  for (const char* sub : {"degraded", "clean", "transmission"}) fs::create_directories(fs::path(out_dir) / sub);

  Manifest m;
  m.directory = out_dir;
  std::uint64_t index = 0;
  for (const auto& src : sources) {
    ImageBuffer clean;
    try {
      clean = load_image(src.string());
    } catch (const Error& e) {
      if (log) log(std::string("warning: skipping unreadable image: ") + e.what());
      ++m.skipped;
      index += presets.size() * static_cast<std::size_t>(per_image);
      continue;
    }
    for (Severity sev : presets) {
      for (int k = 0; k < per_image; ++k, ++index) {
        SynthSample s = synthesize_sample(clean, sev, cfg, seed, index);
        char id[32];
        std::snprintf(id, sizeof id, "s%06" PRIu64, index);
        ManifestRow r;
        r.id = id;
        r.source = src.filename().string();
        r.severity = sev;
        r.seed = seed;
        r.index = index;
        r.airlight = s.airlight;
        r.rgb = s.airlight.rgb();
        r.beta = s.beta;
        r.depth_mode = cfg.depth.describe();
        r.degraded = std::string("degraded/") + id + ".png";
        r.clean = std::string("clean/") + id + ".png";
        r.transmission = std::string("transmission/") + id + ".pgm";
        save_png(s.degraded, m.resolve(r.degraded));
        save_png(s.clean, m.resolve(r.clean));
        save_pgm16(s.transmission, m.resolve(r.transmission));
        m.rows.push_back(std::move(r));
      }
    }
  }
  std::ofstream out(fs::path(out_dir) / "manifest.tsv", std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write manifest in " + out_dir);
  out << format_manifest(m);
  return m;
}

}  // namespace sf
