#include "app/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "common/rng.hpp"
#include "dcp/dcp.hpp"
#include "gradcheck/suite.hpp"
#include "image/image.hpp"
#include "train/train.hpp"

namespace fs = std::filesystem;

namespace sf::app {

namespace {

std::vector<FlagSpec> common_flags(const std::string& out_help, bool out_required) {
  return {
      {"config", "", "key=value config file; flags override it"},
      {"seed", "0", "global seed"},
      {"out", "", out_help, false, out_required},
      {"force", "false", "write into an existing non-empty output directory", true},
  };
}

std::vector<FlagSpec> model_flags() {
  return {
      {"base_channels", "16", "channels after the stem (C0)"},
      {"stages", "2", "number of fused stages"},
      {"heads", "1", "attention heads per stage, comma list or one value for all"},
      {"ffn_expansion", "2", "feed-forward expansion factor"},
      {"fusion", "gate", "gate | sk | add | none"},
      {"branches", "both", "both | cnn | transformer"},
      {"downsample", "true", "stride-2 downsampling per stage"},
  };
}

std::vector<FlagSpec> train_flags() {
  std::vector<FlagSpec> f = {
      {"manifest", "", "training manifest.tsv", false, true},
      {"steps", "500", "Adam steps"},
      {"batch", "4", "crops per step"},
      {"lr", "0.001", "Adam learning rate"},
      {"beta1", "0.9", "Adam first-moment decay"},
      {"beta2", "0.999", "Adam second-moment decay"},
      {"eps_adam", "1e-08", "Adam denominator epsilon"},
      {"loss_eps", "0.001", "Charbonnier epsilon"},
      {"crop", "64", "square crop size"},
      {"checkpoint_every", "0", "periodic checkpoint interval in steps, 0 = final only"},
      {"flip", "false", "random horizontal flips", true},
  };
  for (auto& m : model_flags()) f.push_back(m);
  return f;
}

std::string range_text(const Interval& iv) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g,%g", iv.lo, iv.hi);
  return buf;
}

std::vector<CommandSpec> build_commands() {
  std::vector<CommandSpec> cmds;
  auto with = [](std::vector<FlagSpec> a, const std::vector<FlagSpec>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };

  const SynthConfig sd = SynthConfig::defaults();
  std::vector<FlagSpec> synth = {
      {"in", "", "directory of clean PNG/PPM images", false, true},
      {"presets", "dust,sand,sandstorm", "severity presets, comma list"},
      {"per_image", "1", "samples per image and preset"},
      {"ar_range", range_text(sd.a_r), "airlight red channel range lo,hi"},
      {"b_range", range_text(sd.b), "airlight disturbance range lo,hi"},
      {"depth_mode", sd.depth.describe(), "constant:D | ramp:DMIN:DMAX | file:PATH:DMIN:DMAX"},
  };
  for (Severity s : {Severity::kDust, Severity::kSand, Severity::kSandstorm}) {
    const std::string n = severity_name(s);
    const PresetRanges& p = sd.preset(s);
    synth.push_back({n + "_beta", range_text(p.beta), n + " scattering coefficient range"});
    synth.push_back({n + "_k1", range_text(p.k1), n + " green airlight slope range"});
    synth.push_back({n + "_k2", range_text(p.k2), n + " blue airlight slope range"});
  }
  cmds.push_back({"synth", "Synthesize degraded/clean pairs and a manifest",
                  with(common_flags("dataset directory", true), synth)});

  cmds.push_back({"train", "Train a model on a manifest",
                  with(with(common_flags("run directory", true), train_flags()),
                       {{"resume", "", "checkpoint to continue from"}})});

  const DcpConfig dd;
  char omega[32], t0[32], pct[32];
  std::snprintf(omega, sizeof omega, "%g", dd.omega);
  std::snprintf(t0, sizeof t0, "%g", dd.t0);
  std::snprintf(pct, sizeof pct, "%g", dd.airlight_percent);
  cmds.push_back({"eval", "Score a checkpoint (and optionally the dark channel prior) on a manifest",
                  with(common_flags("report directory", true),
                       {{"manifest", "", "evaluation manifest.tsv", false, true},
                        {"checkpoint", "", "model checkpoint (.sndf)", false, true},
                        {"with_dcp", "false", "also score the dark channel prior baseline", true},
                        {"dcp_patch", std::to_string(dd.patch), "dark channel patch size"},
                        {"dcp_omega", omega, "haze retention factor"},
                        {"dcp_t0", t0, "transmission floor"},
                        {"dcp_percent", pct, "fraction of brightest dark-channel pixels for airlight"}})});

  cmds.push_back({"restore", "Restore every image in a directory with a checkpoint",
                  with(common_flags("output directory", true),
                       {{"checkpoint", "", "model checkpoint (.sndf)", false, true},
                        {"in", "", "directory of degraded PNG/PPM images", false, true}})});

  cmds.push_back({"gradcheck", "Finite-difference check of every op and block",
                  with(common_flags("optional report directory", false),
                       {{"instances", "10", "random instances per entry"},
                        {"blocks", "all", "comma list of entries, or all"}})});

  cmds.push_back({"ablate", "Train and score the five fusion/branch topologies",
                  with(with(common_flags("ablation directory", true), train_flags()),
                       {{"eval_manifest", "", "manifest to score on (training manifest if empty)"}})});
  return cmds;
}

void log_line(const Log& log, const std::string& s) {
  if (log) log(s);
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Refuses a non-empty existing directory unless forced, then creates it.
void prepare_out(const Options& o) {
  const std::string out = o.get_string("out", "");
  require(!out.empty(), ErrorCode::kUsage, "--out is required");
  std::error_code ec;
  if (fs::exists(out, ec)) {
    require(fs::is_directory(out, ec), ErrorCode::kIo, "output path exists and is not a directory: " + out);
    require(fs::is_empty(out, ec) || o.get_bool("force", false), ErrorCode::kIo,
            "output directory " + out + " is not empty (use --force to write into it)");
  }
  fs::create_directories(out, ec);
  require(!ec, ErrorCode::kIo, "cannot create output directory " + out + ": " + ec.message());
}

void write_repro(const std::string& command, const Options& o) {
  const fs::path path = fs::path(o.get_string("out", "")) / "REPRO.txt";
  std::ofstream f(path, std::ios::binary);
  f << repro_header(command, o, utc_now());
  require(static_cast<bool>(f), ErrorCode::kIo, "cannot write " + path.string());
}

void require_file(const std::string& path, const std::string& what) {
  require(!path.empty(), ErrorCode::kUsage, "--" + flag_name(what) + " is required");
  require(fs::exists(path), ErrorCode::kIo, what + " not found: " + path);
}

std::vector<Severity> parse_presets(const std::string& text) {
  std::vector<Severity> out;
  for (const auto& p : split(text, ',')) {
    const std::string t = trim(p);
    if (!t.empty()) out.push_back(parse_severity(t));
  }
  require(!out.empty(), ErrorCode::kConfig, "option 'presets' names no preset");
  return out;
}

void run_synth(const Options& o, const Log& log) {
  const std::string in = o.get_string("in", "");
  require_file(in, "in");
  require(fs::is_directory(in), ErrorCode::kIo, "input is not a directory: " + in);
  SynthConfig cfg = SynthConfig::defaults();
  cfg.apply(o);
  const auto presets = parse_presets(o.get_string("presets", ""));
  const int per_image = static_cast<int>(o.get_int("per_image", 1));
  require(per_image >= 1, ErrorCode::kConfig, "option 'per_image' must be >= 1");
  prepare_out(o);
  write_repro("synth", o);
  const Manifest m =
      synthesize_dataset(in, o.get_string("out", ""), presets, per_image, o.get_u64("seed", 0), cfg, log);
  log_line(log, "synth: " + std::to_string(m.rows.size()) + " samples, " + std::to_string(m.skipped) +
                    " unreadable inputs skipped");
}

void run_train(const Options& o, const Log& log) {
  const TrainConfig cfg = TrainConfig::from_options(o);
  cfg.validate();
  require_file(cfg.manifest, "manifest");
  const std::string resume = o.get_string("resume", "");
  std::optional<Checkpoint> start;
  if (!resume.empty()) {
    require_file(resume, "resume");
    start = load_checkpoint(resume, cfg.model);
  }
  const auto pairs = load_pairs(read_manifest(cfg.manifest));
  prepare_out(o);
  write_repro("train", o);
  const TrainResult r = train(cfg, pairs, o.get_string("out", ""), log, start ? &*start : nullptr);
  char buf[96];
  std::snprintf(buf, sizeof buf, "train: done at step %llu, final loss %.6f",
                static_cast<unsigned long long>(r.checkpoint.step), r.losses.empty() ? 0.0 : r.losses.back().loss);
  log_line(log, buf);
}

void run_eval(const Options& o, const Log& log) {
  const std::string manifest = o.get_string("manifest", ""), ckpt = o.get_string("checkpoint", "");
  require_file(manifest, "manifest");
  require_file(ckpt, "checkpoint");
  EvalOptions eo;
  eo.with_dcp = o.get_bool("with_dcp", false);
  eo.dcp.patch = static_cast<int>(o.get_int("dcp_patch", eo.dcp.patch));
  eo.dcp.omega = o.get_double("dcp_omega", eo.dcp.omega);
  eo.dcp.t0 = o.get_double("dcp_t0", eo.dcp.t0);
  eo.dcp.airlight_percent = o.get_double("dcp_percent", eo.dcp.airlight_percent);
  eo.dcp.validate();
  const Manifest m = read_manifest(manifest);
  const Model model = load_checkpoint(ckpt).model();
  prepare_out(o);
  write_repro("eval", o);
  const EvalReport rep = evaluate(model, m, eo, log);
  rep.save((fs::path(o.get_string("out", "")) / "report.tsv").string());
  char buf[128];
  std::snprintf(buf, sizeof buf, "eval: model %.4f dB / %.4f, degraded %.4f dB / %.4f", rep.model.mean_psnr(),
                rep.model.mean_ssim(), rep.degraded.mean_psnr(), rep.degraded.mean_ssim());
  log_line(log, buf);
  if (rep.has_dcp) {
    std::snprintf(buf, sizeof buf, "eval: dcp %.4f dB / %.4f", rep.dcp.mean_psnr(), rep.dcp.mean_ssim());
    log_line(log, buf);
  }
  require(rep.missing.empty(), ErrorCode::kPartialFailure,
          std::to_string(rep.missing.size()) + " manifest rows could not be read (marked missing in report.tsv)");
}

// Replicates the last row/column so both sides become multiples of m.
ImageBuffer pad_to_multiple(const ImageBuffer& img, int m) {
  const int h = (img.height() + m - 1) / m * m, w = (img.width() + m - 1) / m * m;
  if (h == img.height() && w == img.width()) return img;
  ImageBuffer out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = img.at(std::min(y, img.height() - 1), std::min(x, img.width() - 1), c);
  return out;
}

void run_restore(const Options& o, const Log& log) {
  const std::string ckpt = o.get_string("checkpoint", ""), in = o.get_string("in", "");
  require_file(ckpt, "checkpoint");
  require_file(in, "in");
  require(fs::is_directory(in), ErrorCode::kIo, "input is not a directory: " + in);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && (ext == ".png" || ext == ".ppm")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCode::kIo, "no PNG or PPM images in " + in);
  const Model model = load_checkpoint(ckpt).model();
  prepare_out(o);
  write_repro("restore", o);
  const int mult = model.config().size_multiple();
  int failed = 0;
  for (const auto& f : files) {
    ImageBuffer img;
    try {
      img = load_image(f.string());
    } catch (const Error& e) {
      ++failed;
      log_line(log, "restore: skipping " + f.filename().string() + ": " + e.what());
      continue;
    }
    ImageBuffer out = model.restore(pad_to_multiple(img, mult));
    if (!out.same_shape(img)) out = out.crop(0, 0, img.height(), img.width());
    save_png(out, (fs::path(o.get_string("out", "")) / (f.stem().string() + ".png")).string());
  }
  log_line(log, "restore: " + std::to_string(files.size() - failed) + " images written");
  require(failed == 0, ErrorCode::kPartialFailure, std::to_string(failed) + " input images could not be read");
}

void run_gradcheck(const Options& o, const Log& log) {
  const int instances = static_cast<int>(o.get_int("instances", 10));
  require(instances >= 1, ErrorCode::kConfig, "option 'instances' must be >= 1");
  std::vector<std::string> blocks;
  const std::string sel = trim(o.get_string("blocks", "all"));
  const auto known = gradcheck_suite_blocks();
  if (sel == "all") {
    blocks = known;
  } else {
    for (const auto& b : split(sel, ',')) {
      const std::string t = trim(b);
      require(std::find(known.begin(), known.end(), t) != known.end(), ErrorCode::kConfig,
              "option 'blocks': unknown entry '" + t + "'");
      blocks.push_back(t);
    }
  }
  const bool to_dir = !o.get_string("out", "").empty();
  if (to_dir) {
    prepare_out(o);
    write_repro("gradcheck", o);
  }
  const std::uint64_t seed = o.get_u64("seed", 0);
  std::ostringstream tsv;
  tsv << "entry\tinstances\tworst_rel_err\tworst_at\tprobes\n";
  double worst = 0;
  std::string worst_name;
  char buf[256];
  for (const auto& b : blocks) {
    const SuiteRow row = run_gradcheck_block(b, seed, instances);
    std::snprintf(buf, sizeof buf, "%s\t%d\t%.3e\t%s\t%d", row.block.c_str(), row.instances,
                  row.result.worst_rel_error, row.result.worst_location.c_str(), row.result.probes);
    tsv << buf << "\n";
    log_line(log, buf);
    if (!(row.result.worst_rel_error <= worst) || worst_name.empty()) {
      worst = row.result.worst_rel_error;
      worst_name = b;
    }
  }
  if (to_dir) {
    std::ofstream f(fs::path(o.get_string("out", "")) / "gradcheck.tsv", std::ios::binary);
    f << tsv.str();
  }
  std::snprintf(buf, sizeof buf, "gradcheck: worst %.3e (%s) over %zu entries", worst, worst_name.c_str(),
                blocks.size());
  log_line(log, buf);
  require(worst < 1e-3, ErrorCode::kNumeric, std::string("gradient check failed: ") + buf);
}

void run_ablate(const Options& o, const Log& log) {
  const TrainConfig cfg = TrainConfig::from_options(o);
  cfg.validate();
  require_file(cfg.manifest, "manifest");
  const std::string em = o.get_string("eval_manifest", "");
  if (!em.empty()) require_file(em, "eval_manifest");
  prepare_out(o);
  write_repro("ablate", o);
  const auto rows = run_ablation(cfg, em, o.get_string("out", ""), log);
  const fs::path path = fs::path(o.get_string("out", "")) / "ablation.tsv";
  std::ofstream f(path, std::ios::binary);
  write_ablation_tsv(f, rows);
  require(static_cast<bool>(f), ErrorCode::kIo, "cannot write " + path.string());
  std::ostringstream table;
  write_ablation_tsv(table, rows);
  std::istringstream lines(table.str());
  for (std::string line; std::getline(lines, line);) log_line(log, line);
}

}  // namespace

const FlagSpec* CommandSpec::find(const std::string& key) const {
  for (const auto& f : flags)
    if (f.key == key) return &f;
  return nullptr;
}

const std::vector<CommandSpec>& commands() {
  static const std::vector<CommandSpec> cmds = build_commands();
  return cmds;
}

const CommandSpec& command(const std::string& name) {
  for (const auto& c : commands())
    if (c.name == name) return c;
  fail(ErrorCode::kUsage, "unknown subcommand '" + name + "'");
}

std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

Options resolve_options(const CommandSpec& cmd, const Options& explicit_flags) {
  Options o;
  for (const auto& f : cmd.flags)
    if (!f.default_value.empty()) o.set(f.key, f.default_value);
  auto absorb = [&](const Options& src, const std::string& origin) {
    for (const auto& [k, v] : src.values()) {
      require(cmd.find(k) != nullptr, ErrorCode::kUsage,
              origin + ": unknown option '" + k + "' for " + cmd.name);
      o.set(k, v);
    }
  };
  const std::string config = explicit_flags.get_string("config", "");
  if (!config.empty()) {
    require(fs::exists(config), ErrorCode::kIo, "config file not found: " + config);
    Options file;
    file.load_file(config);
    require(!file.has("config"), ErrorCode::kUsage, config + ": config files cannot include other configs");
    absorb(file, config);
  }
  absorb(explicit_flags, "command line");
  for (const auto& f : cmd.flags)
    require(!f.required || !o.get_string(f.key, "").empty(), ErrorCode::kUsage,
            "--" + flag_name(f.key) + " is required for " + cmd.name);
  return o;
}

std::uint64_t config_hash(const Options& resolved) {
  Options h = resolved;
  Options stripped;
  for (const auto& [k, v] : h.values())
    if (k != "out" && k != "force" && k != "config") stripped.set(k, v);
  return hash_string(stripped.canonical());
}

std::string repro_header(const std::string& command, const Options& resolved, const std::string& timestamp) {
  std::ostringstream s;
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(resolved)));
  s << "# sandformer reproducibility header\n";
  s << "command: " << command << "\n";
  s << "version: " << kVersion << "\n";
  s << "seed: " << resolved.get_u64("seed", 0) << "\n";
  s << "config_hash: " << hash << "\n";
  s << "timestamp: " << timestamp << "\n";
  s << "# resolved options (out, force and config excluded)\n";
  for (const auto& [k, v] : resolved.values())
    if (k != "out" && k != "force" && k != "config") s << k << "=" << v << "\n";
  return s.str();
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage:
    case ErrorCode::kConfig:
      return 1;
    case ErrorCode::kNumeric:
      return 3;
    default:
      return 2;
  }
}

void run(const std::string& name, const Options& o, const Log& log) {
  const CommandSpec& cmd = command(name);
  if (cmd.name == "synth") return run_synth(o, log);
  if (cmd.name == "train") return run_train(o, log);
  if (cmd.name == "eval") return run_eval(o, log);
  if (cmd.name == "restore") return run_restore(o, log);
  if (cmd.name == "gradcheck") return run_gradcheck(o, log);
  if (cmd.name == "ablate") return run_ablate(o, log);
  fail(ErrorCode::kUsage, "unhandled subcommand '" + name + "'");
}

}  // namespace sf::app
