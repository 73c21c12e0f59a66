#include "train/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "train/loss.hpp"

namespace fs = std::filesystem;

namespace sf {

TrainConfig TrainConfig::from_options(const Options& o) {
  TrainConfig c;
  c.manifest = o.get_string("manifest", c.manifest);
  c.model = ModelConfig::from_options(o, c.model);
  c.steps = static_cast<int>(o.get_int("steps", c.steps));
  c.batch = static_cast<int>(o.get_int("batch", c.batch));
  c.adam.lr = o.get_double("lr", c.adam.lr);
  c.adam.beta1 = o.get_double("beta1", c.adam.beta1);
  c.adam.beta2 = o.get_double("beta2", c.adam.beta2);
  c.adam.eps = o.get_double("eps_adam", c.adam.eps);
  c.loss_eps = o.get_double("loss_eps", c.loss_eps);
  c.seed = o.get_u64("seed", c.seed);
  c.crop = static_cast<int>(o.get_int("crop", c.crop));
  c.checkpoint_every = static_cast<int>(o.get_int("checkpoint_every", c.checkpoint_every));
  c.flip = o.get_bool("flip", c.flip);
  c.validate();
  return c;
}

Options TrainConfig::to_options() const {
  Options o = model.to_options();
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  o.set("manifest", manifest);
  o.set("steps", std::to_string(steps));
  o.set("batch", std::to_string(batch));
  o.set("lr", num(adam.lr));
  o.set("beta1", num(adam.beta1));
  o.set("beta2", num(adam.beta2));
  o.set("eps_adam", num(adam.eps));
  o.set("loss_eps", num(loss_eps));
  o.set("seed", std::to_string(seed));
  o.set("crop", std::to_string(crop));
  o.set("checkpoint_every", std::to_string(checkpoint_every));
  o.set("flip", flip ? "true" : "false");
  return o;
}

void TrainConfig::validate() const {
  model.validate();
  std::vector<std::string> bad;
  if (steps < 0) bad.push_back("steps must be >= 0");
  if (batch < 1) bad.push_back("batch must be >= 1");
  if (crop < 1 || crop % model.size_multiple() != 0)
    bad.push_back("crop " + std::to_string(crop) + " must be a positive multiple of " +
                  std::to_string(model.size_multiple()));
  if (!(adam.lr > 0)) bad.push_back("lr must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1))
    bad.push_back("betas must lie in [0,1)");
  if (!(adam.eps > 0)) bad.push_back("eps_adam must be positive");
  if (!(loss_eps > 0)) bad.push_back("loss_eps must be positive");
  if (checkpoint_every < 0) bad.push_back("checkpoint_every must be >= 0");
  if (bad.empty()) return;
  std::string msg = "invalid training config:";
  for (const auto& b : bad) msg += "\n  - " + b;
  fail(ErrorCode::kConfig, msg);
}

std::vector<TrainingPair> load_pairs(const Manifest& manifest) {
  require(!manifest.rows.empty(), ErrorCode::kIo, "manifest has no samples");
  std::vector<TrainingPair> pairs;
  for (const auto& r : manifest.rows) {
    TrainingPair p;
    p.id = r.id;
    try {
      p.degraded = load_image(manifest.resolve(r.degraded));
      p.clean = load_image(manifest.resolve(r.clean));
    } catch (const Error& e) {
      fail(ErrorCode::kIo, "sample " + r.id + ": " + e.what());
    }
    require(p.degraded.same_shape(p.clean), ErrorCode::kFormat,
            "sample " + r.id + ": degraded and clean images differ in size");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

CropSpec sample_crop(std::uint64_t seed, std::uint64_t step, int slot,
                     const std::vector<TrainingPair>& pairs, int crop, bool flip) {
  CounterRng rng(mix64(seed ^ 0x63726f70ULL), (step << 16) | static_cast<std::uint64_t>(slot));
  CropSpec c;
  c.index = static_cast<int>(rng.below(pairs.size()));
  const ImageBuffer& img = pairs[c.index].clean;
  c.y = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height() - crop + 1)));
  c.x = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width() - crop + 1)));
  c.flip = flip && rng.uniform() < 0.5f;
  return c;
}

BatchResult batch_loss_and_grads(const Model& model, const std::vector<Tensor<float>>& inputs,
                                 const std::vector<Tensor<float>>& targets, double loss_eps) {
  require(!inputs.empty() && inputs.size() == targets.size(), ErrorCode::kInvalidArgument,
          "batch needs matching non-empty inputs and targets");
  const auto& entries = model.params().entries();
  BatchResult out;
  for (const auto& [name, t] : entries) out.grads.emplace_back(t.shape());
  const float inv = 1.0f / static_cast<float>(inputs.size());
  double total = 0.0;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    Tape<float> tape;
    ParamBinder<float> p(tape, &model.params(), true);
    Var<float> pred = sandformer_forward(p, model.config(), tape.leaf(inputs[b]));
    Var<float> loss = charbonnier_loss(pred, targets[b], loss_eps);
    total += loss.value()[0];
    auto g = tape.backward(loss);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const Tensor<float>& gk = g.at(p(entries[k].first));
      Tensor<float>& acc = out.grads[k];
      for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += gk[i] * inv;
    }
  }
  out.loss = total / static_cast<double>(inputs.size());
  return out;
}

static std::string checkpoint_name(std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06llu.sndf", static_cast<unsigned long long>(step));
  return buf;
}

TrainResult train(const TrainConfig& cfg, const std::vector<TrainingPair>& pairs,
                  const std::string& out_dir, const TrainLogFn& log, const Checkpoint* resume) {
  cfg.validate();
  require(!pairs.empty(), ErrorCode::kIo, "no training pairs");
  for (const auto& p : pairs)
    require(p.clean.width() >= cfg.crop && p.clean.height() >= cfg.crop, ErrorCode::kConfig,
            "crop " + std::to_string(cfg.crop) + " does not fit sample " + p.id + " (" +
                std::to_string(p.clean.width()) + "x" + std::to_string(p.clean.height()) + ")");

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  if (resume) {
    require(resume->config.canonical() == cfg.model.canonical(), ErrorCode::kConfigMismatch,
            "resume checkpoint was trained with a different model config");
    require(resume->rng_key == cfg.seed, ErrorCode::kConfigMismatch,
            "resume checkpoint was trained with seed " + std::to_string(resume->rng_key));
    ck = *resume;
    if (ck.adam.m.empty()) ck.adam = AdamState::zeros_like(ck.params);
  } else {
    Model fresh = Model::build(cfg.model, cfg.seed);
    ck.config = cfg.model;
    ck.params = fresh.params();
    ck.adam = AdamState::zeros_like(ck.params);
    ck.rng_key = cfg.seed;
  }
  Model model(ck.config, std::move(ck.params));

  std::ofstream loss_log;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    loss_log.open(fs::path(out_dir) / "loss.tsv");
    require(static_cast<bool>(loss_log), ErrorCode::kIo, "cannot write loss log in " + out_dir);
    loss_log << "step\tloss\n";
  }
  auto snapshot = [&](std::uint64_t step) {
    Checkpoint c;
    c.config = model.config();
    c.params = model.params();
    c.adam = ck.adam;
    c.step = step;
    c.rng_key = cfg.seed;
    c.rng_counter = step;
    return c;
  };

  std::uint64_t order = 0xcbf29ce484222325ULL;
  auto mix_order = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      order ^= (v >> (8 * i)) & 0xff;
      order *= 0x100000001b3ULL;
    }
  };

  std::vector<Tensor<float>> inputs(cfg.batch), targets(cfg.batch);
  for (std::uint64_t step = ck.step; step < static_cast<std::uint64_t>(cfg.steps); ++step) {
    for (int b = 0; b < cfg.batch; ++b) {
      const CropSpec c = sample_crop(cfg.seed, step, b, pairs, cfg.crop, cfg.flip);
      for (std::uint64_t v : {step, static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(c.index),
                              static_cast<std::uint64_t>(c.y), static_cast<std::uint64_t>(c.x),
                              static_cast<std::uint64_t>(c.flip)})
        mix_order(v);
      ImageBuffer in = pairs[c.index].degraded.crop(c.y, c.x, cfg.crop, cfg.crop);
      ImageBuffer tg = pairs[c.index].clean.crop(c.y, c.x, cfg.crop, cfg.crop);
      if (c.flip) {
        in = in.flipped_horizontal();
        tg = tg.flipped_horizontal();
      }
      inputs[b] = in.to_tensor();
      targets[b] = tg.to_tensor();
    }
    BatchResult br = batch_loss_and_grads(model, inputs, targets, cfg.loss_eps);
    if (!std::isfinite(br.loss))
      fail(ErrorCode::kNumeric, "non-finite loss at step " + std::to_string(step + 1) +
                                    (out_dir.empty() ? "" : "; last checkpoint kept in " + out_dir));
    adam_step(model.params(), br.grads, ck.adam, cfg.adam);
    result.losses.push_back({step + 1, br.loss});
    if (loss_log.is_open()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%llu\t%.9g\n", static_cast<unsigned long long>(step + 1), br.loss);
      loss_log << buf;
    }
    if (log && ((step + 1) % 50 == 0 || step + 1 == static_cast<std::uint64_t>(cfg.steps))) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "step %llu/%d loss %.6f", static_cast<unsigned long long>(step + 1),
                    cfg.steps, br.loss);
      log(buf);
    }
    if (!out_dir.empty() && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0)
      save_checkpoint((fs::path(out_dir) / checkpoint_name(step + 1)).string(), snapshot(step + 1));
  }
  const std::uint64_t final_step = std::max<std::uint64_t>(ck.step, static_cast<std::uint64_t>(cfg.steps));
  AdamState adam = std::move(ck.adam);
  ck = snapshot(final_step);
  ck.adam = std::move(adam);
  result.data_order_hash = order;
  if (!out_dir.empty()) save_checkpoint((fs::path(out_dir) / "final.sndf").string(), ck);
  return result;
}

TrainResult train(const TrainConfig& cfg, const std::string& out_dir, const TrainLogFn& log) {
  const Manifest m = read_manifest(cfg.manifest);
  return train(cfg, load_pairs(m), out_dir, log);
}

static ImageBuffer crop_to_multiple(const ImageBuffer& img, int m) {
  const int h = img.height() - img.height() % m, w = img.width() - img.width() % m;
  require(h >= m && w >= m, ErrorCode::kInvalidArgument,
          "image smaller than the model's size multiple " + std::to_string(m));
  if (h == img.height() && w == img.width()) return img;
  return img.crop(0, 0, h, w);
}

EvalReport evaluate(const Model& model, const Manifest& manifest, const EvalOptions& opts,
                    const TrainLogFn& log) {
  if (opts.with_dcp) opts.dcp.validate();
  EvalReport rep;
  rep.has_dcp = opts.with_dcp;
  const int m = model.config().size_multiple();
  for (const auto& r : manifest.rows) {
    ImageBuffer deg, clean;
    try {
      deg = load_image(manifest.resolve(r.degraded));
      clean = load_image(manifest.resolve(r.clean));
      require(deg.same_shape(clean), ErrorCode::kFormat, "degraded and clean sizes differ");
    } catch (const Error& e) {
      rep.missing.push_back(r.id);
      if (log) log("missing sample " + r.id + ": " + e.what());
      continue;
    }
    deg = crop_to_multiple(deg, m);
    clean = crop_to_multiple(clean, m);
    rep.model.add(r.id, model.restore(deg), clean);
    rep.degraded.add(r.id, deg, clean);
    if (opts.with_dcp) rep.dcp.add(r.id, dehaze_dcp(deg, opts.dcp), clean);
  }
  return rep;
}

void EvalReport::write_tsv(std::ostream& out) const {
  out << "# ssim=" << kSsimConvention << "\n";
  if (has_dcp) out << "# dcp: dark channel prior without guided-filter refinement\n";
  out << "method\tid\tpsnr_db\tssim\n";
  char buf[96];
  auto section = [&](const char* method, const MetricReport& r) {
    for (const auto& row : r.rows) {
      std::snprintf(buf, sizeof buf, "\t%.6f\t%.6f\n", row.psnr_db, row.ssim);
      out << method << "\t" << row.id << buf;
    }
  };
  section("model", model);
  section("degraded", degraded);
  if (has_dcp) section("dcp", dcp);
  for (const auto& id : missing) out << "missing\t" << id << "\tnan\tnan\n";
  auto mean = [&](const char* method, const MetricReport& r) {
    std::snprintf(buf, sizeof buf, "\t%.6f\t%.6f\n", r.mean_psnr(), r.mean_ssim());
    out << method << "\tmean" << buf;
  };
  mean("model", model);
  mean("degraded", degraded);
  if (has_dcp) mean("dcp", dcp);
}

void EvalReport::save(const std::string& path) const {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write report " + path);
  write_tsv(out);
}

const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> v = {
      {"only Transformer Branch", FusionKind::kNone, Branches::kTransformer, 31.426, 0.941},
      {"only CNN Branch", FusionKind::kNone, Branches::kCnn, 20.449, 0.826},
      {"Transformer + CNN", FusionKind::kAdd, Branches::kBoth, 30.986, 0.941},
      {"Trans. + CNN + SK Fusion", FusionKind::kSk, Branches::kBoth, 31.667, 0.948},
      {"Trans. + CNN + Gate Fusion", FusionKind::kGate, Branches::kBoth, 34.150, 0.952},
  };
  return v;
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, const std::string& eval_manifest,
                                      const std::string& out_dir, const TrainLogFn& log) {
  const Manifest train_m = read_manifest(base.manifest);
  const auto pairs = load_pairs(train_m);
  const Manifest eval_m = eval_manifest.empty() ? train_m : read_manifest(eval_manifest);
  std::vector<AblationRow> rows;
  int k = 0;
  for (const auto& v : ablation_variants()) {
    TrainConfig cfg = base;
    cfg.model.fusion = v.fusion;
    cfg.model.branches = v.branches;
    if (log) log(std::string("ablation: training '") + v.label + "'");
    const std::string sub = out_dir.empty() ? "" : (fs::path(out_dir) / ("variant" + std::to_string(k++))).string();
    TrainResult tr = train(cfg, pairs, sub, log);
    Model model = tr.checkpoint.model();
    EvalReport rep = evaluate(model, eval_m, {}, log);
    AblationRow row;
    row.label = v.label;
    row.fusion = v.fusion;
    row.branches = v.branches;
    row.params = model.params().total_elements();
    row.psnr = rep.model.mean_psnr();
    row.ssim = rep.model.mean_ssim();
    row.paper_psnr = v.paper_psnr;
    row.paper_ssim = v.paper_ssim;
    row.data_order_hash = tr.data_order_hash;
    row.final_loss = tr.losses.empty() ? 0.0 : tr.losses.back().loss;
    rows.push_back(row);
  }
  for (const auto& r : rows)
    require(r.data_order_hash == rows.front().data_order_hash, ErrorCode::kState,
            "ablation variants saw different data orders");
  return rows;
}

void write_ablation_tsv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant\tfusion\tbranches\tparams\tpsnr_db\tssim\trank\tpaper_psnr_db\tpaper_ssim\tpaper_rank\t"
         "data_order\n";
  auto rank_of = [&](std::size_t i, bool paper) {
    int r = 1;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const double a = paper ? rows[j].paper_psnr : rows[j].psnr;
      const double b = paper ? rows[i].paper_psnr : rows[i].psnr;
      if (a > b) ++r;
    }
    return r;
  };
  char buf[160];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::snprintf(buf, sizeof buf, "\t%s\t%s\t%zu\t%.6f\t%.6f\t%d\t%.3f\t%.3f\t%d\t%016llx\n",
                  fusion_name(r.fusion), branches_name(r.branches), r.params, r.psnr, r.ssim,
                  rank_of(i, false), r.paper_psnr, r.paper_ssim, rank_of(i, true),
                  static_cast<unsigned long long>(r.data_order_hash));
    out << r.label << buf;
  }
}

}  // namespace sf
