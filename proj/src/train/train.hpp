#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dcp/dcp.hpp"
#include "metrics/metrics.hpp"
#include "model/model.hpp"
#include "synth/synth.hpp"
#include "train/adam.hpp"
#include "train/checkpoint.hpp"

namespace sf {

struct TrainConfig {
  std::string manifest;
  ModelConfig model;
  int steps = 500;
  int batch = 4;
  AdamConfig adam;
  double loss_eps = 1e-3;
  std::uint64_t seed = 0;
  int crop = 64;
  /// 0 disables periodic checkpoints; the final checkpoint is always written.
  int checkpoint_every = 0;
  bool flip = false;

  /// Keys: manifest, steps, batch, lr, beta1, beta2, eps_adam, loss_eps, seed,
  /// crop, checkpoint_every, flip, plus the model keys.
  static TrainConfig from_options(const Options& opts);
  Options to_options() const;
  void validate() const;
};

struct TrainingPair {
  std::string id;
  ImageBuffer degraded;
  ImageBuffer clean;
};

/// Loads every manifest pair; unreadable or misaligned pairs abort with the sample id.
std::vector<TrainingPair> load_pairs(const Manifest& manifest);

struct CropSpec {
  int index = 0;
  int y = 0;
  int x = 0;
  bool flip = false;
};

/// Crop for (seed, step, slot); depends on nothing else, so batches are order independent.
CropSpec sample_crop(std::uint64_t seed, std::uint64_t step, int slot, const std::vector<TrainingPair>& pairs,
                     int crop, bool flip);

struct StepLog {
  std::uint64_t step = 0;
  double loss = 0.0;
};

using TrainLogFn = std::function<void(const std::string&)>;

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> losses;
  /// FNV hash over every (step, slot, index, y, x, flip) drawn: identical for runs sharing data order.
  std::uint64_t data_order_hash = 0;
};

/// Mean Charbonnier loss over the batch and its gradients, one tape per call.
struct BatchResult {
  double loss = 0.0;
  std::vector<Tensor<float>> grads;  // parameter-store order
};
BatchResult batch_loss_and_grads(const Model& model, const std::vector<Tensor<float>>& inputs,
                                 const std::vector<Tensor<float>>& targets, double loss_eps);

/// Runs cfg.steps Adam steps, starting from `resume` when given (otherwise a
/// fresh build). When out_dir is non-empty writes loss.tsv, periodic
/// checkpoints and final.sndf there. A non-finite loss aborts with a numeric
/// error naming the step; checkpoints already written are kept.
TrainResult train(const TrainConfig& cfg, const std::vector<TrainingPair>& pairs, const std::string& out_dir,
                  const TrainLogFn& log, const Checkpoint* resume = nullptr);
TrainResult train(const TrainConfig& cfg, const std::string& out_dir, const TrainLogFn& log);

struct EvalOptions {
  bool with_dcp = false;
  DcpConfig dcp;
};

struct EvalReport {
  MetricReport model;
  MetricReport degraded;
  MetricReport dcp;
  bool has_dcp = false;
  std::vector<std::string> missing;  // sample ids whose files could not be read

  /// Per-image rows "method id psnr ssim" then one "mean" row per method.
  void write_tsv(std::ostream& out) const;
  void save(const std::string& path) const;
};

/// Pairs are cropped (top-left) to the largest multiple of the model's size multiple.
EvalReport evaluate(const Model& model, const Manifest& manifest, const EvalOptions& opts,
                    const TrainLogFn& log);

struct AblationRow {
  std::string label;
  FusionKind fusion = FusionKind::kGate;
  Branches branches = Branches::kBoth;
  std::size_t params = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double paper_psnr = 0.0;
  double paper_ssim = 0.0;
  std::uint64_t data_order_hash = 0;
  double final_loss = 0.0;
};

struct AblationVariant {
  const char* label;
  FusionKind fusion;
  Branches branches;
  double paper_psnr;
  double paper_ssim;
};

/// The five topologies with the published reference numbers, in table order.
const std::vector<AblationVariant>& ablation_variants();

/// Trains every variant with identical seed and budget on the same pairs and
/// evaluates on `eval_manifest` (the training manifest when empty).
std::vector<AblationRow> run_ablation(const TrainConfig& base, const std::string& eval_manifest,
                                      const std::string& out_dir, const TrainLogFn& log);
void write_ablation_tsv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace sf
