#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "factoreeg/data.hpp"
#include "factoreeg/losses.hpp"
#include "factoreeg/net.hpp"

namespace factoreeg {

/// Which encoders feed the classifier.
///   Both  - full method: C(z_c, z_s), adversarial + difference losses.
///   NoFc  - C(z_s, z_s), classification loss only; D is never trained.
///   NoFs  - C(z_c, z_c), classification + adversarial losses.
enum class Arm { Both, NoFc, NoFs };

std::string to_string(Arm arm);
Arm parse_arm(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 400;
  std::size_t checkpoint_after_epoch = 200;
  double lr = 0.001;
  double weight_decay = 0.01;
  double lambda = 1.0;
  std::size_t batch_size = 16;
  std::size_t crop_window_samples = 0;  // 0: whole trial
  std::size_t crop_stride_samples = 0;  // 0: 100 ms at sample_rate_hz
  double sample_rate_hz = 250.0;
  std::uint64_t seed = 0;
  std::size_t d_steps_per_batch = 1;
  std::size_t n_folds = 5;
  Arm arm = Arm::Both;
  bool average_logits = false;  // crop averaging: probabilities by default

  void validate(const NetConfig& net) const;
  std::size_t window(std::size_t trial_samples) const;
  std::size_t stride() const;
};

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay.

struct AdamWState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamWState make_adamw_state(std::span<const Tensor* const> params);

/// One step over a parameter list: p <- p - lr*mhat/(sqrt(vhat)+eps) - lr*wd*p.
/// Throws NumericError on a non-finite gradient; parameters are left untouched then.
void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamWState& state,
                double lr, double weight_decay);

// ---------------------------------------------------------------------------
// Cropping.

/// Windows at offsets 0, stride, 2*stride, ... that fit inside the trial, each [channels, window].
std::vector<Tensor> make_crops(const EEGTrial& trial, std::size_t window, std::size_t stride);

/// Stacks [C,W] crops into an encoder batch [B,1,C,W].
Tensor stack_crops(std::span<const Tensor* const> crops);

// ---------------------------------------------------------------------------
// Training.

struct LabeledCrops {
  std::vector<Tensor> crops;
  std::vector<std::size_t> labels;
};

LabeledCrops crops_for(const EEGDataset& ds, std::span<const int> trial_ids, const TrainConfig& cfg);

struct Optimizers {
  AdamWState generator;      // f_c, f_s, C
  AdamWState discriminator;  // D
};

/// Generator state covers generator_groups(arm); discriminator state covers D.
Optimizers make_optimizers(const FactorModel& model, Arm arm = Arm::Both);

enum class TrainPhase { DiscriminatorStep, GeneratorStep };

/// Observation hook called after every optimizer step.
using StepObserver = std::function<void(TrainPhase, const FactorModel&)>;

/// Parameter groups updated by the generator step for an arm.
std::vector<ParamGroup> generator_groups(Arm arm);

/// One pass over the shuffled training crops. Per batch: d_steps_per_batch
/// discriminator updates on adv_loss_d with f_c held fixed, then one update of
/// f_c/f_s/C on the arm's objective with D held fixed. Returns epoch means.
LossRecord train_epoch(FactorModel& model, const LabeledCrops& train, const EEGDataset& resting_source,
                       const TrainConfig& cfg, Optimizers& optim, Rng& rng,
                       const StepObserver& observer = {});

/// Mean classification loss over the crops, inference mode.
double validation_loss(const FactorModel& model, const LabeledCrops& crops, Arm arm);

/// Class logits for a crop batch [B,1,C,W], inference mode, honoring the arm's wiring.
Tensor predict_logits(const FactorModel& model, const Tensor& batch, Arm arm);

/// Averages per-crop probabilities (or logits) and takes the argmax, lowest index on ties.
std::size_t predict_trial(const FactorModel& model, const EEGTrial& trial, const TrainConfig& cfg);

/// Argmax of the crop-mean of per-crop rows [n_crops, n_classes], lowest index on ties.
std::size_t average_and_argmax(const Tensor& per_crop_scores);

struct EpochLog {
  std::size_t fold = 0;
  std::size_t epoch = 0;  // 1-based
  LossRecord losses;
  double val_loss = 0.0;
};

struct CheckpointRecord {
  std::size_t epoch = 0;
  double val_loss = 0.0;
  std::filesystem::path path;
};

struct FoldResult {
  std::size_t fold = 0;
  std::vector<EpochLog> log;
  CheckpointRecord checkpoint;
  FactorModel best_model;
  double test_accuracy = 0.0;
  std::optional<double> ortho_index;
  std::vector<std::size_t> test_predictions;
  std::vector<std::size_t> test_labels;
};

struct CVReport {
  std::string dataset;
  Arm mode = Arm::Both;
  double lambda = 1.0;
  std::vector<double> fold_accuracy;
  std::vector<std::optional<double>> fold_ortho_index;
  std::vector<std::filesystem::path> checkpoint_paths;
  double mean = 0.0;
  double std = 0.0;
};

struct CVRun {
  CVReport report;
  std::vector<FoldResult> folds;
};

/// Progress sink for long runs (one call per finished epoch).
using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains and evaluates one fold. Checkpoints go to `out_dir` when it is non-empty.
FoldResult train_fold(const EEGDataset& ds, const FoldSplit& split, const NetConfig& net_cfg,
                      const TrainConfig& cfg, const std::filesystem::path& out_dir = {},
                      const EpochCallback& on_epoch = {});

/// Full k-fold run. With a non-empty `out_dir`, writes run_log.jsonl, fold<k>.ckpt,
/// cv_report.json and cv_report.csv there.
CVRun train_cv(const EEGDataset& ds, const NetConfig& net_cfg, const TrainConfig& cfg,
               const std::filesystem::path& out_dir = {}, const EpochCallback& on_epoch = {});

/// Seed for fold k's model and batch order.
std::uint64_t fold_seed(std::uint64_t base, std::size_t fold);

}  // namespace factoreeg
