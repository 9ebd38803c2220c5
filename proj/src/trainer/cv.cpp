#include <cmath>
#include <fstream>
#include <limits>

#include "factoreeg/error.hpp"
#include "factoreeg/eval.hpp"
#include "factoreeg/trainer.hpp"

namespace factoreeg {

std::uint64_t fold_seed(std::uint64_t base, std::size_t fold) {
  // splitmix64 of (base + fold)
  std::uint64_t z = base + static_cast<std::uint64_t>(fold) + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

constexpr std::uint64_t kBatchStream = 0xd1b54a32d192ed03ULL;

/// Mean over crops of orthogonality_index on each crop's [F, T] feature maps, so the
/// columns compared are the per-time F-dim feature vectors that diff_loss acts on.
double mean_feature_orthogonality(const FactorModel& model, const LabeledCrops& crops) {
  const Shape map = {model.config.n_feature_maps, model.config.feature_time()};
  double sum = 0.0;
  for (const Tensor& crop : crops.crops) {
    const Tensor* one[] = {&crop};
    const Tensor x = stack_crops(one);
    Tensor zc = forward_fc(model, x), zs = forward_fs(model, x);
    zc.shape = map;
    zs.shape = map;
    sum += orthogonality_index(zc, zs);
  }
  return sum / static_cast<double>(crops.crops.size());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

FoldResult train_fold(const EEGDataset& ds, const FoldSplit& split, const NetConfig& net_cfg,
                      const TrainConfig& cfg, const std::filesystem::path& out_dir,
                      const EpochCallback& on_epoch) {
  cfg.validate(net_cfg);
  if (cfg.window(ds.trial_samples) != net_cfg.n_timesamples) {
    throw ConfigError("crop window (" + std::to_string(cfg.window(ds.trial_samples)) +
                      " samples) must equal the network input length (" +
                      std::to_string(net_cfg.n_timesamples) + ")");
  }
  if (ds.n_channels != net_cfg.n_eeg_channels) {
    throw ConfigError("dataset has " + std::to_string(ds.n_channels) + " channels, network expects " +
                      std::to_string(net_cfg.n_eeg_channels));
  }
  if (ds.n_classes() != net_cfg.n_classes) {
    throw ConfigError("dataset has " + std::to_string(ds.n_classes()) + " classes, network expects " +
                      std::to_string(net_cfg.n_classes));
  }

  const std::uint64_t seed = fold_seed(cfg.seed, split.fold);
  FoldResult result;
  result.fold = split.fold;
  FactorModel model = build_model(net_cfg, seed);
  Optimizers optim = make_optimizers(model, cfg.arm);
  Rng rng(seed ^ kBatchStream);

  const LabeledCrops train = crops_for(ds, split.train_ids, cfg);
  const LabeledCrops val = crops_for(ds, split.val_ids, cfg);

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochLog entry;
    entry.fold = split.fold;
    entry.epoch = epoch;
    entry.losses = train_epoch(model, train, ds, cfg, optim, rng);
    entry.val_loss = validation_loss(model, val, cfg.arm);
    if (epoch > cfg.checkpoint_after_epoch && entry.val_loss < best) {
      best = entry.val_loss;
      result.best_model = model;
      result.checkpoint.epoch = epoch;
      result.checkpoint.val_loss = entry.val_loss;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    result.checkpoint.path = "fold" + std::to_string(split.fold) + ".ckpt";
    save_checkpoint(result.best_model, out_dir / result.checkpoint.path);
  }

  for (int id : split.test_ids) {
    const EEGTrial& t = find_trial(ds, id);
    result.test_predictions.push_back(predict_trial(result.best_model, t, cfg));
    result.test_labels.push_back(static_cast<std::size_t>(t.label));
  }
  result.test_accuracy = accuracy(result.test_predictions, result.test_labels);

  if (cfg.arm == Arm::Both) {
    const LabeledCrops test = crops_for(ds, split.test_ids, cfg);
    result.ortho_index = mean_feature_orthogonality(result.best_model, test);
  }
  return result;
}

CVRun train_cv(const EEGDataset& ds, const NetConfig& net_cfg, const TrainConfig& cfg,
               const std::filesystem::path& out_dir, const EpochCallback& on_epoch) {
  ds.validate();
  cfg.validate(net_cfg);
  if (ds.resting.empty()) throw DataError(ds.name + ": resting-state class is absent");
  for (std::size_t c = 0; c < ds.n_classes(); ++c) {
    std::size_t count = 0;
    for (const auto& t : ds.trials) count += static_cast<std::size_t>(t.label) == c;
    if (count < cfg.n_folds) {
      throw DataError(ds.name + ": class " + std::to_string(c) + " has " + std::to_string(count) +
                      " trials, fewer than " + std::to_string(cfg.n_folds) + " folds");
    }
  }
  const auto splits = split_folds(ds, cfg.n_folds, cfg.seed);

  std::ofstream log_out;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log_out.open(out_dir / "run_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log_out) throw DataError("cannot write " + (out_dir / "run_log.jsonl").string());
    log_out << run_log_header_line(net_cfg, cfg) << '\n';
  }
  auto sink = [&](const EpochLog& e) {
    if (log_out.is_open()) log_out << epoch_log_line(e) << '\n';
    if (on_epoch) on_epoch(e);
  };

  CVRun run;
  run.report.dataset = ds.name;
  run.report.mode = cfg.arm;
  run.report.lambda = cfg.lambda;
  for (const auto& split : splits) {
    run.folds.push_back(train_fold(ds, split, net_cfg, cfg, out_dir, sink));
    const FoldResult& f = run.folds.back();
    run.report.fold_accuracy.push_back(f.test_accuracy);
    run.report.fold_ortho_index.push_back(f.ortho_index);
    run.report.checkpoint_paths.push_back(f.checkpoint.path);
  }
  run.report.mean = mean_of(run.report.fold_accuracy);
  run.report.std = stddev_of(run.report.fold_accuracy);

  if (!out_dir.empty()) {
    log_out.close();
    write_text(out_dir / "cv_report.json", cv_report_json(run.report));
    write_text(out_dir / "cv_report.csv", cv_report_csv(run.report));
  }
  return run;
}

}  // namespace factoreeg
