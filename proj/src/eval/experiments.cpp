#include <cstdio>

#include "factoreeg/error.hpp"
#include "factoreeg/eval.hpp"

namespace factoreeg {

CVRun run_ablation(const EEGDataset& ds, const NetConfig& net_cfg, TrainConfig cfg, Arm mode,
                   const std::filesystem::path& out_dir, const EpochCallback& on_epoch) {
  cfg.arm = mode;
  return train_cv(ds, net_cfg, cfg, out_dir, on_epoch);
}

std::vector<CVRun> lambda_sweep(const EEGDataset& ds, const NetConfig& net_cfg, TrainConfig cfg,
                                std::span<const double> lambdas, const std::filesystem::path& out_dir,
                                const EpochCallback& on_epoch) {
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw ConfigError("lambda_sweep: lambda must be >= 0, got " + std::to_string(l));
  }
  cfg.arm = Arm::Both;
  std::vector<CVRun> runs;
  for (double l : lambdas) {
    cfg.lambda = l;
    std::filesystem::path dir;
    if (!out_dir.empty()) {
      char name[64];
      std::snprintf(name, sizeof(name), "lambda_%g", l);
      dir = out_dir / name;
    }
    runs.push_back(train_cv(ds, net_cfg, cfg, dir, on_epoch));
  }
  return runs;
}

}  // namespace factoreeg
