#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "factoreeg/trainer.hpp"

namespace factoreeg {

/// Fraction of exact matches. Throws on empty input or length mismatch.
double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels);

/// ||Zc' Zs||_F / (||Zc||_F ||Zs||_F) for row-major [N,D] matrices; in [0,1].
/// This is a normalized Frobenius overlap, 0 iff the column spaces are orthogonal.
double orthogonality_index(const Tensor& zc, const Tensor& zs);

/// Population mean and standard deviation.
double mean_of(std::span<const double> xs);
double stddev_of(std::span<const double> xs);

// ---------------------------------------------------------------------------
// Experiment runners.

CVRun run_ablation(const EEGDataset& ds, const NetConfig& net_cfg, TrainConfig cfg, Arm mode,
                   const std::filesystem::path& out_dir = {}, const EpochCallback& on_epoch = {});

/// One train_cv per lambda with a shared base seed, full method.
std::vector<CVRun> lambda_sweep(const EEGDataset& ds, const NetConfig& net_cfg, TrainConfig cfg,
                                std::span<const double> lambdas, const std::filesystem::path& out_dir = {},
                                const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------
// Feature export.

enum class FeatureSource { Zc, Zs, ClassifierHidden };

std::string to_string(FeatureSource s);
FeatureSource parse_feature_source(const std::string& name);

struct FeatureRow {
  int trial_id = 0;
  int label = 0;
  FeatureSource source = FeatureSource::Zc;
  std::vector<double> values;
};

struct FeatureDump {
  std::vector<FeatureRow> rows;
};

/// Inference-mode features for every task trial (first crop of each), one row
/// per (trial, source). ClassifierHidden is the classifier's last hidden layer.
FeatureDump export_features(const FactorModel& model, const EEGDataset& ds,
                            std::span<const FeatureSource> sources, Arm arm = Arm::Both);

/// CSV with header `trial_id,class,source,f0,f1,...`. Rows of different
/// widths are padded with empty cells up to the widest source.
void write_feature_csv(const FeatureDump& dump, std::ostream& out);

// ---------------------------------------------------------------------------
// Report serialization.

std::string cv_report_json(const CVReport& report);
CVReport parse_cv_report_json(const std::string& text);
std::string cv_report_csv(const CVReport& report);

/// Fixed-width text table of a report; a pure function of its input.
std::string render_report_table(const CVReport& report);

std::string run_log_header_line(const NetConfig& net, const TrainConfig& cfg);
std::string epoch_log_line(const EpochLog& log);

}  // namespace factoreeg
