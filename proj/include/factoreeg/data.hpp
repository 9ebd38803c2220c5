#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "factoreeg/ops.hpp"
#include "factoreeg/tensor.hpp"

namespace factoreeg {

inline constexpr int kRestingLabel = -1;

/// One recording: channels x samples, row-major.
struct EEGTrial {
  std::size_t n_channels = 0;
  std::size_t n_samples = 0;
  std::vector<double> samples;
  int label = kRestingLabel;  // class index, or kRestingLabel
  int session = 0;
  int trial_id = 0;

  bool is_resting() const noexcept { return label == kRestingLabel; }
  double at(std::size_t channel, std::size_t t) const { return samples[channel * n_samples + t]; }

  friend bool operator==(const EEGTrial&, const EEGTrial&) = default;
};

struct EEGDataset {
  std::string name;
  double sample_rate_hz = 250.0;
  std::size_t n_channels = 0;
  std::size_t trial_samples = 0;
  std::vector<std::string> class_names;
  std::vector<EEGTrial> trials;   // task trials
  std::vector<EEGTrial> resting;  // resting-state pool

  std::size_t n_classes() const noexcept { return class_names.size(); }

  /// Throws DataError when extents, labels or ids are inconsistent.
  void validate() const;

  friend bool operator==(const EEGDataset&, const EEGDataset&) = default;
};

/// Parameters of the synthetic sparse-condition generator.
///
/// Every task trial is common(t) + alpha * specific_k(t) + noise on a shared
/// channel subset, noise elsewhere. Resting trials use alpha = 0.
struct SynthConfig {
  std::size_t n_classes = 6;
  std::size_t trials_per_class = 50;
  std::size_t n_resting = 50;
  std::size_t n_channels = 24;
  std::size_t trial_samples = 997;
  double sample_rate_hz = 250.0;
  double common_amplitude = 1.0;
  double specific_amplitude = 0.3;
  double noise_std = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Channels carrying the common and class-specific components for a given config.
std::vector<std::size_t> shared_channels(const SynthConfig& cfg);

EEGDataset synthesize_sparse_dataset(const SynthConfig& cfg);

/// Writes `manifest.json` plus one EEGT trial file per trial into `dir`.
void save_dataset(const EEGDataset& ds, const std::filesystem::path& dir);
EEGDataset load_dataset(const std::filesystem::path& dir);

/// Trial file codec: "EEGT", u32 channels, u32 samples, f32 LE row-major.
void write_trial_file(const EEGTrial& trial, const std::filesystem::path& path);
EEGTrial read_trial_file(const std::filesystem::path& path);

struct FoldSplit {
  std::size_t fold = 0;
  std::vector<int> train_ids;
  std::vector<int> val_ids;
  std::vector<int> test_ids;
};

/// Per-class seeded shuffle into k contiguous blocks; fold f tests on block f,
/// validates on block (f+1) mod k and trains on the rest. Resting trials are excluded.
std::vector<FoldSplit> split_folds(const EEGDataset& ds, std::size_t k, std::uint64_t seed);

/// n resting trials drawn with replacement.
std::vector<const EEGTrial*> sample_resting_batch(const EEGDataset& ds, std::size_t n, Rng& rng);

/// Task trial lookup by id.
const EEGTrial& find_trial(const EEGDataset& ds, int trial_id);

}  // namespace factoreeg
