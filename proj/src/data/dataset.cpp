#include <algorithm>
#include <set>

#include "factoreeg/data.hpp"
#include "factoreeg/error.hpp"

namespace factoreeg {

void EEGDataset::validate() const {
  if (n_channels == 0 || trial_samples == 0) throw DataError(name + ": empty trial geometry");
  if (class_names.empty()) throw DataError(name + ": no classes");
  if (!(sample_rate_hz > 0.0)) throw DataError(name + ": sample rate must be positive");

  std::set<int> ids;
  std::vector<bool> seen(class_names.size(), false);
  auto check = [&](const EEGTrial& t, bool resting) {
    if (t.n_channels != n_channels || t.n_samples != trial_samples ||
        t.samples.size() != n_channels * trial_samples) {
      throw DataError(name + ": trial " + std::to_string(t.trial_id) + " has extents " +
                      std::to_string(t.n_channels) + "x" + std::to_string(t.n_samples) +
                      ", dataset expects " + std::to_string(n_channels) + "x" +
                      std::to_string(trial_samples));
    }
    if (resting != t.is_resting()) {
      throw DataError(name + ": trial " + std::to_string(t.trial_id) + " filed in the wrong pool");
    }
    if (!resting) {
      if (t.label < 0 || static_cast<std::size_t>(t.label) >= class_names.size()) {
        throw DataError(name + ": trial " + std::to_string(t.trial_id) + " has label " +
                        std::to_string(t.label) + " outside [0," +
                        std::to_string(class_names.size()) + ")");
      }
      seen[static_cast<std::size_t>(t.label)] = true;
    }
    if (!ids.insert(t.trial_id).second) {
      throw DataError(name + ": duplicate trial id " + std::to_string(t.trial_id));
    }
  };
  for (const auto& t : trials) check(t, false);
  for (const auto& t : resting) check(t, true);
  if (!trials.empty() && !std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    throw DataError(name + ": class indices are not dense (some class has no trials)");
  }
}

std::vector<FoldSplit> split_folds(const EEGDataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 3) {
    throw ConfigError("split_folds: k must be >= 3 so that test, validation and training blocks all exist");
  }
  const std::size_t n_classes = ds.n_classes();
  std::vector<std::vector<int>> per_class(n_classes);
  for (const auto& t : ds.trials) per_class[static_cast<std::size_t>(t.label)].push_back(t.trial_id);

  Rng rng(seed);
  std::vector<std::vector<std::vector<int>>> blocks(n_classes);  // [class][block] -> ids
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto& ids = per_class[c];
    if (ids.empty() || ids.size() % k != 0) {
      throw ConfigError("split_folds: class " + std::to_string(c) + " has " +
                        std::to_string(ids.size()) + " trials, not divisible into " +
                        std::to_string(k) + " folds");
    }
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t block = ids.size() / k;
    for (std::size_t b = 0; b < k; ++b) {
      blocks[c].emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(b * block),
                             ids.begin() + static_cast<std::ptrdiff_t>((b + 1) * block));
    }
  }

  std::vector<FoldSplit> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    FoldSplit& split = folds[f];
    split.fold = f;
    const std::size_t val_block = (f + 1) % k;
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t b = 0; b < k; ++b) {
        auto& dst = b == f ? split.test_ids : b == val_block ? split.val_ids : split.train_ids;
        dst.insert(dst.end(), blocks[c][b].begin(), blocks[c][b].end());
      }
    }
  }
  return folds;
}

std::vector<const EEGTrial*> sample_resting_batch(const EEGDataset& ds, std::size_t n, Rng& rng) {
  if (n == 0) return {};
  if (ds.resting.empty()) throw DataError(ds.name + ": resting pool is empty");
  std::uniform_int_distribution<std::size_t> pick(0, ds.resting.size() - 1);
  std::vector<const EEGTrial*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&ds.resting[pick(rng)]);
  return out;
}

const EEGTrial& find_trial(const EEGDataset& ds, int trial_id) {
  auto it = std::find_if(ds.trials.begin(), ds.trials.end(),
                         [&](const EEGTrial& t) { return t.trial_id == trial_id; });
  if (it == ds.trials.end()) throw DataError(ds.name + ": no task trial with id " + std::to_string(trial_id));
  return *it;
}

}  // namespace factoreeg
