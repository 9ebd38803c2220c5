#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "factoreeg/error.hpp"
#include "factoreeg/eval.hpp"

using namespace factoreeg;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "factoreeg_data_tests" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

SynthConfig small_synth(std::uint64_t seed = 3) {
  SynthConfig s;
  s.n_classes = 3;
  s.trials_per_class = 5;
  s.n_resting = 4;
  s.n_channels = 6;
  s.trial_samples = 64;
  s.seed = seed;
  return s;
}

// Mean pairwise Euclidean distance between class centroids.
double centroid_spread(const EEGDataset& ds) {
  const std::size_t n = ds.n_channels * ds.trial_samples;
  std::vector<std::vector<double>> centroid(ds.n_classes(), std::vector<double>(n, 0.0));
  std::vector<double> counts(ds.n_classes(), 0.0);
  for (const auto& t : ds.trials) {
    auto& c = centroid[static_cast<std::size_t>(t.label)];
    for (std::size_t i = 0; i < n; ++i) c[i] += t.samples[i];
    counts[static_cast<std::size_t>(t.label)] += 1.0;
  }
  for (std::size_t k = 0; k < centroid.size(); ++k)
    for (double& v : centroid[k]) v /= counts[k];
  double total = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < centroid.size(); ++a)
    for (std::size_t b = a + 1; b < centroid.size(); ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (centroid[a][i] - centroid[b][i]) * (centroid[a][i] - centroid[b][i]);
      total += std::sqrt(s);
      ++pairs;
    }
  return total / pairs;
}

}  // namespace

TEST(Synth, DefaultCounts) {
  const EEGDataset ds = synthesize_sparse_dataset(SynthConfig{});
  EXPECT_EQ(ds.trials.size(), 300u);
  EXPECT_EQ(ds.resting.size(), 50u);
  EXPECT_EQ(ds.n_classes(), 6u);
  EXPECT_EQ(ds.class_names.front(), "left");
  for (const auto& t : ds.trials) {
    EXPECT_EQ(t.n_channels, 24u);
    EXPECT_EQ(t.n_samples, 997u);
    EXPECT_EQ(t.samples.size(), 24u * 997u);
  }
  for (const auto& t : ds.resting) EXPECT_TRUE(t.is_resting());
  EXPECT_NO_THROW(ds.validate());
  EXPECT_EQ(shared_channels(SynthConfig{}).size(), 8u);
}

TEST(Synth, SeedDeterminism) {
  EXPECT_EQ(synthesize_sparse_dataset(small_synth(4)), synthesize_sparse_dataset(small_synth(4)));
  EXPECT_NE(synthesize_sparse_dataset(small_synth(4)), synthesize_sparse_dataset(small_synth(5)));
}

TEST(Synth, RejectsInvalidConfig) {
  SynthConfig s = small_synth();
  s.n_classes = 1;
  EXPECT_THROW(synthesize_sparse_dataset(s), ConfigError);
  s = small_synth();
  s.noise_std = -1.0;
  EXPECT_THROW(synthesize_sparse_dataset(s), ConfigError);
  s = small_synth();
  s.sample_rate_hz = 50.0;
  EXPECT_THROW(synthesize_sparse_dataset(s), ConfigError);
}

TEST(Synth, ClassSignalOnlyOnSharedChannels) {
  SynthConfig s = small_synth();
  s.noise_std = 0.0;
  const EEGDataset ds = synthesize_sparse_dataset(s);
  const auto shared = shared_channels(s);
  for (std::size_t c = 0; c < s.n_channels; ++c) {
    const bool is_shared = std::find(shared.begin(), shared.end(), c) != shared.end();
    double energy = 0.0;
    for (std::size_t t = 0; t < s.trial_samples; ++t) energy += std::abs(ds.trials[0].at(c, t));
    if (is_shared) {
      EXPECT_GT(energy, 0.0);
    } else {
      EXPECT_EQ(energy, 0.0);
    }
  }
}

TEST(Synth, CentroidSpreadScalesWithAlpha) {
  SynthConfig s;
  s.noise_std = 0.02;
  s.seed = 9;
  std::vector<double> spread;
  for (double a : {0.0, 0.3, 0.6}) {
    s.specific_amplitude = a;
    spread.push_back(centroid_spread(synthesize_sparse_dataset(s)));
  }
  EXPECT_LT(spread[0], 0.1 * spread[1]);
  EXPECT_NEAR(spread[2] / spread[1], 2.0, 0.2);
}

TEST(Synth, RestingPowerIsInBand) {
  const SynthConfig s;  // reference geometry
  const EEGDataset ds = synthesize_sparse_dataset(s);
  const std::size_t T = ds.trial_samples;
  double in_band = 0.0, out_band = 0.0;
  for (const auto& trial : ds.resting) {
    std::vector<double> mean(T, 0.0);
    for (std::size_t c = 0; c < trial.n_channels; ++c)
      for (std::size_t t = 0; t < T; ++t) mean[t] += trial.at(c, t) / static_cast<double>(trial.n_channels);
    for (std::size_t k = 1; k <= T / 2; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t t = 0; t < T; ++t)
        acc += mean[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(T));
      const double freq = static_cast<double>(k) * s.sample_rate_hz / static_cast<double>(T);
      (freq >= 8.0 && freq <= 30.0 ? in_band : out_band) += std::norm(acc);
    }
  }
  EXPECT_GT(in_band, 2.0 * out_band);
}

TEST(Synth, ZeroAlphaGivesChanceAccuracy) {
  SynthConfig s;
  s.n_classes = 6;
  s.trials_per_class = 20;
  s.n_resting = 10;
  s.n_channels = 3;
  s.trial_samples = 40;
  s.specific_amplitude = 0.0;
  NetConfig net;
  net.n_eeg_channels = 3;
  net.n_timesamples = 40;
  net.n_feature_maps = 4;
  net.temporal_kernel = 5;
  net.spatial_kernel = 3;
  net.pool_kernel = 6;
  net.pool_stride = 3;
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.checkpoint_after_epoch = 2;
  double mean = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    s.seed = seed;
    cfg.seed = seed;
    mean += train_cv(synthesize_sparse_dataset(s), net, cfg).report.mean / 3.0;
  }
  EXPECT_NEAR(mean, 1.0 / 6.0, 0.08);
}

TEST(DatasetIo, RoundTripDefault) {
  const EEGDataset ds = synthesize_sparse_dataset(SynthConfig{});
  const auto dir = fresh_dir("default");
  save_dataset(ds, dir);
  EXPECT_EQ(load_dataset(dir), ds);
  EXPECT_TRUE(std::filesystem::exists(dir / "trial_00000.eegt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "rest_00300.eegt"));
}

TEST(DatasetIo, RoundTripRandomSmallDatasets) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig s = small_synth(seed);
    s.n_classes = 2 + seed % 4;
    s.n_channels = 1 + seed % 5;
    s.trial_samples = 16 + 7 * seed;
    const EEGDataset ds = synthesize_sparse_dataset(s);
    const auto dir = fresh_dir("random" + std::to_string(seed));
    save_dataset(ds, dir);
    EXPECT_EQ(load_dataset(dir), ds);
  }
}

TEST(DatasetIo, SavingTwiceIsByteIdentical) {
  const EEGDataset ds = synthesize_sparse_dataset(small_synth());
  const auto a = fresh_dir("twice_a"), b = fresh_dir("twice_b");
  save_dataset(ds, a);
  save_dataset(ds, b);
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    EXPECT_EQ(read_file(entry.path()), read_file(b / entry.path().filename())) << entry.path();
  }
}

TEST(DatasetIo, CorruptedMagic) {
  const auto dir = fresh_dir("magic");
  save_dataset(synthesize_sparse_dataset(small_synth()), dir);
  std::string bytes = read_file(dir / "trial_00000.eegt");
  bytes[1] = 'X';
  write_file(dir / "trial_00000.eegt", bytes);
  EXPECT_THROW(load_dataset(dir), MagicMismatchError);
}

TEST(DatasetIo, TruncatedTrialReportsOffset) {
  const auto dir = fresh_dir("trunc");
  save_dataset(synthesize_sparse_dataset(small_synth()), dir);
  const std::string bytes = read_file(dir / "trial_00001.eegt");
  write_file(dir / "trial_00001.eegt", bytes.substr(0, 12 + 10));
  try {
    read_trial_file(dir / "trial_00001.eegt");
    FAIL() << "expected truncation error";
  } catch (const TruncatedFileError& e) {
    EXPECT_EQ(e.offset(), 22u);  // where the data ran out
  }
  EXPECT_THROW(load_dataset(dir), TruncatedFileError);
  write_file(dir / "trial_00001.eegt", bytes.substr(0, 6));
  EXPECT_THROW(read_trial_file(dir / "trial_00001.eegt"), TruncatedFileError);
}

TEST(DatasetIo, MalformedManifestAndHeaders) {
  const auto dir = fresh_dir("manifest");
  save_dataset(synthesize_sparse_dataset(small_synth()), dir);
  write_file(dir / "manifest.json", "{\"name\": 1");
  EXPECT_THROW(load_dataset(dir), MalformedHeaderError);
  EXPECT_THROW(load_dataset(fresh_dir("nowhere")), DataError);

  const auto dir2 = fresh_dir("trailing");
  save_dataset(synthesize_sparse_dataset(small_synth()), dir2);
  write_file(dir2 / "trial_00002.eegt", read_file(dir2 / "trial_00002.eegt") + "junk");
  EXPECT_THROW(load_dataset(dir2), MalformedHeaderError);
}

TEST(DatasetIo, TrialFileLayout) {
  EEGTrial t;
  t.n_channels = 2;
  t.n_samples = 3;
  t.samples = {1, 2, 3, 4, 5, 6.5};
  const auto dir = fresh_dir("layout");
  std::filesystem::create_directories(dir);
  write_trial_file(t, dir / "t.eegt");
  const std::string bytes = read_file(dir / "t.eegt");
  ASSERT_EQ(bytes.size(), 4u + 4u + 4u + 6u * 4u);
  EXPECT_EQ(bytes.substr(0, 4), "EEGT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3u);
  float last;
  std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
  EXPECT_EQ(last, 6.5f);
  EXPECT_EQ(read_trial_file(dir / "t.eegt").samples, t.samples);
}

TEST(SplitFolds, ReferenceCounts) {
  const EEGDataset ds = synthesize_sparse_dataset(SynthConfig{});
  const auto folds = split_folds(ds, 5, 11);
  ASSERT_EQ(folds.size(), 5u);
  std::set<int> tested;
  for (const auto& f : folds) {
    EXPECT_EQ(f.train_ids.size(), 180u);
    EXPECT_EQ(f.val_ids.size(), 60u);
    EXPECT_EQ(f.test_ids.size(), 60u);
    for (std::size_t c = 0; c < 6; ++c) {
      auto count = [&](const std::vector<int>& ids) {
        return std::count_if(ids.begin(), ids.end(), [&](int id) { return find_trial(ds, id).label == static_cast<int>(c); });
      };
      EXPECT_EQ(count(f.train_ids), 30);
      EXPECT_EQ(count(f.val_ids), 10);
      EXPECT_EQ(count(f.test_ids), 10);
    }
    std::set<int> all(f.train_ids.begin(), f.train_ids.end());
    all.insert(f.val_ids.begin(), f.val_ids.end());
    all.insert(f.test_ids.begin(), f.test_ids.end());
    EXPECT_EQ(all.size(), 300u);
    for (int id : f.test_ids) EXPECT_TRUE(tested.insert(id).second) << "test id repeated: " << id;
  }
  EXPECT_EQ(tested.size(), 300u);
}

TEST(SplitFolds, ValidationIsNextFoldsTest) {
  const EEGDataset ds = synthesize_sparse_dataset(small_synth());
  const auto folds = split_folds(ds, 5, 2);
  for (std::size_t f = 0; f < 5; ++f) {
    auto val = folds[f].val_ids, next = folds[(f + 1) % 5].test_ids;
    std::sort(val.begin(), val.end());
    std::sort(next.begin(), next.end());
    EXPECT_EQ(val, next);
  }
  EXPECT_EQ(split_folds(ds, 5, 2)[0].test_ids, folds[0].test_ids);
}

TEST(SplitFolds, RejectsDegenerateK) {
  const EEGDataset ds = synthesize_sparse_dataset(small_synth());
  EXPECT_THROW(split_folds(ds, 1, 0), ConfigError);
  EXPECT_THROW(split_folds(ds, 2, 0), ConfigError);
  EXPECT_THROW(split_folds(ds, 4, 0), ConfigError);  // 5 trials per class
}

TEST(RestingBatch, Contract) {
  const EEGDataset ds = synthesize_sparse_dataset(SynthConfig{});
  Rng rng(1);
  EXPECT_TRUE(sample_resting_batch(ds, 0, rng).empty());
  const auto batch = sample_resting_batch(ds, 100, rng);
  ASSERT_EQ(batch.size(), 100u);
  for (const EEGTrial* t : batch) {
    EXPECT_TRUE(t->is_resting());
    EXPECT_GE(t->trial_id, 300);
    EXPECT_LT(t->trial_id, 350);
  }
  Rng a(5), b(5);
  const auto x = sample_resting_batch(ds, 20, a);
  const auto y = sample_resting_batch(ds, 20, b);
  EXPECT_EQ(x, y);
}

TEST(Dataset, ValidateCatchesInconsistency) {
  EEGDataset ds = synthesize_sparse_dataset(small_synth());
  ds.trials[0].samples.pop_back();
  EXPECT_THROW(ds.validate(), DataError);
  ds = synthesize_sparse_dataset(small_synth());
  ds.trials[1].trial_id = ds.trials[0].trial_id;
  EXPECT_THROW(ds.validate(), DataError);
  ds = synthesize_sparse_dataset(small_synth());
  ds.trials[0].label = 7;
  EXPECT_THROW(ds.validate(), DataError);
  EXPECT_THROW(find_trial(ds, 9999), DataError);
}
