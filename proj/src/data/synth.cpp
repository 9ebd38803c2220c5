#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "factoreeg/data.hpp"
#include "factoreeg/error.hpp"

namespace factoreeg {

void SynthConfig::validate() const {
  if (n_classes < 2) throw ConfigError("SynthConfig: n_classes must be >= 2");
  if (trials_per_class < 1 || n_resting < 1 || n_channels < 1 || trial_samples < 1) {
    throw ConfigError("SynthConfig: counts must be >= 1");
  }
  if (!(sample_rate_hz > 60.0)) {
    throw ConfigError("SynthConfig: sample rate must exceed 60 Hz to carry the 8-30 Hz band");
  }
  if (!(specific_amplitude >= 0.0) || !(common_amplitude >= 0.0) || !(noise_std >= 0.0)) {
    throw ConfigError("SynthConfig: amplitudes and noise_std must be >= 0");
  }
}

namespace {

constexpr double kBandLow = 8.0;
constexpr double kBandHigh = 30.0;
// Noise draws come from their own stream so that changing an amplitude leaves
// them untouched.
constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ULL;

struct Sinusoid {
  double amplitude, freq_hz, phase;
};

struct Layout {
  std::vector<std::size_t> channels;  // shared subset
  std::vector<double> gains;          // one per shared channel
  std::vector<Sinusoid> common;
  std::vector<Sinusoid> specific;  // one per class
};

Layout make_layout(const SynthConfig& cfg) {
  Rng rng(cfg.seed);
  Layout layout;
  std::vector<std::size_t> order(cfg.n_channels);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_shared = std::max<std::size_t>(1, cfg.n_channels / 3);
  layout.channels.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_shared));
  std::sort(layout.channels.begin(), layout.channels.end());

  std::uniform_real_distribution<double> gain(0.5, 1.0);
  for (std::size_t i = 0; i < n_shared; ++i) layout.gains.push_back(gain(rng));

  std::uniform_real_distribution<double> band(kBandLow, kBandHigh);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  for (int i = 0; i < 3; ++i) {
    const double a = amp(rng);
    const double f = band(rng);
    layout.common.push_back({cfg.common_amplitude * a, f, phase(rng)});
  }

  // Class k oscillates near the k-th slot of the band, with its own phase.
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  const double slot = (kBandHigh - kBandLow) / static_cast<double>(cfg.n_classes);
  for (std::size_t k = 0; k < cfg.n_classes; ++k) {
    const double f = kBandLow + slot * (static_cast<double>(k) + 0.5) + jitter(rng);
    layout.specific.push_back({1.0, f, phase(rng)});
  }
  return layout;
}

std::vector<double> render(const std::vector<Sinusoid>& parts, std::size_t n, double fs) {
  std::vector<double> out(n, 0.0);
  for (const auto& s : parts) {
    for (std::size_t t = 0; t < n; ++t) {
      out[t] += s.amplitude *
                std::sin(2.0 * std::numbers::pi * s.freq_hz * static_cast<double>(t) / fs + s.phase);
    }
  }
  return out;
}

std::vector<std::string> default_class_names(std::size_t n) {
  static const char* kDirections[] = {"left", "right", "up", "down", "forward", "backward"};
  std::vector<std::string> names;
  for (std::size_t k = 0; k < n; ++k) {
    names.push_back(n == 6 ? kDirections[k] : "class_" + std::to_string(k));
  }
  return names;
}

}  // namespace

std::vector<std::size_t> shared_channels(const SynthConfig& cfg) {
  cfg.validate();
  return make_layout(cfg).channels;
}

EEGDataset synthesize_sparse_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const Layout layout = make_layout(cfg);
  const std::size_t C = cfg.n_channels, T = cfg.trial_samples;
  const std::vector<double> common = render(layout.common, T, cfg.sample_rate_hz);
  std::vector<std::vector<double>> specific;
  for (const auto& s : layout.specific) specific.push_back(render({s}, T, cfg.sample_rate_hz));

  Rng noise_rng(cfg.seed ^ kNoiseStream);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto make_trial = [&](int label, int id) {
    EEGTrial trial;
    trial.n_channels = C;
    trial.n_samples = T;
    trial.label = label;
    trial.session = 1;
    trial.trial_id = id;
    trial.samples.resize(C * T);
    for (double& v : trial.samples) v = cfg.noise_std * noise(noise_rng);
    const double alpha = label == kRestingLabel ? 0.0 : cfg.specific_amplitude;
    for (std::size_t i = 0; i < layout.channels.size(); ++i) {
      double* row = &trial.samples[layout.channels[i] * T];
      const double g = layout.gains[i];
      for (std::size_t t = 0; t < T; ++t) {
        double signal = common[t];
        if (alpha != 0.0) signal += alpha * specific[static_cast<std::size_t>(label)][t];
        row[t] += g * signal;
      }
    }
    // Stored on disk as f32; keep memory identical to what a reload produces.
    for (double& v : trial.samples) v = static_cast<double>(static_cast<float>(v));
    return trial;
  };

  EEGDataset ds;
  ds.name = "synthetic-sparse-seed" + std::to_string(cfg.seed);
  ds.sample_rate_hz = cfg.sample_rate_hz;
  ds.n_channels = C;
  ds.trial_samples = T;
  ds.class_names = default_class_names(cfg.n_classes);

  int next_id = 0;
  for (std::size_t k = 0; k < cfg.n_classes; ++k) {
    for (std::size_t j = 0; j < cfg.trials_per_class; ++j) {
      ds.trials.push_back(make_trial(static_cast<int>(k), next_id++));
    }
  }
  for (std::size_t r = 0; r < cfg.n_resting; ++r) ds.resting.push_back(make_trial(kRestingLabel, next_id++));
  return ds;
}

}  // namespace factoreeg
