#include <cmath>
#include <cstring>

#include "factoreeg/error.hpp"
#include "factoreeg/net.hpp"

namespace factoreeg {

void NetConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("NetConfig: " + msg); };
  if (n_eeg_channels < 1 || n_timesamples < 1 || n_classes < 2 || n_feature_maps < 1) {
    fail("channels, samples and feature maps must be >= 1 and classes >= 2");
  }
  if (temporal_kernel < 1 || spatial_kernel < 1 || pool_kernel < 1 || pool_stride < 1) {
    fail("kernels and strides must be >= 1");
  }
  if (spatial_kernel > n_eeg_channels) fail("spatial_kernel exceeds n_eeg_channels");
  if (temporal_kernel > n_timesamples) fail("temporal_kernel exceeds n_timesamples");
  if (pool_kernel > conv_time()) fail("pool_kernel exceeds the temporal convolution output");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must lie in [0, 1)");
}

namespace {

std::vector<std::size_t> halving_widths(std::size_t in, std::size_t out) {
  return {in, std::max<std::size_t>(1, in / 2), std::max<std::size_t>(1, in / 4),
          std::max<std::size_t>(1, in / 8), out};
}

}  // namespace

std::vector<std::size_t> NetConfig::classifier_widths() const {
  return halving_widths(2 * feature_size(), n_classes);
}

std::vector<std::size_t> NetConfig::discriminator_widths() const {
  return halving_widths(feature_size(), 2);
}

NetConfig reference_net_config() { return NetConfig{}; }

std::vector<Tensor*> FactorModel::group(ParamGroup g) {
  auto encoder = [](EncoderParams& e) {
    return std::vector<Tensor*>{&e.temporal_weight, &e.temporal_bias, &e.spatial_weight,
                                &e.spatial_bias};
  };
  auto mlp = [](MlpParams& m) {
    std::vector<Tensor*> out;
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
      out.push_back(&m.weights[i]);
      out.push_back(&m.biases[i]);
    }
    return out;
  };
  switch (g) {
    case ParamGroup::Fc: return encoder(fc);
    case ParamGroup::Fs: return encoder(fs);
    case ParamGroup::Classifier: return mlp(classifier);
    case ParamGroup::Discriminator: return mlp(discriminator);
  }
  return {};
}

std::vector<const Tensor*> FactorModel::group(ParamGroup g) const {
  auto mut = const_cast<FactorModel*>(this)->group(g);
  return {mut.begin(), mut.end()};
}

std::vector<std::pair<std::string, const Tensor*>> FactorModel::named_parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  auto encoder = [&](const std::string& prefix, const EncoderParams& e) {
    out.emplace_back(prefix + ".temporal.weight", &e.temporal_weight);
    out.emplace_back(prefix + ".temporal.bias", &e.temporal_bias);
    out.emplace_back(prefix + ".spatial.weight", &e.spatial_weight);
    out.emplace_back(prefix + ".spatial.bias", &e.spatial_bias);
  };
  auto mlp = [&](const std::string& prefix, const MlpParams& m) {
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
      out.emplace_back(prefix + "." + std::to_string(i) + ".weight", &m.weights[i]);
      out.emplace_back(prefix + "." + std::to_string(i) + ".bias", &m.biases[i]);
    }
  };
  encoder("fc", fc);
  encoder("fs", fs);
  mlp("classifier", classifier);
  mlp("discriminator", discriminator);
  return out;
}

namespace {

Tensor uniform_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data) v = dist(rng);
  return t;
}

EncoderParams init_encoder(const NetConfig& c, Rng& rng) {
  const std::size_t F = c.n_feature_maps;
  EncoderParams e;
  e.temporal_weight = uniform_weight({F, 1, 1, c.temporal_kernel}, c.temporal_kernel, rng);
  e.temporal_bias = Tensor::zeros({F});
  e.spatial_weight = uniform_weight({F, F, c.spatial_kernel, 1}, F * c.spatial_kernel, rng);
  e.spatial_bias = Tensor::zeros({F});
  return e;
}

MlpParams init_mlp(const std::vector<std::size_t>& widths, Rng& rng) {
  MlpParams m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    m.weights.push_back(uniform_weight({widths[i], widths[i + 1]}, widths[i], rng));
    m.biases.push_back(Tensor::zeros({widths[i + 1]}));
  }
  return m;
}

}  // namespace

FactorModel build_model(const NetConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  FactorModel m;
  m.config = config;
  m.fc = init_encoder(config, rng);
  m.fs = init_encoder(config, rng);
  m.classifier = init_mlp(config.classifier_widths(), rng);
  m.discriminator = init_mlp(config.discriminator_widths(), rng);
  return m;
}

std::uint64_t param_hash(const FactorModel& model, ParamGroup g) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Tensor* t : model.group(g)) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t->data.data());
    for (std::size_t i = 0; i < t->data.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace factoreeg
