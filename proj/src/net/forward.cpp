#include "factoreeg/error.hpp"
#include "factoreeg/net.hpp"

namespace factoreeg {

EncoderVars bind(Tape& tape, const EncoderParams& p, bool requires_grad) {
  return {tape.leaf(p.temporal_weight, requires_grad), tape.leaf(p.temporal_bias, requires_grad),
          tape.leaf(p.spatial_weight, requires_grad), tape.leaf(p.spatial_bias, requires_grad)};
}

MlpVars bind(Tape& tape, const MlpParams& p, bool requires_grad) {
  MlpVars m;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    m.weights.push_back(tape.leaf(p.weights[i], requires_grad));
    m.biases.push_back(tape.leaf(p.biases[i], requires_grad));
  }
  return m;
}

namespace {

Var maybe_dropout(Var x, const NetConfig& cfg, ForwardMode mode) {
  if (!mode.training || cfg.dropout_p == 0.0) return x;
  if (!mode.rng) throw Error("training-mode forward pass needs a random generator");
  return dropout(x, cfg.dropout_p, true, *mode.rng);
}

void check_feature_map(const char* who, Var z, const NetConfig& cfg) {
  const Shape& s = z.shape();
  if (s.size() != 3 || s[1] != cfg.n_feature_maps || s[2] != cfg.feature_time()) {
    throw ShapeError(std::string(who) + ": feature map must be [B," +
                     std::to_string(cfg.n_feature_maps) + "," + std::to_string(cfg.feature_time()) +
                     "], got " + shape_str(s));
  }
}

Var run_mlp(const MlpVars& mlp, Var h, const NetConfig& cfg, ForwardMode mode,
            std::vector<Var>* hidden) {
  const std::size_t layers = mlp.weights.size();
  for (std::size_t i = 0; i < layers; ++i) {
    h = linear(h, mlp.weights[i], mlp.biases[i]);
    if (i + 1 < layers) {
      h = elu(h);
      if (hidden) hidden->push_back(h);
      h = maybe_dropout(h, cfg, mode);
    }
  }
  return h;
}

}  // namespace

Var encode(const EncoderVars& enc, Var x, const NetConfig& cfg, ForwardMode mode) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != 1 || s[2] != cfg.n_eeg_channels || s[3] != cfg.n_timesamples) {
    throw ShapeError("encoder input must be [B,1," + std::to_string(cfg.n_eeg_channels) + "," +
                     std::to_string(cfg.n_timesamples) + "], got " + shape_str(s));
  }
  Var h = conv2d(x, enc.temporal_weight, enc.temporal_bias);
  h = conv2d(h, enc.spatial_weight, enc.spatial_bias);
  h = avg_pool2d(h, {1, cfg.pool_kernel}, {1, cfg.pool_stride});
  h = elu(h);
  h = maybe_dropout(h, cfg, mode);
  return reshape(h, {s[0], cfg.n_feature_maps, cfg.feature_time()});
}

Var classify(const MlpVars& mlp, Var z_c, Var z_s, const NetConfig& cfg, ForwardMode mode,
             std::vector<Var>* hidden) {
  check_feature_map("classifier", z_c, cfg);
  check_feature_map("classifier", z_s, cfg);
  return run_mlp(mlp, flatten(concat_time(z_c, z_s)), cfg, mode, hidden);
}

Var discriminate(const MlpVars& mlp, Var z, const NetConfig& cfg, ForwardMode mode) {
  check_feature_map("discriminator", z, cfg);
  return run_mlp(mlp, flatten(z), cfg, mode, nullptr);
}

Tensor forward_fc(const FactorModel& model, const Tensor& x) {
  Tape tape;
  return encode(bind(tape, model.fc, false), tape.leaf(x), model.config, {}).value();
}

Tensor forward_fs(const FactorModel& model, const Tensor& x) {
  Tape tape;
  return encode(bind(tape, model.fs, false), tape.leaf(x), model.config, {}).value();
}

Tensor forward_classifier(const FactorModel& model, const Tensor& z_c, const Tensor& z_s) {
  Tape tape;
  return classify(bind(tape, model.classifier, false), tape.leaf(z_c), tape.leaf(z_s), model.config, {})
      .value();
}

Tensor forward_discriminator(const FactorModel& model, const Tensor& z) {
  Tape tape;
  return discriminate(bind(tape, model.discriminator, false), tape.leaf(z), model.config, {}).value();
}

}  // namespace factoreeg
