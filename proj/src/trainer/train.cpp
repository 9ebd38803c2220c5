#include <algorithm>
#include <cmath>
#include <numeric>

#include "factoreeg/error.hpp"
#include "factoreeg/eval.hpp"
#include "factoreeg/trainer.hpp"

namespace factoreeg {

std::string to_string(Arm arm) {
  switch (arm) {
    case Arm::Both: return "both";
    case Arm::NoFc: return "no_fc";
    case Arm::NoFs: return "no_fs";
  }
  return "both";
}

Arm parse_arm(const std::string& name) {
  if (name == "both") return Arm::Both;
  if (name == "no_fc") return Arm::NoFc;
  if (name == "no_fs") return Arm::NoFs;
  throw ConfigError("unknown ablation mode '" + name + "' (expected both, no_fc or no_fs)");
}

void TrainConfig::validate(const NetConfig& net) const {
  auto fail = [](const std::string& msg) { throw ConfigError("TrainConfig: " + msg); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (checkpoint_after_epoch >= epochs) fail("checkpoint_after_epoch must be < epochs");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be finite and >= 0");
  if (!(sample_rate_hz > 0.0)) fail("sample_rate_hz must be positive");
  if (crop_window_samples != 0 && crop_window_samples < net.temporal_kernel) {
    fail("crop_window_samples is shorter than the temporal kernel");
  }
  if (n_folds < 3) fail("n_folds must be >= 3");
}

std::size_t TrainConfig::window(std::size_t trial_samples) const {
  return crop_window_samples ? crop_window_samples : trial_samples;
}

std::size_t TrainConfig::stride() const {
  if (crop_stride_samples) return crop_stride_samples;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * sample_rate_hz)));
}

std::vector<Tensor> make_crops(const EEGTrial& trial, std::size_t window, std::size_t stride) {
  if (stride < 1) throw ConfigError("make_crops: stride must be >= 1");
  if (window < 1 || window > trial.n_samples) {
    throw DataError("make_crops: window of " + std::to_string(window) + " samples exceeds trial " +
                    std::to_string(trial.trial_id) + " of length " + std::to_string(trial.n_samples));
  }
  const std::size_t count = window_count(trial.n_samples, window, stride);
  std::vector<Tensor> crops;
  crops.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t offset = k * stride;
    Tensor crop({trial.n_channels, window});
    for (std::size_t c = 0; c < trial.n_channels; ++c) {
      std::copy_n(&trial.samples[c * trial.n_samples + offset], window, &crop.data[c * window]);
    }
    crops.push_back(std::move(crop));
  }
  return crops;
}

Tensor stack_crops(std::span<const Tensor* const> crops) {
  if (crops.empty()) throw ShapeError("stack_crops: empty batch");
  const Shape& s = crops.front()->shape;
  Tensor out({crops.size(), 1, s.at(0), s.at(1)});
  const std::size_t n = crops.front()->numel();
  for (std::size_t b = 0; b < crops.size(); ++b) {
    if (crops[b]->shape != s) throw ShapeError("stack_crops: crops differ in shape");
    std::copy_n(crops[b]->data.begin(), n, out.data.begin() + static_cast<std::ptrdiff_t>(b * n));
  }
  return out;
}

LabeledCrops crops_for(const EEGDataset& ds, std::span<const int> trial_ids, const TrainConfig& cfg) {
  LabeledCrops out;
  const std::size_t window = cfg.window(ds.trial_samples);
  for (int id : trial_ids) {
    const EEGTrial& t = find_trial(ds, id);
    for (auto& c : make_crops(t, window, cfg.stride())) {
      out.crops.push_back(std::move(c));
      out.labels.push_back(static_cast<std::size_t>(t.label));
    }
  }
  return out;
}

std::vector<ParamGroup> generator_groups(Arm arm) {
  switch (arm) {
    case Arm::Both: return {ParamGroup::Fc, ParamGroup::Fs, ParamGroup::Classifier};
    case Arm::NoFc: return {ParamGroup::Fs, ParamGroup::Classifier};
    case Arm::NoFs: return {ParamGroup::Fc, ParamGroup::Classifier};
  }
  return {};
}

namespace {

std::vector<Tensor*> collect(FactorModel& model, const std::vector<ParamGroup>& groups) {
  std::vector<Tensor*> out;
  for (ParamGroup g : groups) {
    auto part = model.group(g);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<Var> vars_of(const EncoderVars& e) {
  return {e.temporal_weight, e.temporal_bias, e.spatial_weight, e.spatial_bias};
}

std::vector<Var> vars_of(const MlpVars& m) {
  std::vector<Var> out;
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    out.push_back(m.weights[i]);
    out.push_back(m.biases[i]);
  }
  return out;
}

double checked(Var scalar, const char* what) {
  const double v = scalar.value().data[0];
  if (!std::isfinite(v)) throw NumericError(std::string(what) + " became non-finite");
  return v;
}

Tensor random_resting_batch(const EEGDataset& ds, std::size_t n, std::size_t window,
                            std::size_t stride, Rng& rng) {
  const auto picks = sample_resting_batch(ds, n, rng);
  const std::size_t n_offsets = window_count(ds.trial_samples, window, stride);
  std::uniform_int_distribution<std::size_t> offset_pick(0, n_offsets - 1);
  Tensor out({n, 1, ds.n_channels, window});
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t offset = offset_pick(rng) * stride;
    const EEGTrial& t = *picks[b];
    for (std::size_t c = 0; c < t.n_channels; ++c) {
      std::copy_n(&t.samples[c * t.n_samples + offset], window,
                  &out.data[(b * t.n_channels + c) * window]);
    }
  }
  return out;
}

}  // namespace

Optimizers make_optimizers(const FactorModel& model, Arm arm) {
  std::vector<const Tensor*> gen;
  for (ParamGroup g : generator_groups(arm)) {
    auto part = model.group(g);
    gen.insert(gen.end(), part.begin(), part.end());
  }
  return {make_adamw_state(gen), make_adamw_state(model.group(ParamGroup::Discriminator))};
}

LossRecord train_epoch(FactorModel& model, const LabeledCrops& train, const EEGDataset& resting_source,
                       const TrainConfig& cfg, Optimizers& optim, Rng& rng,
                       const StepObserver& observer) {
  const NetConfig& net = model.config;
  const std::size_t n = train.crops.size();
  if (n == 0) throw DataError("train_epoch: empty training set");
  const bool adversarial = cfg.arm != Arm::NoFc;
  if (adversarial && resting_source.resting.empty()) {
    throw DataError("train_epoch: resting-state trials are required for adversarial training");
  }
  const std::size_t window = net.n_timesamples;
  const std::size_t stride = cfg.stride();
  const auto gen_groups = generator_groups(cfg.arm);
  const auto gen_params = collect(model, gen_groups);
  const auto disc_params = model.group(ParamGroup::Discriminator);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  double sum_cls = 0.0, sum_adv_d = 0.0, sum_adv_fc = 0.0, sum_diff = 0.0;
  std::size_t batches = 0;
  const ForwardMode train_mode{true, &rng};

  for (std::size_t start = 0; start < n; start += cfg.batch_size) {
    const std::size_t end = std::min(n, start + cfg.batch_size);
    std::vector<const Tensor*> picked;
    std::vector<std::size_t> labels;
    for (std::size_t i = start; i < end; ++i) {
      picked.push_back(&train.crops[order[i]]);
      labels.push_back(train.labels[order[i]]);
    }
    const Tensor x = stack_crops(picked);
    Tensor x_rest;
    if (adversarial) x_rest = random_resting_batch(resting_source, picked.size(), window, stride, rng);

    double l_adv_d = 0.0;
    bool have_adv_d = false;

    // Discriminator update: f_c runs without gradient tracking.
    for (std::size_t s = 0; adversarial && s < cfg.d_steps_per_batch; ++s) {
      Tape tape;
      const EncoderVars fc = bind(tape, model.fc, false);
      const MlpVars d = bind(tape, model.discriminator, true);
      Var z_c = encode(fc, tape.leaf(x), net, train_mode);
      Var z_rest = encode(fc, tape.leaf(x_rest), net, train_mode);
      Var loss = adv_loss_d(discriminate(d, z_c, net, train_mode), discriminate(d, z_rest, net, train_mode));
      l_adv_d = checked(loss, "discriminator loss");
      have_adv_d = true;
      tape.backward(loss);
      std::vector<Tensor> grads;
      for (Var v : vars_of(d)) grads.push_back(tape.grad(v));
      adamw_step(disc_params, grads, optim.discriminator, cfg.lr, cfg.weight_decay);
      if (observer) observer(TrainPhase::DiscriminatorStep, model);
    }

    // Encoders + classifier update with D frozen.
    Tape tape;
    const bool use_fc = cfg.arm != Arm::NoFc;
    const bool use_fs = cfg.arm != Arm::NoFs;
    const EncoderVars fc = bind(tape, model.fc, use_fc);
    const EncoderVars fs = bind(tape, model.fs, use_fs);
    const MlpVars cls = bind(tape, model.classifier, true);
    Var xv = tape.leaf(x);

    Var z_c, z_s;
    if (use_fc) z_c = encode(fc, xv, net, train_mode);
    if (use_fs) z_s = encode(fs, xv, net, train_mode);
    Var logits = cfg.arm == Arm::Both   ? classify(cls, z_c, z_s, net, train_mode)
                 : cfg.arm == Arm::NoFc ? classify(cls, z_s, z_s, net, train_mode)
                                        : classify(cls, z_c, z_c, net, train_mode);
    Var l_cls = cls_loss(logits, labels);
    Var objective = l_cls;
    double adv_fc_value = 0.0, diff_value = 0.0;
    if (adversarial) {
      const MlpVars d = bind(tape, model.discriminator, false);
      Var z_rest = encode(fc, tape.leaf(x_rest), net, train_mode);
      Var l_adv_fc = adv_loss_fc(discriminate(d, z_rest, net, train_mode));
      adv_fc_value = checked(l_adv_fc, "adversarial loss");
      if (!have_adv_d) {
        // No discriminator step this batch; report D's current objective.
        Var d_real = discriminate(d, z_c, net, train_mode);
        Var d_fake = discriminate(d, z_rest, net, train_mode);
        l_adv_d = checked(adv_loss_d(d_real, d_fake), "discriminator loss");
      }
      if (cfg.arm == Arm::Both) {
        Var l_diff = diff_loss(z_c, z_s);
        diff_value = checked(l_diff, "difference loss");
        objective = total_loss(l_cls, l_adv_fc, l_diff, cfg.lambda);
      } else {
        objective = add(l_cls, l_adv_fc);
      }
    }
    const double cls_value = checked(l_cls, "classification loss");
    checked(objective, "total loss");
    tape.backward(objective);

    std::vector<Tensor> grads;
    for (ParamGroup g : gen_groups) {
      const auto vs = g == ParamGroup::Fc ? vars_of(fc) : g == ParamGroup::Fs ? vars_of(fs) : vars_of(cls);
      for (Var v : vs) grads.push_back(tape.grad(v));
    }
    adamw_step(gen_params, grads, optim.generator, cfg.lr, cfg.weight_decay);
    if (observer) observer(TrainPhase::GeneratorStep, model);

    sum_cls += cls_value;
    sum_adv_d += l_adv_d;
    sum_adv_fc += adv_fc_value;
    sum_diff += diff_value;
    ++batches;
  }

  const double nb = static_cast<double>(batches);
  LossRecord rec;
  rec.lambda = cfg.lambda;
  rec.l_cls = sum_cls / nb;
  rec.l_adv_d = sum_adv_d / nb;
  rec.l_adv_fc = sum_adv_fc / nb;
  rec.l_diff = sum_diff / nb;
  rec.l_all = total_loss(rec.l_cls, rec.l_adv_fc, rec.l_diff, rec.lambda);
  return rec;
}

Tensor predict_logits(const FactorModel& model, const Tensor& batch, Arm arm) {
  Tape tape;
  const NetConfig& net = model.config;
  Var x = tape.leaf(batch);
  const MlpVars cls = bind(tape, model.classifier, false);
  Var z_c, z_s;
  if (arm != Arm::NoFc) z_c = encode(bind(tape, model.fc, false), x, net, {});
  if (arm != Arm::NoFs) z_s = encode(bind(tape, model.fs, false), x, net, {});
  if (arm == Arm::NoFc) z_c = z_s;
  if (arm == Arm::NoFs) z_s = z_c;
  return classify(cls, z_c, z_s, net, {}).value();
}

namespace {

// Bounds the size of inference batches so intermediate activations stay small.
constexpr std::size_t kInferenceChunk = 16;

template <typename Fn>
void for_each_chunk(std::size_t n, Fn&& fn) {
  for (std::size_t start = 0; start < n; start += kInferenceChunk) fn(start, std::min(n, start + kInferenceChunk));
}

}  // namespace

double validation_loss(const FactorModel& model, const LabeledCrops& crops, Arm arm) {
  const std::size_t n = crops.crops.size();
  if (n == 0) throw DataError("validation_loss: no validation crops");
  double total = 0.0;
  for_each_chunk(n, [&](std::size_t start, std::size_t end) {
    std::vector<const Tensor*> picked;
    for (std::size_t i = start; i < end; ++i) picked.push_back(&crops.crops[i]);
    Tape tape;
    Var logits = tape.leaf(predict_logits(model, stack_crops(picked), arm));
    std::span<const std::size_t> labels(crops.labels.data() + start, end - start);
    total += cls_loss(logits, labels).value().data[0] * static_cast<double>(end - start);
  });
  const double loss = total / static_cast<double>(n);
  if (!std::isfinite(loss)) throw NumericError("validation loss became non-finite");
  return loss;
}

std::size_t average_and_argmax(const Tensor& scores) {
  if (scores.rank() != 2) throw ShapeError("average_and_argmax: expected [crops, classes]");
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  std::vector<double> mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) mean[c] += scores.data[i * k + c];
  for (double& v : mean) v /= static_cast<double>(n);
  // max_element returns the first maximum, i.e. the lowest index on ties.
  return static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
}

std::size_t predict_trial(const FactorModel& model, const EEGTrial& trial, const TrainConfig& cfg) {
  const auto crops = make_crops(trial, model.config.n_timesamples, cfg.stride());
  const std::size_t k = model.config.n_classes;
  Tensor scores({crops.size(), k});
  for_each_chunk(crops.size(), [&](std::size_t start, std::size_t end) {
    std::vector<const Tensor*> picked;
    for (std::size_t i = start; i < end; ++i) picked.push_back(&crops[i]);
    Tensor logits = predict_logits(model, stack_crops(picked), cfg.arm);
    if (!cfg.average_logits) {
      Tape tape;
      logits = softmax(tape.leaf(logits)).value();
    }
    std::copy(logits.data.begin(), logits.data.end(), scores.data.begin() + static_cast<std::ptrdiff_t>(start * k));
  });
  return average_and_argmax(scores);
}

}  // namespace factoreeg
