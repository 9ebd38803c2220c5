#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "factoreeg/ops.hpp"
#include "factoreeg/tensor.hpp"

namespace factoreeg {

/// Geometry of the two encoders and the two MLP heads. Every layer width is
/// derived from these fields.
struct NetConfig {
  std::size_t n_eeg_channels = 24;
  std::size_t n_timesamples = 997;
  std::size_t n_classes = 6;
  std::size_t n_feature_maps = 40;
  std::size_t temporal_kernel = 48;
  std::size_t spatial_kernel = 24;
  std::size_t pool_kernel = 68;
  std::size_t pool_stride = 14;
  double dropout_p = 0.5;

  /// Throws ConfigError when an invariant fails.
  void validate() const;

  std::size_t conv_time() const { return n_timesamples - temporal_kernel + 1; }
  std::size_t spatial_rows() const { return n_eeg_channels - spatial_kernel + 1; }
  std::size_t pooled_time() const { return window_count(conv_time(), pool_kernel, pool_stride); }
  /// Time axis of a feature map. Equals pooled_time() when the spatial kernel spans every channel.
  std::size_t feature_time() const { return spatial_rows() * pooled_time(); }
  /// Flattened size of one feature map, F x T.
  std::size_t feature_size() const { return n_feature_maps * feature_time(); }

  /// in -> in/2 -> in/4 -> in/8 -> n_classes, with in = 2 x feature_size().
  std::vector<std::size_t> classifier_widths() const;
  /// in -> in/2 -> in/4 -> in/8 -> 2, with in = feature_size().
  std::vector<std::size_t> discriminator_widths() const;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// The reference geometry: 24 channels x 997 samples gives 40 x 64 feature maps.
NetConfig reference_net_config();

struct EncoderParams {
  Tensor temporal_weight;  // [F, 1, 1, kT]
  Tensor temporal_bias;    // [F]
  Tensor spatial_weight;   // [F, F, kS, 1]
  Tensor spatial_bias;     // [F]

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

struct MlpParams {
  std::vector<Tensor> weights;  // [in, out] per layer
  std::vector<Tensor> biases;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

enum class ParamGroup { Fc, Fs, Classifier, Discriminator };

struct FactorModel {
  NetConfig config;
  EncoderParams fc;
  EncoderParams fs;
  MlpParams classifier;
  MlpParams discriminator;

  /// Parameter tensors of one group in a fixed order.
  std::vector<Tensor*> group(ParamGroup g);
  std::vector<const Tensor*> group(ParamGroup g) const;

  /// (name, tensor) for every parameter, in checkpoint order.
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;

  friend bool operator==(const FactorModel&, const FactorModel&) = default;
};

/// Uniform(+-1/sqrt(fan_in)) weights, zero biases. Deterministic in `seed`.
FactorModel build_model(const NetConfig& config, std::uint64_t seed);

/// FNV-1a over the raw bytes of every tensor in the group.
std::uint64_t param_hash(const FactorModel& model, ParamGroup g);

// ---------------------------------------------------------------------------
// Tape-level forward passes.

struct EncoderVars {
  Var temporal_weight, temporal_bias, spatial_weight, spatial_bias;
};

struct MlpVars {
  std::vector<Var> weights, biases;
};

EncoderVars bind(Tape& tape, const EncoderParams& params, bool requires_grad);
MlpVars bind(Tape& tape, const MlpParams& params, bool requires_grad);

/// Dropout switch and the generator that feeds it.
struct ForwardMode {
  bool training = false;
  Rng* rng = nullptr;
};

/// X [B,1,channels,T] -> feature map [B,F,T_out].
Var encode(const EncoderVars& enc, Var x, const NetConfig& cfg, ForwardMode mode);

/// Concatenates the two maps along time, flattens, and runs the classifier MLP.
/// `hidden`, when given, receives each hidden layer's post-activation output.
Var classify(const MlpVars& mlp, Var z_c, Var z_s, const NetConfig& cfg, ForwardMode mode,
             std::vector<Var>* hidden = nullptr);

/// Flattens one feature map and runs the discriminator MLP; logit 1 is "real".
Var discriminate(const MlpVars& mlp, Var z, const NetConfig& cfg, ForwardMode mode);

// ---------------------------------------------------------------------------
// Inference-mode conveniences (dropout off).

Tensor forward_fc(const FactorModel& model, const Tensor& x);
Tensor forward_fs(const FactorModel& model, const Tensor& x);
Tensor forward_classifier(const FactorModel& model, const Tensor& z_c, const Tensor& z_s);
Tensor forward_discriminator(const FactorModel& model, const Tensor& z);

// ---------------------------------------------------------------------------
// Checkpoints: "FBCICKPT", u32 version, NetConfig, then named f64 tensors.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const FactorModel& model, const std::filesystem::path& path);
FactorModel load_checkpoint(const std::filesystem::path& path);

}  // namespace factoreeg
