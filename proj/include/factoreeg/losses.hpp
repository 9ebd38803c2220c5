#pragma once

#include <cstddef>
#include <span>

#include "factoreeg/tape.hpp"

namespace factoreeg {

/// Discriminator target: task-trial features are real, resting-state features are fake.
enum class RealFake : std::size_t { Fake = 0, Real = 1 };

/// Per-step (or epoch-mean) values of every objective.
struct LossRecord {
  double l_cls = 0.0;
  double l_adv_d = 0.0;
  double l_adv_fc = 0.0;
  double l_diff = 0.0;
  double l_all = 0.0;
  double lambda = 1.0;

  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

/// Mean softmax cross-entropy of logits [B,C] against class indices.
Var cross_entropy(Var logits, std::span<const std::size_t> labels);

/// Classification objective: cross-entropy over the class logits.
Var cls_loss(Var logits, std::span<const std::size_t> labels);

/// Discriminator objective: mean of CE(real batch, Real) and CE(fake batch, Fake).
Var adv_loss_d(Var d_real_logits, Var d_fake_logits);

/// Encoder-side adversarial objective: the fake batch scored against Real.
Var adv_loss_fc(Var d_fake_logits);

/// (1/B) sum_i ||z_c^i' z_s^i||_F^2 over [B,F,T] feature maps.
Var diff_loss(Var z_c, Var z_s);

/// l_cls + l_adv_fc + lambda * l_diff.
Var total_loss(Var l_cls, Var l_adv_fc, Var l_diff, double lambda);

/// Scalar form; throws NumericError on a non-finite component.
double total_loss(double l_cls, double l_adv_fc, double l_diff, double lambda);

}  // namespace factoreeg
