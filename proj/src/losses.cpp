#include "factoreeg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "factoreeg/error.hpp"
#include "factoreeg/ops.hpp"

namespace factoreeg {

Var cross_entropy(Var logits, std::span<const std::size_t> labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2) throw ShapeError("cross_entropy: logits must be [B,C], got " + shape_str(s));
  const std::size_t B = s[0], C = s[1];
  if (labels.size() != B) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(B));
  }
  for (std::size_t y : labels) {
    if (y >= C) throw ShapeError("cross_entropy: label " + std::to_string(y) + " out of range [0," +
                                 std::to_string(C) + ")");
  }

  // Row softmax kept for the backward pass: d/dlogits = (p - onehot) / B.
  std::vector<double> probs = logits.value().data;
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    double* row = &probs[b * C];
    const double mx = *std::max_element(row, row + C);
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) total += std::exp(row[c] - mx);
    const double log_z = mx + std::log(total);
    loss += log_z - row[labels[b]];
    for (std::size_t c = 0; c < C; ++c) row[c] = std::exp(row[c] - log_z);
  }
  loss /= static_cast<double>(B);

  std::vector<std::size_t> targets(labels.begin(), labels.end());
  return logits.tape()->record(
      "cross_entropy", Tensor({1}, {loss}), {logits},
      [=, probs = std::move(probs), targets = std::move(targets)](Tape& t, std::span<const double> g) {
        auto gl = t.grad_of(logits);
        const double w = g[0] / static_cast<double>(B);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t c = 0; c < C; ++c) {
            const double onehot = targets[b] == c ? 1.0 : 0.0;
            gl[b * C + c] += w * (probs[b * C + c] - onehot);
          }
      });
}

Var cls_loss(Var logits, std::span<const std::size_t> labels) { return cross_entropy(logits, labels); }

namespace {

Var binary_ce(Var logits, RealFake target) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[1] != 2) {
    throw ShapeError("discriminator logits must be [B,2], got " + shape_str(s));
  }
  std::vector<std::size_t> labels(s[0], static_cast<std::size_t>(target));
  return cross_entropy(logits, labels);
}

}  // namespace

Var adv_loss_d(Var d_real_logits, Var d_fake_logits) {
  Var real = binary_ce(d_real_logits, RealFake::Real);
  Var fake = binary_ce(d_fake_logits, RealFake::Fake);
  return scale(add(real, fake), 0.5);
}

Var adv_loss_fc(Var d_fake_logits) { return binary_ce(d_fake_logits, RealFake::Real); }

Var diff_loss(Var z_c, Var z_s) {
  if (z_c.shape() != z_s.shape() || z_c.shape().size() != 3) {
    throw ShapeError("diff_loss: feature maps must share a [B,F,T] shape, got " +
                     shape_str(z_c.shape()) + " and " + shape_str(z_s.shape()));
  }
  const double batch = static_cast<double>(z_c.shape()[0]);
  return scale(sum(square(batched_matmul_T(z_c, z_s))), 1.0 / batch);
}

Var total_loss(Var l_cls, Var l_adv_fc, Var l_diff, double lambda) {
  for (Var v : {l_cls, l_adv_fc, l_diff}) {
    if (!std::isfinite(v.value().data[0])) throw NumericError("total_loss: non-finite component");
  }
  return add(add(l_cls, l_adv_fc), scale(l_diff, lambda));
}

double total_loss(double l_cls, double l_adv_fc, double l_diff, double lambda) {
  if (!std::isfinite(l_cls) || !std::isfinite(l_adv_fc) || !std::isfinite(l_diff) ||
      !std::isfinite(lambda)) {
    throw NumericError("total_loss: non-finite component");
  }
  return l_cls + l_adv_fc + lambda * l_diff;
}

}  // namespace factoreeg
