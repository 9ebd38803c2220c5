#include <algorithm>
#include <cmath>
#include <random>

#include "factoreeg/grad_check.hpp"
#include "factoreeg/losses.hpp"
#include "factoreeg/ops.hpp"

namespace factoreeg {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double min_abs = 0.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data) {
    double x = normal(rng);
    // keep clear of kinks so central differences never straddle one
    if (std::abs(x) < min_abs) x = x < 0.0 ? x - min_abs : x + min_abs;
    v = x;
  }
  return t;
}

/// sum(y * w) for a fixed random w of y's shape.
Var project(Var y, const Tensor& w) { return sum(mul(y, y.tape()->leaf(w))); }

struct Case {
  std::string op;
  std::vector<Shape> shapes;
  Shape out_shape;  // projection shape; empty when f is already scalar
  double min_abs = 0.0;
  std::function<Var(std::span<const Var>)> body;
};

std::vector<Case> cases() {
  const std::vector<std::size_t> labels4 = {0, 3, 5, 1};
  return {
      {"conv2d", {{2, 2, 3, 6}, {3, 2, 2, 3}, {3}}, {2, 3, 2, 4}, 0.0,
       [](auto v) { return conv2d(v[0], v[1], v[2]); }},
      {"conv2d_strided", {{1, 2, 4, 9}, {2, 2, 2, 3}, {2}}, {1, 2, 3, 4}, 0.0,
       [](auto v) { return conv2d(v[0], v[1], v[2], {1, 2}); }},
      {"avg_pool2d", {{2, 2, 3, 10}}, {2, 2, 3, 3}, 0.0,
       [](auto v) { return avg_pool2d(v[0], {1, 4}, {1, 3}); }},
      {"elu", {{3, 7}}, {3, 7}, 0.05, [](auto v) { return elu(v[0]); }},
      {"linear", {{3, 5}, {5, 4}, {4}}, {3, 4}, 0.0,
       [](auto v) { return linear(v[0], v[1], v[2]); }},
      {"flatten_concat_time", {{2, 3, 4}, {2, 3, 5}}, {2, 27}, 0.0,
       [](auto v) { return flatten(concat_time(v[0], v[1])); }},
      {"reshape", {{2, 6}}, {3, 4}, 0.0, [](auto v) { return reshape(v[0], {3, 4}); }},
      {"softmax", {{3, 6}}, {3, 6}, 0.0, [](auto v) { return softmax(v[0]); }},
      {"softmax_cls_loss", {{4, 6}}, {}, 0.0,
       [labels4](auto v) { return cls_loss(v[0], labels4); }},
      {"matmul_T", {{3, 4}, {3, 5}}, {4, 5}, 0.0, [](auto v) { return matmul_T(v[0], v[1]); }},
      {"batched_matmul_T", {{2, 3, 4}, {2, 3, 5}}, {2, 4, 5}, 0.0,
       [](auto v) { return batched_matmul_T(v[0], v[1]); }},
      {"diff_loss", {{3, 4, 5}, {3, 4, 5}}, {}, 0.0, [](auto v) { return diff_loss(v[0], v[1]); }},
      {"adv_loss_d", {{4, 2}, {4, 2}}, {}, 0.0, [](auto v) { return adv_loss_d(v[0], v[1]); }},
      {"adv_loss_fc", {{4, 2}}, {}, 0.0, [](auto v) { return adv_loss_fc(v[0]); }},
      {"add_mul_scale", {{3, 4}, {3, 4}}, {3, 4}, 0.0,
       [](auto v) { return scale(add(mul(v[0], v[1]), v[0]), -0.7); }},
      {"square_mean", {{3, 4}}, {}, 0.0, [](auto v) { return mean(square(v[0])); }},
  };
}

}  // namespace

std::vector<OpCheck> grad_check_suite(std::size_t n_seeds, double tol) {
  std::vector<OpCheck> out;
  for (const Case& c : cases()) {
    OpCheck check{c.op, 0.0, true};
    for (std::size_t s = 0; s < n_seeds; ++s) {
      Rng rng(0x5eed0000ULL + s);
      std::vector<Tensor> inputs;
      for (const Shape& shape : c.shapes) inputs.push_back(random_tensor(shape, rng, c.min_abs));
      ScalarFn f;
      if (c.out_shape.empty()) {
        f = [&c](Tape&, std::span<const Var> v) { return c.body(v); };
      } else {
        Tensor w = random_tensor(c.out_shape, rng);
        f = [&c, w](Tape&, std::span<const Var> v) { return project(c.body(v), w); };
      }
      const GradCheckResult r = grad_check(f, inputs, tol);
      check.max_rel_error = std::max(check.max_rel_error, r.max_rel_error);
      check.passed = check.passed && r.passed;
    }
    out.push_back(std::move(check));
  }
  return out;
}

}  // namespace factoreeg
