#include "factoreeg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "factoreeg/error.hpp"

namespace factoreeg {

namespace {

Tape& tape_of(Var v) {
  if (!v.valid()) throw Error("use of an unbound Var");
  return *v.tape();
}

Tape& common_tape(std::initializer_list<Var> vars) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    Tape& t = tape_of(v);
    if (tape && tape != &t) throw Error("operands live on different tapes");
    tape = &t;
  }
  return *tape;
}

void require_rank(const char* op, const char* operand, const Shape& shape, std::size_t rank) {
  if (shape.size() != rank) {
    throw ShapeError(std::string(op) + ": " + operand + " must have rank " + std::to_string(rank) +
                     ", got " + shape_str(shape));
  }
}

[[noreturn]] void axis_mismatch(const char* op, const std::string& axis, std::size_t got,
                                std::size_t want) {
  throw ShapeError(std::string(op) + ": mismatch on axis " + axis + " (" + std::to_string(got) +
                   " vs " + std::to_string(want) + ")");
}

}  // namespace

Var conv2d(Var input, Var weight, Var bias, Extent2 stride) {
  Tape& tape = common_tape({input, weight, bias});
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  require_rank("conv2d", "input", x.shape, 4);
  require_rank("conv2d", "weight", w.shape, 4);
  require_rank("conv2d", "bias", bias.shape(), 1);
  if (stride.h < 1 || stride.w < 1) throw ShapeError("conv2d: stride components must be >= 1");

  const std::size_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Cout = w.dim(0), kH = w.dim(2), kW = w.dim(3);
  if (w.dim(1) != Cin) axis_mismatch("conv2d", "1 (input channels)", w.dim(1), Cin);
  if (bias.shape()[0] != Cout) axis_mismatch("conv2d", "0 (bias vs output channels)", bias.shape()[0], Cout);
  if (kH > H) axis_mismatch("conv2d", "2 (kernel height exceeds input height)", kH, H);
  if (kW > W) axis_mismatch("conv2d", "3 (kernel width exceeds input width)", kW, W);

  const std::size_t Ho = window_count(H, kH, stride.h);
  const std::size_t Wo = window_count(W, kW, stride.w);
  const std::size_t sh = stride.h, sw = stride.w;

  Tensor out({B, Cout, Ho, Wo});
  const double* bv = bias.value().data.data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t co = 0; co < Cout; ++co) {
      double* o = &out.data[((b * Cout + co) * Ho) * Wo];
      std::fill(o, o + Ho * Wo, bv[co]);
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        const double* xin = &x.data[((b * Cin + ci) * H) * W];
        for (std::size_t ki = 0; ki < kH; ++ki) {
          for (std::size_t kj = 0; kj < kW; ++kj) {
            const double wv = w.data[((co * Cin + ci) * kH + ki) * kW + kj];
            for (std::size_t i = 0; i < Ho; ++i) {
              const double* row = xin + (i * sh + ki) * W + kj;
              double* orow = o + i * Wo;
              if (sw == 1) {
                for (std::size_t j = 0; j < Wo; ++j) orow[j] += wv * row[j];
              } else {
                for (std::size_t j = 0; j < Wo; ++j) orow[j] += wv * row[j * sw];
              }
            }
          }
        }
      }
    }
  }

  return tape.record("conv2d", std::move(out), {input, weight, bias},
                     [=](Tape& t, std::span<const double> g) {
    const Tensor& xv = t.value(input);
    const Tensor& wv = t.value(weight);
    const bool need_x = t.requires_grad(input);
    const bool need_w = t.requires_grad(weight);
    if (t.requires_grad(bias)) {
      auto gb = t.grad_of(bias);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t co = 0; co < Cout; ++co) {
          const double* go = &g[((b * Cout + co) * Ho) * Wo];
          double acc = 0.0;
          for (std::size_t k = 0; k < Ho * Wo; ++k) acc += go[k];
          gb[co] += acc;
        }
    }
    if (!need_x && !need_w) return;
    std::span<double> gx = need_x ? t.grad_of(input) : std::span<double>();
    std::span<double> gw = need_w ? t.grad_of(weight) : std::span<double>();
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t co = 0; co < Cout; ++co) {
        const double* go = &g[((b * Cout + co) * Ho) * Wo];
        for (std::size_t ci = 0; ci < Cin; ++ci) {
          const std::size_t in_off = ((b * Cin + ci) * H) * W;
          for (std::size_t ki = 0; ki < kH; ++ki) {
            for (std::size_t kj = 0; kj < kW; ++kj) {
              const std::size_t widx = ((co * Cin + ci) * kH + ki) * kW + kj;
              const double w_val = wv.data[widx];
              double acc = 0.0;
              for (std::size_t i = 0; i < Ho; ++i) {
                const std::size_t row = in_off + (i * sh + ki) * W + kj;
                const double* grow = go + i * Wo;
                if (need_w) {
                  const double* xrow = &xv.data[row];
                  for (std::size_t j = 0; j < Wo; ++j) acc += grow[j] * xrow[j * sw];
                }
                if (need_x) {
                  double* gxrow = &gx[row];
                  for (std::size_t j = 0; j < Wo; ++j) gxrow[j * sw] += w_val * grow[j];
                }
              }
              if (need_w) gw[widx] += acc;
            }
          }
        }
      }
    }
  });
}

Var avg_pool2d(Var input, Extent2 kernel, Extent2 stride) {
  Tape& tape = tape_of(input);
  const Tensor& x = input.value();
  require_rank("avg_pool2d", "input", x.shape, 4);
  if (kernel.h < 1 || kernel.w < 1 || stride.h < 1 || stride.w < 1) {
    throw ShapeError("avg_pool2d: kernel and stride components must be >= 1");
  }
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (kernel.h > H) axis_mismatch("avg_pool2d", "2 (kernel height exceeds input height)", kernel.h, H);
  if (kernel.w > W) axis_mismatch("avg_pool2d", "3 (kernel width exceeds input width)", kernel.w, W);
  const std::size_t Ho = window_count(H, kernel.h, stride.h);
  const std::size_t Wo = window_count(W, kernel.w, stride.w);
  const double inv = 1.0 / static_cast<double>(kernel.h * kernel.w);

  Tensor out({B, C, Ho, Wo});
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const double* xin = &x.data[bc * H * W];
    double* o = &out.data[bc * Ho * Wo];
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j) {
        double acc = 0.0;
        for (std::size_t ki = 0; ki < kernel.h; ++ki) {
          const double* row = xin + (i * stride.h + ki) * W + j * stride.w;
          for (std::size_t kj = 0; kj < kernel.w; ++kj) acc += row[kj];
        }
        o[i * Wo + j] = acc * inv;
      }
  }

  return tape.record("avg_pool2d", std::move(out), {input}, [=](Tape& t, std::span<const double> g) {
    auto gx = t.grad_of(input);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      double* gin = &gx[bc * H * W];
      const double* go = &g[bc * Ho * Wo];
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) {
          const double share = go[i * Wo + j] * inv;
          for (std::size_t ki = 0; ki < kernel.h; ++ki) {
            double* row = gin + (i * stride.h + ki) * W + j * stride.w;
            for (std::size_t kj = 0; kj < kernel.w; ++kj) row[kj] += share;
          }
        }
    }
  });
}

Var elu(Var x, double alpha) {
  Tape& tape = tape_of(x);
  Tensor out = x.value();
  for (double& v : out.data) v = v > 0.0 ? v : alpha * std::expm1(v);
  return tape.record("elu", std::move(out), {x}, [=](Tape& t, std::span<const double> g) {
    const Tensor& xv = t.value(x);
    auto gx = t.grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double v = xv.data[i];
      gx[i] += g[i] * (v >= 0.0 ? 1.0 : alpha * std::exp(v));
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  Tape& tape = common_tape({x, weight, bias});
  const Tensor& xv = x.value();
  const Tensor& w = weight.value();
  require_rank("linear", "input", xv.shape, 2);
  require_rank("linear", "weight", w.shape, 2);
  require_rank("linear", "bias", bias.shape(), 1);
  const std::size_t B = xv.dim(0), N = xv.dim(1), M = w.dim(1);
  if (w.dim(0) != N) axis_mismatch("linear", "1 (input features vs weight rows)", N, w.dim(0));
  if (bias.shape()[0] != M) axis_mismatch("linear", "0 (bias vs weight columns)", bias.shape()[0], M);

  Tensor out({B, M});
  const double* bv = bias.value().data.data();
  for (std::size_t b = 0; b < B; ++b) {
    double* o = &out.data[b * M];
    std::copy(bv, bv + M, o);
    for (std::size_t n = 0; n < N; ++n) {
      const double a = xv.data[b * N + n];
      if (a == 0.0) continue;
      const double* wrow = &w.data[n * M];
      for (std::size_t m = 0; m < M; ++m) o[m] += a * wrow[m];
    }
  }

  return tape.record("linear", std::move(out), {x, weight, bias},
                     [=](Tape& t, std::span<const double> g) {
    const Tensor& xin = t.value(x);
    const Tensor& wv = t.value(weight);
    if (t.requires_grad(bias)) {
      auto gb = t.grad_of(bias);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t m = 0; m < M; ++m) gb[m] += g[b * M + m];
    }
    if (t.requires_grad(weight)) {
      auto gw = t.grad_of(weight);
      for (std::size_t b = 0; b < B; ++b) {
        const double* grow = &g[b * M];
        for (std::size_t n = 0; n < N; ++n) {
          const double a = xin.data[b * N + n];
          if (a == 0.0) continue;
          double* gwrow = &gw[n * M];
          for (std::size_t m = 0; m < M; ++m) gwrow[m] += a * grow[m];
        }
      }
    }
    if (t.requires_grad(x)) {
      auto gx = t.grad_of(x);
      for (std::size_t b = 0; b < B; ++b) {
        const double* grow = &g[b * M];
        for (std::size_t n = 0; n < N; ++n) {
          const double* wrow = &wv.data[n * M];
          double acc = 0.0;
          for (std::size_t m = 0; m < M; ++m) acc += wrow[m] * grow[m];
          gx[b * N + n] += acc;
        }
      }
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tape& tape = tape_of(x);
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Tensor out(std::move(shape), x.value().data);
  return tape.record("reshape", std::move(out), {x}, [=](Tape& t, std::span<const double> g) {
    auto gx = t.grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
}

Var flatten(Var x) {
  const Shape& s = x.shape();
  if (s.empty()) throw ShapeError("flatten: scalar input");
  return reshape(x, {s[0], x.numel() / s[0]});
}

Var concat_time(Var a, Var b) {
  Tape& tape = common_tape({a, b});
  require_rank("concat_time", "a", a.shape(), 3);
  require_rank("concat_time", "b", b.shape(), 3);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa[0] != sb[0]) axis_mismatch("concat_time", "0 (batch)", sa[0], sb[0]);
  if (sa[1] != sb[1]) axis_mismatch("concat_time", "1 (feature)", sa[1], sb[1]);
  const std::size_t rows = sa[0] * sa[1], Ta = sa[2], Tb = sb[2];

  Tensor out({sa[0], sa[1], Ta + Tb});
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(&av[r * Ta], Ta, &out.data[r * (Ta + Tb)]);
    std::copy_n(&bv[r * Tb], Tb, &out.data[r * (Ta + Tb) + Ta]);
  }
  return tape.record("concat_time", std::move(out), {a, b}, [=](Tape& t, std::span<const double> g) {
    if (t.requires_grad(a)) {
      auto ga = t.grad_of(a);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < Ta; ++k) ga[r * Ta + k] += g[r * (Ta + Tb) + k];
    }
    if (t.requires_grad(b)) {
      auto gb = t.grad_of(b);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < Tb; ++k) gb[r * Tb + k] += g[r * (Ta + Tb) + Ta + k];
    }
  });
}

Var dropout(Var x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0) || p >= 1.0) throw ConfigError("dropout: probability must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  Tape& tape = tape_of(x);
  tape.mark_stochastic();

  std::bernoulli_distribution keep(1.0 - p);
  const double scale_kept = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = keep(rng) ? scale_kept : 0.0;

  Tensor out = x.value();
  for (std::size_t i = 0; i < mask.size(); ++i) out.data[i] *= mask[i];
  return tape.record("dropout", std::move(out), {x},
                     [=, mask = std::move(mask)](Tape& t, std::span<const double> g) {
    auto gx = t.grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

namespace {

void softmax_rows(std::vector<double>& data, std::size_t B, std::size_t N) {
  for (std::size_t b = 0; b < B; ++b) {
    double* row = &data[b * N];
    const double mx = *std::max_element(row, row + N);
    double total = 0.0;
    for (std::size_t n = 0; n < N; ++n) total += (row[n] = std::exp(row[n] - mx));
    for (std::size_t n = 0; n < N; ++n) row[n] /= total;
  }
}

}  // namespace

Var softmax(Var x) {
  Tape& tape = tape_of(x);
  require_rank("softmax", "input", x.shape(), 2);
  const std::size_t B = x.shape()[0], N = x.shape()[1];
  Tensor out = x.value();
  softmax_rows(out.data, B, N);
  return tape.record("softmax", std::move(out), {x}, [=](Tape& t, std::span<const double> g) {
    // Recomputed from the input; the op does not keep a handle to its own output.
    std::vector<double> y = t.value(x).data;
    softmax_rows(y, B, N);
    auto gx = t.grad_of(x);
    for (std::size_t b = 0; b < B; ++b) {
      const double* yr = &y[b * N];
      const double* gr = &g[b * N];
      double dot = 0.0;
      for (std::size_t n = 0; n < N; ++n) dot += yr[n] * gr[n];
      for (std::size_t n = 0; n < N; ++n) gx[b * N + n] += yr[n] * (gr[n] - dot);
    }
  });
}

Var matmul_T(Var a, Var b) {
  require_rank("matmul_T", "a", a.shape(), 2);
  require_rank("matmul_T", "b", b.shape(), 2);
  if (a.shape()[0] != b.shape()[0]) axis_mismatch("matmul_T", "0 (shared feature)", a.shape()[0], b.shape()[0]);
  Var a3 = reshape(a, {1, a.shape()[0], a.shape()[1]});
  Var b3 = reshape(b, {1, b.shape()[0], b.shape()[1]});
  Var prod = batched_matmul_T(a3, b3);
  return reshape(prod, {a.shape()[1], b.shape()[1]});
}

Var batched_matmul_T(Var a, Var b) {
  Tape& tape = common_tape({a, b});
  require_rank("batched_matmul_T", "a", a.shape(), 3);
  require_rank("batched_matmul_T", "b", b.shape(), 3);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa[0] != sb[0]) axis_mismatch("batched_matmul_T", "0 (batch)", sa[0], sb[0]);
  if (sa[1] != sb[1]) axis_mismatch("batched_matmul_T", "1 (shared feature)", sa[1], sb[1]);
  const std::size_t B = sa[0], F = sa[1], T1 = sa[2], T2 = sb[2];

  Tensor out({B, T1, T2});
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t f = 0; f < F; ++f) {
      const double* arow = &av[(n * F + f) * T1];
      const double* brow = &bv[(n * F + f) * T2];
      for (std::size_t i = 0; i < T1; ++i) {
        const double s = arow[i];
        double* orow = &out.data[(n * T1 + i) * T2];
        for (std::size_t j = 0; j < T2; ++j) orow[j] += s * brow[j];
      }
    }

  return tape.record("batched_matmul_T", std::move(out), {a, b},
                     [=](Tape& t, std::span<const double> g) {
    const auto& A = t.value(a).data;
    const auto& Bm = t.value(b).data;
    const bool need_a = t.requires_grad(a);
    const bool need_b = t.requires_grad(b);
    std::span<double> ga = need_a ? t.grad_of(a) : std::span<double>();
    std::span<double> gb = need_b ? t.grad_of(b) : std::span<double>();
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t f = 0; f < F; ++f) {
        const double* arow = &A[(n * F + f) * T1];
        const double* brow = &Bm[(n * F + f) * T2];
        for (std::size_t i = 0; i < T1; ++i) {
          const double* grow = &g[(n * T1 + i) * T2];
          if (need_a) {
            double acc = 0.0;
            for (std::size_t j = 0; j < T2; ++j) acc += grow[j] * brow[j];
            ga[(n * F + f) * T1 + i] += acc;
          }
          if (need_b) {
            const double s = arow[i];
            double* gbrow = &gb[(n * F + f) * T2];
            for (std::size_t j = 0; j < T2; ++j) gbrow[j] += s * grow[j];
          }
        }
      }
  });
}

Var add(Var a, Var b) {
  Tape& tape = common_tape({a, b});
  if (a.shape() != b.shape()) {
    throw ShapeError("add: operand shapes differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = a.value();
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += bv[i];
  return tape.record("add", std::move(out), {a, b}, [=](Tape& t, std::span<const double> g) {
    for (Var v : {a, b}) {
      if (!t.requires_grad(v)) continue;
      auto gv = t.grad_of(v);
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = common_tape({a, b});
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: operand shapes differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = a.value();
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= bv[i];
  return tape.record("mul", std::move(out), {a, b}, [=](Tape& t, std::span<const double> g) {
    const auto& av = t.value(a).data;
    const auto& bw = t.value(b).data;
    if (t.requires_grad(a)) {
      auto ga = t.grad_of(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bw[i];
    }
    if (t.requires_grad(b)) {
      auto gb = t.grad_of(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var x, double factor) {
  Tape& tape = tape_of(x);
  Tensor out = x.value();
  for (double& v : out.data) v *= factor;
  return tape.record("scale", std::move(out), {x}, [=](Tape& t, std::span<const double> g) {
    auto gx = t.grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * factor;
  });
}

Var square(Var x) {
  Tape& tape = tape_of(x);
  Tensor out = x.value();
  for (double& v : out.data) v *= v;
  return tape.record("square", std::move(out), {x}, [=](Tape& t, std::span<const double> g) {
    const auto& xv = t.value(x).data;
    auto gx = t.grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0 * xv[i] * g[i];
  });
}

Var sum(Var x) {
  Tape& tape = tape_of(x);
  double total = 0.0;
  for (double v : x.value().data) total += v;
  return tape.record("sum", Tensor({1}, {total}), {x}, [=](Tape& t, std::span<const double> g) {
    auto gx = t.grad_of(x);
    for (double& v : gx) v += g[0];
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

}  // namespace factoreeg
