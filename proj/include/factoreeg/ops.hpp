#pragma once

#include <cstddef>
#include <random>
#include <utility>

#include "factoreeg/tape.hpp"

namespace factoreeg {

using Rng = std::mt19937_64;

struct Extent2 {
  std::size_t h = 1;
  std::size_t w = 1;
};

/// Output length of a valid (unpadded) sliding window.
constexpr std::size_t window_count(std::size_t length, std::size_t kernel, std::size_t stride) {
  return (length - kernel) / stride + 1;
}

// Every op records onto the tape of its first operand. Operands from different
// tapes are rejected.

/// Valid cross-correlation. input [B,Cin,H,W], weight [Cout,Cin,kH,kW], bias [Cout].
Var conv2d(Var input, Var weight, Var bias, Extent2 stride = {1, 1});

/// Mean over each window. input [B,C,H,W].
Var avg_pool2d(Var input, Extent2 kernel, Extent2 stride);

/// x for x > 0, alpha*(exp(x)-1) otherwise. Derivative at 0 is taken as 1.
Var elu(Var x, double alpha = 1.0);

/// x [B,N] times weight [N,M] plus bias [M].
Var linear(Var x, Var weight, Var bias);

/// Collapses all axes after the first: [B, ...] -> [B, N].
Var flatten(Var x);

Var reshape(Var x, Shape shape);

/// Joins two [B,F,T] tensors along the last axis, a's samples first.
Var concat_time(Var a, Var b);

/// Inverted dropout. Identity when !training or p == 0.
Var dropout(Var x, double p, bool training, Rng& rng);

/// Row-wise softmax of [B,N], max-subtracted.
Var softmax(Var x);

/// aᵀ·b for a [F,T1], b [F,T2] -> [T1,T2].
Var matmul_T(Var a, Var b);

/// Per-sample aᵀ·b for a [B,F,T1], b [B,F,T2] -> [B,T1,T2].
Var batched_matmul_T(Var a, Var b);

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var square(Var x);
Var sum(Var x);
Var mean(Var x);

}  // namespace factoreeg
