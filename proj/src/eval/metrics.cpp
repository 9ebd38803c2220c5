#include <cmath>
#include <numeric>

#include "factoreeg/error.hpp"
#include "factoreeg/eval.hpp"

namespace factoreeg {

double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ShapeError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

double frobenius(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data) s += v * v;
  return std::sqrt(s);
}

// ||A' B||_F^2 for row-major [N,D] matrices. With N < D the N x N Gram route
// sum_ij (AA')_ij (BB')_ij is cheaper than forming the D x D product.
double cross_frobenius_sq(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.dim(0), d = a.dim(1);
  if (n < d) {
    std::vector<double> ga(n * n), gb(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double sa = 0.0, sb = 0.0;
        const double* ai = &a.data[i * d];
        const double* aj = &a.data[j * d];
        const double* bi = &b.data[i * d];
        const double* bj = &b.data[j * d];
        for (std::size_t k = 0; k < d; ++k) {
          sa += ai[k] * aj[k];
          sb += bi[k] * bj[k];
        }
        ga[i * n + j] = ga[j * n + i] = sa;
        gb[i * n + j] = gb[j * n + i] = sb;
      }
    return std::inner_product(ga.begin(), ga.end(), gb.begin(), 0.0);
  }
  std::vector<double> m(d * d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* ar = &a.data[r * d];
    const double* br = &b.data[r * d];
    for (std::size_t i = 0; i < d; ++i) {
      const double s = ar[i];
      double* row = &m[i * d];
      for (std::size_t j = 0; j < d; ++j) row[j] += s * br[j];
    }
  }
  return std::inner_product(m.begin(), m.end(), m.begin(), 0.0);
}

}  // namespace

double orthogonality_index(const Tensor& zc, const Tensor& zs) {
  if (zc.rank() != 2 || zc.shape != zs.shape) {
    throw ShapeError("orthogonality_index: inputs must be equal-shape matrices, got " +
                     shape_str(zc.shape) + " and " + shape_str(zs.shape));
  }
  const double nc = frobenius(zc), ns = frobenius(zs);
  if (nc == 0.0 || ns == 0.0) throw NumericError("orthogonality_index: zero-norm input");
  const double overlap = std::sqrt(std::max(0.0, cross_frobenius_sq(zc, zs)));
  return std::min(1.0, overlap / (nc * ns));
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double mu = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

}  // namespace factoreeg
