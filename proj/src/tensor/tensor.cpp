#include "factoreeg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "factoreeg/error.hpp"

namespace factoreeg {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_str(shape) + " holds " + std::to_string(shape_numel(shape)) +
                     " elements but " + std::to_string(data.size()) + " were given");
  }
}

Tensor Tensor::filled(Shape s, double value) {
  Tensor t(std::move(s));
  std::fill(t.data.begin(), t.data.end(), value);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data[i * n + i] = 1.0;
  return t;
}

namespace {

std::size_t flat_index(const Shape& shape, std::initializer_list<std::size_t> index) {
  if (index.size() != shape.size()) {
    throw ShapeError("index of rank " + std::to_string(index.size()) + " into tensor " +
                     shape_str(shape));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape[axis]) throw ShapeError("index out of range on axis " + std::to_string(axis));
    flat = flat * shape[axis] + i;
    ++axis;
  }
  return flat;
}

}  // namespace

double& Tensor::at(std::initializer_list<std::size_t> index) { return data[flat_index(shape, index)]; }

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data[flat_index(shape, index)];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace factoreeg
