#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace factoreeg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Plain value type; gradients live on a Tape.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, std::vector<double> values);

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor filled(Shape s, double value);
  static Tensor identity(std::size_t n);

  std::size_t numel() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }

  std::span<double> values() noexcept { return data; }
  std::span<const double> values() const noexcept { return data; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  /// Multi-index access; index count must equal rank.
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace factoreeg
