#include "soilref/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "soilref/core/types.hpp"

namespace soilref {

namespace {

std::size_t element_count(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw ShapeError("Tensor: rank must be 1..4");
  }
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("Tensor: dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw ShapeError("Tensor: " + std::to_string(values_.size()) +
                     " values do not fit shape " + shape_string());
  }
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::validate_finite(const std::string& what) const {
  if (!all_finite()) throw ShapeError(what + ": tensor contains non-finite values");
}

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape_[i]);
  }
  return s + ")";
}

}  // namespace soilref
