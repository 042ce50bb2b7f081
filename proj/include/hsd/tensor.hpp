#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hsd/rng.hpp"

namespace hsd {

// Dense row-major tensor of doubles. Rank 1 or 2 covers everything in this
// codebase; convolution filters are stored flattened.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

  std::size_t size() const { return v.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t i) { return v[i]; }
  double at(std::size_t i) const { return v[i]; }
  double& at(std::size_t i, std::size_t j) { return v[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return v[i * cols() + j]; }

  double* row(std::size_t i) { return v.data() + i * cols(); }
  const double* row(std::size_t i) const { return v.data() + i * cols(); }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Named parameter tensor with its gradient accumulator. `group` assigns the
// tensor to an unfreezing / discriminative-lr layer group.
struct Param {
  std::string name;
  std::string group;
  Tensor w;
  Tensor g;

  Param() = default;
  Param(std::string n, std::string grp, std::vector<std::size_t> shape)
      : name(std::move(n)), group(std::move(grp)), w(shape), g(std::move(shape)) {}

  void zero_grad() { g.fill(0.0); }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for a weight tensor.
void init_uniform_fan_in(Tensor& t, std::size_t fan_in, Rng& rng);

bool all_finite(const Tensor& t);

}  // namespace hsd
