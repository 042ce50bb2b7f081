#include "hsd/tensor.hpp"

#include <cmath>
#include <numeric>

namespace hsd {

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  v.assign(shape.empty() ? 0 : n, 0.0);
}

void init_uniform_fan_in(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (double& x : t.v) x = rng.uniform(-bound, bound);
}

bool all_finite(const Tensor& t) {
  for (double x : t.v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace hsd
