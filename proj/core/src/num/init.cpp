#include "topolidar/num/init.hpp"

#include <cmath>
#include <random>

namespace topolidar::num {

Tensor init_normal(Shape shape, std::size_t fan_in, Rng& rng, double gain) {
  std::normal_distribution<double> dist(0.0, gain / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in)));
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor init_zeros(Shape shape) { return Tensor::zeros(std::move(shape), true); }

Tensor randn(Shape shape, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

}  // namespace topolidar::num
