#pragma once

#include "topolidar/common/rng.hpp"
#include "topolidar/num/tensor.hpp"

namespace topolidar::num {

/// Zero-mean normal weights with std gain / sqrt(fan_in), marked trainable.
Tensor init_normal(Shape shape, std::size_t fan_in, Rng& rng, double gain = 1.0);
Tensor init_zeros(Shape shape);
Tensor randn(Shape shape, Rng& rng);

}  // namespace topolidar::num
