#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "topolidar/num/tensor.hpp"

namespace topolidar::num {

// Elementwise binary ops. The operand with fewer elements must have a shape
// equal to a trailing suffix of the other's shape (a scalar qualifies); it is
// repeated along the leading axes. Anything else is a ShapeError.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);  // d|x|/dx taken as 0 at x = 0
Tensor exp(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// max(x, slope*x). The backward pass uses `slope` at exactly x = 0.
Tensor leaky_relu(const Tensor& a, double slope);

/// 2-D matrix product.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// x[M,K] * w[K,N] + b[N]; b may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis);
/// Maximum along `axis` (removed from the shape). The gradient goes to the
/// first index attaining the maximum.
Tensor max(const Tensor& a, std::size_t axis);

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
/// Selects slices along axis 0. Indices may repeat; gradients accumulate.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);

/// 2-D convolution on an H x W x Cin tensor with weights kh x kw x Cin x Cout
/// and optional bias [Cout]. Rows are zero padded by kh/2; columns wrap
/// around (azimuth periodicity) by kw/2. Output is ((H-1)/sh+1) x
/// ((W-1)/sw+1) x Cout for odd kernel sizes.
Tensor conv2d_circular(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride_h = 1,
                       std::size_t stride_w = 1);

/// Nearest-neighbour upsampling of an H x W x C tensor by integer factors.
Tensor upsample_nearest(const Tensor& x, std::size_t fy, std::size_t fx);

}  // namespace topolidar::num
