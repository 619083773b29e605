#pragma once

#include <utility>
#include <vector>

#include "adaptsplat/tensor.hpp"

namespace adaptsplat {

// Pointwise. Binary ops take equal shapes, or one operand with a single
// element which is broadcast; anything else is a ShapeError.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);

// Reductions to a rank-0 scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Layout.
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);  // rank 2
Tensor concat(const std::vector<Tensor>& parts);  // along axis 0
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t begin, std::size_t end);  // axis 0
/// [C×H×W] -> [HW×C]
Tensor channels_to_rows(const Tensor& x);
/// [HW×C] -> [C×H×W]
Tensor rows_to_channels(const Tensor& x, std::size_t height, std::size_t width);
/// Stacks `copies` copies of `x` along axis 0.
Tensor repeat(const Tensor& x, std::size_t copies);
/// Spatial window [y0, y0+h) × [x0, x0+w) of x[C×H×W].
Tensor crop(const Tensor& x, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[N×in] · wᵀ + b, with w[out×in] and optional b[out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// Per channel `left · x[c] · rightᵀ` for x[C×h×w], left[m×h], right[n×w].
/// The matrices are constants; only x receives a gradient.
Tensor separable_transform(const Tensor& x, const Tensor& left, const Tensor& right);

enum class Padding { zero, reflect };

/// Cross-correlation of x[C_in×H×W] with kernel[C_out×C_in×k×k] (k odd),
/// plus optional bias[C_out].
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t padding, Padding mode = Padding::zero);

/// Half-pixel-center bilinear resampling of x[C×H×W] to [C×fH×fW].
Tensor bilinear_upsample(const Tensor& x, std::size_t factor);

/// 2×2 mean pooling of x[C×H×W]; H and W must be even.
Tensor avg_pool2(const Tensor& x);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Per-row normalization of x[N×D] with gain[D] and bias[D].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

/// Per-channel normalization over spatial positions of x[C×H×W].
Tensor channel_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                    double eps = 1e-5);

/// Unnormalized forward 2D DFT of x[H×W]: returns (real, imaginary).
std::pair<Tensor, Tensor> dft2(const Tensor& x);

namespace detail {
/// In-place-free separable complex DFT on H×W buffers. sign = -1 forward,
/// +1 inverse (no 1/HW factor).
void complex_dft2(const double* re, const double* im, std::size_t height,
                  std::size_t width, int sign, double* out_re, double* out_im);
}  // namespace detail

}  // namespace adaptsplat
