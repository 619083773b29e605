#include "adaptsplat/wavelet.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "adaptsplat/errors.hpp"
#include "adaptsplat/ops.hpp"

namespace adaptsplat {

namespace detail {

Tensor wavelet_analysis_matrix(std::size_t n, WaveletFilter filter) {
  if (n == 0 || n % 2) throw ShapeError("wavelet: extent must be even and positive");
  std::vector<double> h;
  if (filter == WaveletFilter::haar) {
    const double r = 1.0 / std::sqrt(2.0);
    h = {r, r};
  } else {
    const double s3 = std::sqrt(3.0), d = 4.0 * std::sqrt(2.0);
    h = {(1 + s3) / d, (3 + s3) / d, (3 - s3) / d, (1 - s3) / d};
  }
  const std::size_t L = h.size();
  // Quadrature mirror: g[k] = (−1)^k · h[L−1−k].
  std::vector<double> g(L);
  for (std::size_t k = 0; k < L; ++k) g[k] = (k % 2 ? -1.0 : 1.0) * h[L - 1 - k];
  const std::size_t half = n / 2;
  std::vector<double> m(n * n, 0.0);
  for (std::size_t r = 0; r < half; ++r)
    for (std::size_t k = 0; k < L; ++k) {
      const std::size_t col = (2 * r + k) % n;
      m[r * n + col] += h[k];
      m[(half + r) * n + col] += g[k];
    }
  return Tensor::from({n, n}, std::move(m));
}

}  // namespace detail

namespace {

// Analysis matrix composed with the reflect-pad of an odd extent: [n_even×n].
Tensor padded_analysis(std::size_t n, WaveletFilter filter) {
  const std::size_t ne = n + (n % 2);
  Tensor a = detail::wavelet_analysis_matrix(ne, filter);
  if (ne == n) return a;
  // Padded sample n is a reflection of sample n−2.
  std::vector<double> m(ne * n, 0.0);
  const auto A = a.data();
  for (std::size_t r = 0; r < ne; ++r) {
    for (std::size_t c = 0; c < n; ++c) m[r * n + c] = A[r * ne + c];
    m[r * n + (n >= 2 ? n - 2 : 0)] += A[r * ne + n];
  }
  return Tensor::from({ne, n}, std::move(m));
}

// Synthesis (transpose of the square analysis) followed by the crop: [n×n_even].
Tensor cropped_synthesis(std::size_t n, WaveletFilter filter) {
  const std::size_t ne = n + (n % 2);
  Tensor a = detail::wavelet_analysis_matrix(ne, filter);
  const auto A = a.data();
  std::vector<double> m(n * ne);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < ne; ++c) m[r * ne + c] = A[c * ne + r];
  return Tensor::from({n, ne}, std::move(m));
}

}  // namespace

WaveletSubbands dwt2(const Tensor& x, WaveletFilter filter) {
  if (!x.defined() || x.numel() == 0) throw ArgumentError("dwt2: empty input");
  if (x.ndim() != 3) throw ShapeError("dwt2: expected [C×H×W], got " + shape_str(x.shape()));
  const std::size_t H = x.dim(1), W = x.dim(2);
  if (H < 2 || W < 2) throw ShapeError("dwt2: extent below 2 in " + shape_str(x.shape()));
  Tensor coeffs = separable_transform(x, padded_analysis(H, filter), padded_analysis(W, filter));
  const std::size_t h2 = coeffs.dim(1) / 2, w2 = coeffs.dim(2) / 2;
  WaveletSubbands s;
  s.ll = crop(coeffs, 0, 0, h2, w2);
  s.hl = crop(coeffs, 0, w2, h2, w2);
  s.lh = crop(coeffs, h2, 0, h2, w2);
  s.hh = crop(coeffs, h2, w2, h2, w2);
  s.filter = filter;
  s.height = H;
  s.width = W;
  return s;
}

Tensor idwt2(const WaveletSubbands& s) {
  for (const Tensor* t : {&s.ll, &s.lh, &s.hl, &s.hh}) {
    if (!t->defined() || t->shape() != s.ll.shape() || t->ndim() != 3) {
      throw ShapeError("idwt2: subband shapes differ or are undefined");
    }
  }
  const std::size_t h2 = s.ll.dim(1), w2 = s.ll.dim(2);
  if (s.height == 0 || s.width == 0 || (s.height + 1) / 2 != h2 || (s.width + 1) / 2 != w2) {
    throw ShapeError("idwt2: subbands " + shape_str(s.ll.shape()) +
                     " do not match recorded extent " + std::to_string(s.height) + "x" +
                     std::to_string(s.width));
  }
  Tensor top = concat({s.ll, s.hl}, 2);
  Tensor bottom = concat({s.lh, s.hh}, 2);
  Tensor coeffs = concat({top, bottom}, 1);
  return separable_transform(coeffs, cropped_synthesis(s.height, s.filter),
                             cropped_synthesis(s.width, s.filter));
}

}  // namespace adaptsplat
