#pragma once

#include <cstddef>

#include "adaptsplat/tensor.hpp"

namespace adaptsplat {

enum class WaveletFilter { haar, daubechies4 };

/// One-level separable decomposition of a [C×H×W] map.
///
/// Naming follows filter order, horizontal pass first: LH is low-pass along
/// each row then high-pass along each column, so it responds to horizontal
/// edges (vertical intensity change). HL is the transposed case and HH is
/// high-pass on both axes. Each band is [C×⌈H/2⌉×⌈W/2⌉].
struct WaveletSubbands {
  Tensor ll, lh, hl, hh;
  WaveletFilter filter = WaveletFilter::haar;
  // Extent before reflect-padding odd dimensions to even.
  std::size_t height = 0, width = 0;
};

/// Orthogonal analysis with periodic extension; differentiable. Odd extents
/// are reflect-padded by one row/column, which the inverse crops away.
WaveletSubbands dwt2(const Tensor& x, WaveletFilter filter = WaveletFilter::haar);

/// Exact synthesis for `dwt2` output.
Tensor idwt2(const WaveletSubbands& s);

namespace detail {
/// n×n orthogonal analysis matrix: rows [0, n/2) low-pass, [n/2, n) high-pass.
Tensor wavelet_analysis_matrix(std::size_t n, WaveletFilter filter);
}  // namespace detail

}  // namespace adaptsplat
