#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "adaptsplat/ops.hpp"
#include "adaptsplat/random.hpp"
#include "adaptsplat/tensor.hpp"

namespace adaptsplat::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                            const std::string& tag = "test") {
  auto rng = SplitMix64::stream(seed, tag);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

inline Tensor param(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  auto t = random_tensor(std::move(shape), seed, lo, hi, "param");
  t.set_requires_grad(true);
  return t;
}

/// sum(t ⊙ R) for a fixed random R: a scalar readout touching every entry
/// with a distinct weight.
inline Tensor readout(const Tensor& t, std::uint64_t seed = 99) {
  return sum(mul(t, random_tensor(t.shape(), seed, -1.0, 1.0, "readout")));
}

inline std::vector<double> values(const Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace adaptsplat::testing
