#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "adaptsplat/tensor.hpp"

namespace adaptsplat {

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-4;
  /// Relative error is |a - n| / max(|a|, |n|, floor, noise), where
  /// noise = noise_ulps·ε·|loss|/step is the resolution of a central
  /// difference. Both keep near-zero gradients from turning rounding noise
  /// into large ratios.
  double floor = 1e-6;
  double noise_ulps = 1e4;
  /// Entries checked across all parameters; 0 checks every entry.
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Compares reverse-mode gradients of `loss_fn` against central finite
/// differences, perturbing entries of `params` in place. `loss_fn` must
/// build the loss from scratch on every call.
GradCheckResult check_gradients(std::string name, std::vector<Tensor> params,
                                const std::function<Tensor()>& loss_fn,
                                const GradCheckOptions& options = {});

}  // namespace adaptsplat

namespace adaptsplat {

/// Finite-difference suite over every differentiable op at `op_tolerance`,
/// then the full model on 32×32 images with two input views at
/// `end_to_end_tolerance`. `report` sees each result as it completes.
std::vector<GradCheckResult> gradcheck_suite(
    double op_tolerance = 1e-4, double end_to_end_tolerance = 1e-3,
    const std::function<void(const GradCheckResult&)>& report = {});

}  // namespace adaptsplat
