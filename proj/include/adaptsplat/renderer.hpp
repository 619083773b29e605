#pragma once

#include <array>
#include <vector>

#include "adaptsplat/camera.hpp"
#include "adaptsplat/gaussians.hpp"

namespace adaptsplat {

struct ProjectedGaussian {
  std::size_t index = 0;  // row in the source set
  std::array<double, 2> mean{};
  std::array<double, 3> cov{};    // xx, xy, yy, dilated
  std::array<double, 3> conic{};  // inverse of cov: xx, xy, yy
  double depth = 0.0;
  double alpha = 0.0;
  std::array<double, 3> color{};
};

struct RenderStats {
  std::size_t projected = 0;
  std::size_t culled = 0;   // at or behind the near plane
  std::size_t non_spd = 0;  // skipped: 2D covariance not positive definite
};

struct RenderOptions {
  Vec3 background{0, 0, 0};
  /// Row bands rendered concurrently; output does not depend on it.
  unsigned threads = 1;
};

inline constexpr double kCovarianceDilation = 0.3;
inline constexpr double kMaxWeight = 0.999;

/// EWA projection with the perspective Jacobian; returns the surviving
/// Gaussians sorted front to back by depth, ties by index.
std::vector<ProjectedGaussian> project(const GaussianSet& g, const CameraView& cam,
                                       RenderStats* stats = nullptr);

/// Per-pixel diagnostics from `rasterize`, each [H·W].
struct RasterTrace {
  std::vector<double> coefficient_sum;  // Σ w_k·T_k + T_final
  std::vector<double> transmittance;    // T_final
};

/// Front-to-back compositing of an already sorted list into [3×H×W].
Tensor rasterize(const std::vector<ProjectedGaussian>& sorted, std::size_t height, std::size_t width,
                 const Vec3& background, unsigned threads = 1, RasterTrace* trace = nullptr);

/// Differentiable render of `g` to [3×H×W]: gradients reach mu, scale,
/// quat, alpha and color.
Tensor render(const GaussianSet& g, const CameraView& cam, const RenderOptions& options = {},
              RenderStats* stats = nullptr);

}  // namespace adaptsplat
