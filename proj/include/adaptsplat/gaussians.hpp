#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "adaptsplat/camera.hpp"
#include "adaptsplat/tensor.hpp"

namespace adaptsplat {

using Quat = std::array<double, 4>;  // (w, x, y, z)

struct GaussianSet {
  Tensor mu;     // [N×3]
  Tensor alpha;  // [N]
  Tensor color;  // [N×3], linear RGB
  Tensor scale;  // [N×3]
  Tensor quat;   // [N×4], unit

  std::size_t size() const { return alpha.defined() ? alpha.numel() : 0; }
  /// Throws ShapeError if the five tensors disagree on N.
  void validate() const;
  GaussianSet detach() const;
  static GaussianSet empty();
  /// Constant set from plain per-Gaussian values.
  static GaussianSet from_values(const std::vector<Vec3>& mu, const std::vector<double>& alpha,
                                 const std::vector<Vec3>& color, const std::vector<Vec3>& scale,
                                 const std::vector<Quat>& quat);
};

/// Row-wise concatenation.
GaussianSet concat_sets(const std::vector<GaussianSet>& sets);

/// Decoded channel layout.
inline constexpr std::size_t kAlphaChannel = 0, kScaleChannel = 1, kQuatChannel = 4,
                             kColorChannel = 8, kDepthChannel = 11, kHeadChannels = 12;

/// One Gaussian per pixel of decoded[12×H×W], in row-major pixel order.
GaussianSet heads(const Tensor& decoded, const CameraView& cam, double base_scale = 0.02,
                  double near = 0.1);

/// mu = o + D·d per pixel, for depth[1×H×W]; returns [HW×3].
Tensor backproject(const Tensor& depth, const CameraView& cam);

Mat3 quat_to_rotation(const Quat& q);

/// Σ = R·S·Sᵀ·Rᵀ. A quaternion off unit length by more than 1e-10 is
/// normalized and counted in `renormalized`.
Mat3 covariance(const Vec3& scale, const Quat& quat, std::size_t* renormalized = nullptr);

/// sqrt(3/2)·‖s − s̄‖ / ‖s‖. ArgumentError unless all scales are positive.
double fractional_anisotropy(const Vec3& s);
/// Per row of scale[N×3].
Tensor fractional_anisotropy(const Tensor& scale);

/// Binary little-endian PLY, 14 float properties per vertex:
/// x y z opacity scale_0..2 rot_0..3 f_dc_0..2, with opacity as a logit,
/// scales as logs and color as degree-0 SH coefficients.
void export_ply(const GaussianSet& g, const std::filesystem::path& path);
GaussianSet import_ply(const std::filesystem::path& path);

/// Header text `export_ply` writes for `count` vertices.
std::string ply_header(std::size_t count);

}  // namespace adaptsplat
