#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "adaptsplat/tensor.hpp"

namespace adaptsplat {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
Vec3 normalized(const Vec3& v);

/// Pinhole camera, OpenCV axes (x right, y down, z forward). Pixel (u, v)
/// has its center at image coordinate (u, v).
struct CameraView {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  Mat3 rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // world-to-camera
  Vec3 translation{0, 0, 0};                 // x_cam = R·x_world + t
  std::size_t height = 0, width = 0;
  double near = 0.1;

  /// Throws ArgumentError for non-positive focal lengths or a rotation that
  /// is not orthonormal with determinant +1.
  void validate() const;
  Vec3 center() const;  // −Rᵀt
  Vec3 to_camera(const Vec3& world) const;
  /// Unit world-space direction of the ray through pixel (u, v).
  Vec3 ray_direction(double u, double v) const;
};

/// Camera at `eye` looking at `target`, with image rows pointing away from
/// `up`.
CameraView look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                   std::size_t height, std::size_t width, double near = 0.1);

/// `count` cameras on a horizontal circle (z up) around the origin.
std::vector<CameraView> camera_ring(std::size_t count, double radius, double elevation_deg,
                                    std::size_t height, std::size_t width,
                                    double fov_deg = 40.0);

/// Per-pixel ray origins and unit directions, each [3×H×W].
struct RayBundle {
  Tensor origins;
  Tensor directions;
};
RayBundle camera_rays(const CameraView& cam);

/// [6×H×W] Plücker coordinates (d, o×d) with unit d.
Tensor plucker_rays(const CameraView& cam);

}  // namespace adaptsplat
