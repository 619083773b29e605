#include "adaptsplat/camera.hpp"

#include <cmath>
#include <numbers>

#include "adaptsplat/errors.hpp"

namespace adaptsplat {

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(dot(v, v));
  if (n == 0.0) throw ArgumentError("normalize: zero vector");
  return {v[0] / n, v[1] / n, v[2] / n};
}

void CameraView::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw ArgumentError("camera: focal lengths must be positive");
  const auto& R = rotation;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += R[i * 3 + k] * R[j * 3 + k];
      if (std::abs(s - (i == j ? 1.0 : 0.0)) > 1e-8) {
        throw ArgumentError("camera: rotation is not orthonormal");
      }
    }
  const double det = R[0] * (R[4] * R[8] - R[5] * R[7]) - R[1] * (R[3] * R[8] - R[5] * R[6]) +
                     R[2] * (R[3] * R[7] - R[4] * R[6]);
  if (std::abs(det - 1.0) > 1e-8) throw ArgumentError("camera: rotation determinant is not +1");
}

Vec3 CameraView::center() const {
  const auto& R = rotation;
  const auto& t = translation;
  return {-(R[0] * t[0] + R[3] * t[1] + R[6] * t[2]), -(R[1] * t[0] + R[4] * t[1] + R[7] * t[2]),
          -(R[2] * t[0] + R[5] * t[1] + R[8] * t[2])};
}

Vec3 CameraView::to_camera(const Vec3& p) const {
  const auto& R = rotation;
  return {R[0] * p[0] + R[1] * p[1] + R[2] * p[2] + translation[0],
          R[3] * p[0] + R[4] * p[1] + R[5] * p[2] + translation[1],
          R[6] * p[0] + R[7] * p[1] + R[8] * p[2] + translation[2]};
}

Vec3 CameraView::ray_direction(double u, double v) const {
  const Vec3 c{(u - cx) / fx, (v - cy) / fy, 1.0};
  const auto& R = rotation;
  return normalized({R[0] * c[0] + R[3] * c[1] + R[6] * c[2], R[1] * c[0] + R[4] * c[1] + R[7] * c[2],
                     R[2] * c[0] + R[5] * c[1] + R[8] * c[2]});
}

CameraView look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                   std::size_t height, std::size_t width, double near) {
  const Vec3 f = normalized({target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]});
  const Vec3 right = normalized(cross(f, up));
  const Vec3 down = cross(f, right);
  CameraView cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = static_cast<double>(width) / 2.0;
  cam.cy = static_cast<double>(height) / 2.0;
  cam.rotation = {right[0], right[1], right[2], down[0], down[1], down[2], f[0], f[1], f[2]};
  const auto& R = cam.rotation;
  for (int i = 0; i < 3; ++i) {
    cam.translation[static_cast<std::size_t>(i)] =
        -(R[i * 3] * eye[0] + R[i * 3 + 1] * eye[1] + R[i * 3 + 2] * eye[2]);
  }
  cam.height = height;
  cam.width = width;
  cam.near = near;
  return cam;
}

std::vector<CameraView> camera_ring(std::size_t count, double radius, double elevation_deg,
                                    std::size_t height, std::size_t width, double fov_deg) {
  const double el = elevation_deg * std::numbers::pi / 180.0;
  const double focal =
      0.5 * static_cast<double>(width) / std::tan(0.5 * fov_deg * std::numbers::pi / 180.0);
  std::vector<CameraView> cams;
  for (std::size_t i = 0; i < count; ++i) {
    const double az = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
    const Vec3 eye{radius * std::cos(el) * std::cos(az), radius * std::cos(el) * std::sin(az),
                   radius * std::sin(el)};
    cams.push_back(look_at(eye, {0, 0, 0}, {0, 0, 1}, focal, focal, height, width));
  }
  return cams;
}

RayBundle camera_rays(const CameraView& cam) {
  cam.validate();
  const std::size_t H = cam.height, W = cam.width, n = H * W;
  const Vec3 o = cam.center();
  std::vector<double> origins(3 * n), dirs(3 * n);
  for (std::size_t v = 0; v < H; ++v)
    for (std::size_t u = 0; u < W; ++u) {
      const Vec3 d = cam.ray_direction(static_cast<double>(u), static_cast<double>(v));
      for (std::size_t c = 0; c < 3; ++c) {
        origins[c * n + v * W + u] = o[c];
        dirs[c * n + v * W + u] = d[c];
      }
    }
  return {Tensor::from({3, H, W}, std::move(origins)), Tensor::from({3, H, W}, std::move(dirs))};
}

Tensor plucker_rays(const CameraView& cam) {
  const auto rays = camera_rays(cam);
  const std::size_t n = cam.height * cam.width;
  std::vector<double> out(6 * n);
  const auto O = rays.origins.data();
  const auto D = rays.directions.data();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 o{O[i], O[n + i], O[2 * n + i]};
    const Vec3 d{D[i], D[n + i], D[2 * n + i]};
    const Vec3 m = cross(o, d);
    for (std::size_t c = 0; c < 3; ++c) {
      out[c * n + i] = d[c];
      out[(3 + c) * n + i] = m[c];
    }
  }
  return Tensor::from({6, cam.height, cam.width}, std::move(out));
}

}  // namespace adaptsplat
