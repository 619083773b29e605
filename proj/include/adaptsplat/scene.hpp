#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adaptsplat/camera.hpp"
#include "adaptsplat/gaussians.hpp"

namespace adaptsplat {

enum class SceneKind { tri_gauss, edge_grid, checker_box };

SceneKind parse_scene_kind(const std::string& s);  // ArgumentError if unknown
std::string to_string(SceneKind k);

/// Ground truth rendered by this repo's own renderer on a black background.
struct SyntheticScene {
  SceneKind kind = SceneKind::tri_gauss;
  GaussianSet gt;
  std::vector<CameraView> cameras;  // 8 on a ring: radius 4, elevation 20°
  std::vector<Tensor> images;       // [3×H×W] per camera
};

inline constexpr std::size_t kRingCameras = 8;
inline constexpr double kRingRadius = 4.0;
inline constexpr double kRingElevationDeg = 20.0;

SyntheticScene make_scene(SceneKind kind, std::uint64_t seed, std::size_t height = 32,
                          std::size_t width = 32);

}  // namespace adaptsplat
