#include "adaptsplat/scene.hpp"

#include <cmath>
#include <numbers>

#include "adaptsplat/errors.hpp"
#include "adaptsplat/random.hpp"
#include "adaptsplat/renderer.hpp"

namespace adaptsplat {

SceneKind parse_scene_kind(const std::string& s) {
  if (s == "tri-gauss") return SceneKind::tri_gauss;
  if (s == "edge-grid") return SceneKind::edge_grid;
  if (s == "checker-box") return SceneKind::checker_box;
  throw ArgumentError("unknown scene '" + s + "' (tri-gauss|edge-grid|checker-box)");
}

std::string to_string(SceneKind k) {
  switch (k) {
    case SceneKind::tri_gauss: return "tri-gauss";
    case SceneKind::edge_grid: return "edge-grid";
    case SceneKind::checker_box: return "checker-box";
  }
  return "?";
}

namespace {

struct Builder {
  std::vector<Vec3> mu, color, scale;
  std::vector<double> alpha;
  std::vector<Quat> quat;

  void add(const Vec3& m, double a, const Vec3& c, const Vec3& s) {
    mu.push_back(m);
    alpha.push_back(a);
    color.push_back(c);
    scale.push_back(s);
    quat.push_back({1, 0, 0, 0});
  }
  GaussianSet build() const { return GaussianSet::from_values(mu, alpha, color, scale, quat); }
};

// Three round blobs, red, green and blue, 120° apart around the origin.
GaussianSet tri_gauss(SplitMix64& rng) {
  const Vec3 colors[3] = {{0.9, 0.15, 0.1}, {0.1, 0.85, 0.2}, {0.15, 0.25, 0.95}};
  Builder b;
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 3.0 + rng.uniform(-0.2, 0.2);
    const double r = 0.55 + rng.uniform(-0.05, 0.05);
    const double s = 0.22 + rng.uniform(-0.03, 0.03);
    b.add({r * std::cos(a), r * std::sin(a), rng.uniform(-0.1, 0.1)}, 0.95, colors[i],
          {s, s, s * (1.0 + rng.uniform(-0.1, 0.1))});
  }
  return b.build();
}

// Three stacked horizontal slabs, each a 4×4 tiling of flat Gaussians wide
// enough to run past the frame, so their image edges are horizontal.
GaussianSet edge_grid(SplitMix64& rng) {
  const Vec3 colors[3] = {{0.95, 0.85, 0.2}, {0.2, 0.7, 0.95}, {0.95, 0.3, 0.5}};
  constexpr int kTiles = 4;
  constexpr double kHalf = 1.2;
  Builder b;
  for (int layer = 0; layer < 3; ++layer) {
    const double z = 0.45 * (layer - 1) + rng.uniform(-0.03, 0.03);
    Vec3 c = colors[layer];
    for (auto& v : c) v = std::clamp(v + rng.uniform(-0.05, 0.05), 0.0, 1.0);
    for (int i = 0; i < kTiles; ++i)
      for (int j = 0; j < kTiles; ++j) {
        const double u = kHalf * (2.0 * i / (kTiles - 1) - 1.0);
        const double v = kHalf * (2.0 * j / (kTiles - 1) - 1.0);
        b.add({u, v, z}, 0.98, c, {0.4, 0.4, 0.012});
      }
  }
  return b.build();
}

// Axis-aligned box, every face tiled 4×4 with flat two-color checker cells.
GaussianSet checker_box(SplitMix64& rng) {
  const Vec3 half{0.6, 0.6, 0.45};
  const double hue = rng.uniform(0.0, 1.0);
  const Vec3 light{0.9, 0.6 + 0.3 * hue, 0.3};
  const Vec3 dark{0.15, 0.2 + 0.3 * (1.0 - hue), 0.6};
  constexpr int kCells = 4;
  constexpr double kThin = 0.01;
  Builder b;
  for (int axis = 0; axis < 3; ++axis)
    for (int side = -1; side <= 1; side += 2) {
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      for (int i = 0; i < kCells; ++i)
        for (int j = 0; j < kCells; ++j) {
          Vec3 m{}, s{};
          m[axis] = side * half[axis];
          m[u] = half[u] * (2.0 * (i + 0.5) / kCells - 1.0);
          m[v] = half[v] * (2.0 * (j + 0.5) / kCells - 1.0);
          s[axis] = kThin;
          s[u] = 0.6 * half[u] / kCells;
          s[v] = 0.6 * half[v] / kCells;
          b.add(m, 0.95, (i + j) % 2 ? dark : light, s);
        }
    }
  return b.build();
}

}  // namespace

SyntheticScene make_scene(SceneKind kind, std::uint64_t seed, std::size_t height,
                          std::size_t width) {
  auto rng = SplitMix64::stream(seed, "scene/" + to_string(kind));
  SyntheticScene s;
  s.kind = kind;
  switch (kind) {
    case SceneKind::tri_gauss: s.gt = tri_gauss(rng); break;
    case SceneKind::edge_grid: s.gt = edge_grid(rng); break;
    case SceneKind::checker_box: s.gt = checker_box(rng); break;
  }
  s.cameras = camera_ring(kRingCameras, kRingRadius, kRingElevationDeg, height, width);
  for (const auto& cam : s.cameras) s.images.push_back(render(s.gt, cam));
  return s;
}

}  // namespace adaptsplat
