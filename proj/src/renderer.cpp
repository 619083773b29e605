#include "adaptsplat/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>

#include "adaptsplat/dual.hpp"
#include "adaptsplat/errors.hpp"

namespace adaptsplat {

namespace {

// Inputs of one Gaussian's projection: mu 0..2, scale 3..5, quat 6..9.
constexpr std::size_t kInputs = 10;
using D = Dual<kInputs>;

template <class T>
struct Footprint {
  T mx, my;          // pixel-space mean
  T sxx, sxy, syy;   // dilated 2D covariance
  T cxx, cxy, cyy;   // its inverse
  double depth;
  bool visible;
};

template <class T>
Footprint<T> project_one(const std::array<T, 3>& mu, const std::array<T, 3>& s,
                         const std::array<T, 4>& quat, const CameraView& cam) {
  const auto& W = cam.rotation;
  std::array<T, 3> t;
  for (int i = 0; i < 3; ++i) t[i] = W[i * 3] * mu[0] + W[i * 3 + 1] * mu[1] + W[i * 3 + 2] * mu[2] + cam.translation[i];
  Footprint<T> f{};
  f.depth = value_of(t[2]);
  f.visible = f.depth > cam.near;
  if (!f.visible) return f;
  const T iz = 1.0 / t[2];
  f.mx = cam.fx * t[0] * iz + cam.cx;
  f.my = cam.fy * t[1] * iz + cam.cy;
  // Perspective Jacobian rows, 2×3.
  const std::array<T, 3> j0{cam.fx * iz, T(0.0), -cam.fx * t[0] * iz * iz};
  const std::array<T, 3> j1{T(0.0), cam.fy * iz, -cam.fy * t[1] * iz * iz};

  using std::sqrt;
  const T qn = sqrt(quat[0] * quat[0] + quat[1] * quat[1] + quat[2] * quat[2] + quat[3] * quat[3]);
  const T w = quat[0] / qn, x = quat[1] / qn, y = quat[2] / qn, z = quat[3] / qn;
  const std::array<T, 9> R{1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
                           2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
                           2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)};
  // M = W·R·S, so the camera-space covariance is M·Mᵀ.
  std::array<T, 9> M;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k)
      M[i * 3 + k] = (W[i * 3] * R[k] + W[i * 3 + 1] * R[3 + k] + W[i * 3 + 2] * R[6 + k]) * s[k];
  // P = J·M, 2×3; Σ' = P·Pᵀ.
  std::array<T, 6> P;
  for (int k = 0; k < 3; ++k) {
    P[k] = j0[0] * M[k] + j0[1] * M[3 + k] + j0[2] * M[6 + k];
    P[3 + k] = j1[0] * M[k] + j1[1] * M[3 + k] + j1[2] * M[6 + k];
  }
  f.sxx = P[0] * P[0] + P[1] * P[1] + P[2] * P[2] + kCovarianceDilation;
  f.sxy = P[0] * P[3] + P[1] * P[4] + P[2] * P[5];
  f.syy = P[3] * P[3] + P[4] * P[4] + P[5] * P[5] + kCovarianceDilation;
  const T det = f.sxx * f.syy - f.sxy * f.sxy;
  if (!(value_of(det) > 0.0) || !(value_of(f.sxx) > 0.0)) {
    f.visible = false;
    return f;
  }
  const T idet = 1.0 / det;
  f.cxx = f.syy * idet;
  f.cxy = -f.sxy * idet;
  f.cyy = f.sxx * idet;
  return f;
}

// Partials of (mx, my, cxx, cxy, cyy) with respect to the 10 inputs.
using FootprintJacobian = std::array<std::array<double, kInputs>, 5>;

struct Prepared {
  std::vector<ProjectedGaussian> sorted;
  std::vector<FootprintJacobian> jacobians;  // aligned with sorted, if requested
};

Prepared prepare(const GaussianSet& g, const CameraView& cam, bool jacobians, RenderStats* stats) {
  cam.validate();
  g.validate();
  const std::size_t n = g.size();
  const auto MU = g.mu.data(), A = g.alpha.data(), C = g.color.data(), S = g.scale.data(),
             Q = g.quat.data();
  RenderStats local;
  Prepared out;
  std::vector<FootprintJacobian> jac;
  for (std::size_t i = 0; i < n; ++i) {
    ProjectedGaussian p;
    p.index = i;
    p.alpha = A[i];
    for (int c = 0; c < 3; ++c) p.color[c] = C[3 * i + c];
    bool visible = false;
    if (jacobians) {
      std::array<D, 3> mu, s;
      std::array<D, 4> q;
      for (std::size_t k = 0; k < 3; ++k) {
        mu[k] = D::variable(MU[3 * i + k], k);
        s[k] = D::variable(S[3 * i + k], 3 + k);
      }
      for (std::size_t k = 0; k < 4; ++k) q[k] = D::variable(Q[4 * i + k], 6 + k);
      const auto f = project_one(mu, s, q, cam);
      p.depth = f.depth;
      if (f.depth <= cam.near) {
        ++local.culled;
        continue;
      }
      visible = f.visible;
      if (visible) {
        p.mean = {f.mx.v, f.my.v};
        p.cov = {f.sxx.v, f.sxy.v, f.syy.v};
        p.conic = {f.cxx.v, f.cxy.v, f.cyy.v};
        jac.push_back({f.mx.d, f.my.d, f.cxx.d, f.cxy.d, f.cyy.d});
      }
    } else {
      const auto f = project_one<double>({MU[3 * i], MU[3 * i + 1], MU[3 * i + 2]},
                                         {S[3 * i], S[3 * i + 1], S[3 * i + 2]},
                                         {Q[4 * i], Q[4 * i + 1], Q[4 * i + 2], Q[4 * i + 3]}, cam);
      p.depth = f.depth;
      if (f.depth <= cam.near) {
        ++local.culled;
        continue;
      }
      visible = f.visible;
      if (visible) {
        p.mean = {f.mx, f.my};
        p.cov = {f.sxx, f.sxy, f.syy};
        p.conic = {f.cxx, f.cxy, f.cyy};
      }
    }
    if (!visible) {
      ++local.non_spd;
      continue;
    }
    out.sorted.push_back(p);
  }
  // Stable sort on depth keeps index order among ties.
  std::vector<std::size_t> order(out.sorted.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.sorted[a].depth < out.sorted[b].depth;
  });
  std::vector<ProjectedGaussian> sorted;
  sorted.reserve(order.size());
  for (auto k : order) sorted.push_back(out.sorted[k]);
  out.sorted = std::move(sorted);
  if (jacobians) {
    out.jacobians.reserve(order.size());
    for (auto k : order) out.jacobians.push_back(jac[k]);
  }
  local.projected = out.sorted.size();
  if (stats) {
    stats->projected += local.projected;
    stats->culled += local.culled;
    stats->non_spd += local.non_spd;
  }
  return out;
}

// One evaluated (Gaussian, pixel) pair, kept for the backward pass.
struct Contribution {
  std::uint32_t k;      // position in the sorted list
  std::uint32_t pixel;  // y·W + x
  double t_before;      // transmittance before this Gaussian
  double falloff;       // exp(−½ dᵀ Σ'⁻¹ d)
};

struct PixelWindow {
  std::size_t x0, x1, y0, y1;  // inclusive; empty if x0 > x1 or y0 > y1
};

// Pixels inside the axis-aligned box of the 3σ ellipse.
PixelWindow window(const ProjectedGaussian& p, std::size_t H, std::size_t W) {
  const double rx = 3.0 * std::sqrt(p.cov[0]), ry = 3.0 * std::sqrt(p.cov[2]);
  const double lx = std::ceil(p.mean[0] - rx), hx = std::floor(p.mean[0] + rx);
  const double ly = std::ceil(p.mean[1] - ry), hy = std::floor(p.mean[1] + ry);
  PixelWindow w{1, 0, 1, 0};
  if (!(hx >= 0) || !(hy >= 0) || !(lx <= static_cast<double>(W) - 1) ||
      !(ly <= static_cast<double>(H) - 1)) {
    return w;
  }
  w.x0 = static_cast<std::size_t>(std::max(lx, 0.0));
  w.x1 = static_cast<std::size_t>(std::min(hx, static_cast<double>(W) - 1));
  w.y0 = static_cast<std::size_t>(std::max(ly, 0.0));
  w.y1 = static_cast<std::size_t>(std::min(hy, static_cast<double>(H) - 1));
  return w;
}

struct Band {
  std::size_t row_begin, row_end;
};

// Composites rows [band.row_begin, band.row_end). Every pixel sees the
// Gaussians in global sorted order, so bands are independent.
void composite_band(const std::vector<ProjectedGaussian>& sorted, std::size_t H, std::size_t W,
                    Band band, std::vector<double>& color, std::vector<double>& trans,
                    std::vector<double>& coeff, std::vector<Contribution>* record) {
  const std::size_t n = H * W;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const auto& g = sorted[k];
    auto win = window(g, H, W);
    win.y0 = std::max(win.y0, band.row_begin);
    win.y1 = std::min(win.y1, band.row_end - 1);
    if (win.x0 > win.x1 || win.y0 > win.y1 || band.row_begin >= band.row_end) continue;
    for (std::size_t y = win.y0; y <= win.y1; ++y)
      for (std::size_t x = win.x0; x <= win.x1; ++x) {
        const double dx = static_cast<double>(x) - g.mean[0];
        const double dy = static_cast<double>(y) - g.mean[1];
        const double power =
            -0.5 * (g.conic[0] * dx * dx + 2.0 * g.conic[1] * dx * dy + g.conic[2] * dy * dy);
        const double falloff = std::exp(power);
        const double w = std::min(g.alpha * falloff, kMaxWeight);
        const std::size_t p = y * W + x;
        const double T = trans[p];
        if (record) {
          record->push_back({static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(p), T, falloff});
        }
        for (std::size_t c = 0; c < 3; ++c) color[c * n + p] += w * T * g.color[c];
        coeff[p] += w * T;
        trans[p] = T * (1.0 - w);
      }
  }
}

struct Composite {
  std::vector<double> image;  // [3·H·W]
  std::vector<double> transmittance;
  std::vector<double> coefficient_sum;
  std::vector<Contribution> contributions;
};

Composite composite(const std::vector<ProjectedGaussian>& sorted, std::size_t H, std::size_t W,
                    const Vec3& background, unsigned threads, bool record) {
  const std::size_t n = H * W;
  Composite out;
  out.image.assign(3 * n, 0.0);
  out.transmittance.assign(n, 1.0);
  out.coefficient_sum.assign(n, 0.0);
  const std::size_t bands = std::max<std::size_t>(1, std::min<std::size_t>(threads, H));
  if (bands == 1) {
    composite_band(sorted, H, W, {0, H}, out.image, out.transmittance, out.coefficient_sum,
                   record ? &out.contributions : nullptr);
  } else {
    std::vector<std::vector<Contribution>> parts(bands);
    std::vector<std::thread> pool;
    for (std::size_t b = 0; b < bands; ++b) {
      const Band band{H * b / bands, H * (b + 1) / bands};
      pool.emplace_back([&, band, b] {
        composite_band(sorted, H, W, band, out.image, out.transmittance, out.coefficient_sum,
                       record ? &parts[b] : nullptr);
      });
    }
    for (auto& t : pool) t.join();
    if (record) {
      for (auto& part : parts)
        out.contributions.insert(out.contributions.end(), part.begin(), part.end());
      // Canonical serial order, independent of the band split.
      std::sort(out.contributions.begin(), out.contributions.end(),
                [](const Contribution& a, const Contribution& b) {
                  return a.k != b.k ? a.k < b.k : a.pixel < b.pixel;
                });
    }
  }
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t c = 0; c < 3; ++c) out.image[c * n + p] += out.transmittance[p] * background[c];
    out.coefficient_sum[p] += out.transmittance[p];
  }
  return out;
}

}  // namespace

std::vector<ProjectedGaussian> project(const GaussianSet& g, const CameraView& cam,
                                       RenderStats* stats) {
  return prepare(g, cam, false, stats).sorted;
}

Tensor rasterize(const std::vector<ProjectedGaussian>& sorted, std::size_t height, std::size_t width,
                 const Vec3& background, unsigned threads, RasterTrace* trace) {
  auto c = composite(sorted, height, width, background, threads, false);
  if (trace) {
    trace->coefficient_sum = std::move(c.coefficient_sum);
    trace->transmittance = std::move(c.transmittance);
  }
  return Tensor::from({3, height, width}, std::move(c.image));
}

Tensor render(const GaussianSet& g, const CameraView& cam, const RenderOptions& options,
              RenderStats* stats) {
  const bool rec = detail::should_record({&g.mu, &g.scale, &g.quat, &g.alpha, &g.color});
  auto prep = std::make_shared<Prepared>(prepare(g, cam, rec, stats));
  const std::size_t H = cam.height, W = cam.width;
  auto comp = std::make_shared<Composite>(
      composite(prep->sorted, H, W, options.background, options.threads, rec));
  std::vector<double> image = comp->image;
  Tape::BackwardFn fn;
  if (rec) {
    comp->image.clear();
    auto mu = g.mu.impl(), sc = g.scale.impl(), qu = g.quat.impl(), al = g.alpha.impl(),
         co = g.color.impl();
    const Vec3 bg = options.background;
    fn = [prep, comp, mu, sc, qu, al, co, bg, H, W](std::span<const double> grad) {
      const std::size_t n = H * W;
      const auto& sorted = prep->sorted;
      const std::size_t m = sorted.size();
      // Per sorted Gaussian: d/d(mx, my, cxx, cxy, cyy), d/dalpha, d/dcolor.
      std::vector<std::array<double, 5>> d_foot(m, {0, 0, 0, 0, 0});
      std::vector<double> d_alpha(m, 0.0);
      std::vector<std::array<double, 3>> d_color(m, {0, 0, 0});
      // Color still to come behind the current Gaussian, per pixel.
      std::vector<double> suffix(3 * n);
      for (std::size_t p = 0; p < n; ++p)
        for (std::size_t c = 0; c < 3; ++c) suffix[c * n + p] = comp->transmittance[p] * bg[c];
      const auto& contribs = comp->contributions;
      for (std::size_t r = contribs.size(); r-- > 0;) {
        const auto& e = contribs[r];
        const auto& gk = sorted[e.k];
        const std::size_t p = e.pixel;
        const double raw = gk.alpha * e.falloff;
        const double w = std::min(raw, kMaxWeight);
        const double T = e.t_before;
        double dw = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double gc = grad[c * n + p];
          d_color[e.k][c] += gc * w * T;
          dw += gc * (T * gk.color[c] - suffix[c * n + p] / (1.0 - w));
          suffix[c * n + p] += w * T * gk.color[c];
        }
        if (raw >= kMaxWeight) continue;  // clamped: flat in alpha and footprint
        d_alpha[e.k] += dw * e.falloff;
        const double dpow = dw * gk.alpha * e.falloff;
        const double dx = static_cast<double>(p % W) - gk.mean[0];
        const double dy = static_cast<double>(p / W) - gk.mean[1];
        auto& f = d_foot[e.k];
        f[0] += dpow * (gk.conic[0] * dx + gk.conic[1] * dy);
        f[1] += dpow * (gk.conic[1] * dx + gk.conic[2] * dy);
        f[2] += dpow * (-0.5 * dx * dx);
        f[3] += dpow * (-dx * dy);
        f[4] += dpow * (-0.5 * dy * dy);
      }
      for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = sorted[k].index;
        if (al->requires_grad) al->grad_buffer()[i] += d_alpha[k];
        if (co->requires_grad)
          for (std::size_t c = 0; c < 3; ++c) co->grad_buffer()[3 * i + c] += d_color[k][c];
        std::array<double, kInputs> d_in{};
        const auto& J = prep->jacobians[k];
        for (std::size_t o = 0; o < 5; ++o)
          for (std::size_t j = 0; j < kInputs; ++j) d_in[j] += d_foot[k][o] * J[o][j];
        if (mu->requires_grad)
          for (std::size_t j = 0; j < 3; ++j) mu->grad_buffer()[3 * i + j] += d_in[j];
        if (sc->requires_grad)
          for (std::size_t j = 0; j < 3; ++j) sc->grad_buffer()[3 * i + j] += d_in[3 + j];
        if (qu->requires_grad)
          for (std::size_t j = 0; j < 4; ++j) qu->grad_buffer()[4 * i + j] += d_in[6 + j];
      }
    };
  }
  const DType dt = detail::result_dtype({&g.mu, &g.scale, &g.quat, &g.alpha, &g.color});
  return detail::finish({3, H, W}, std::move(image), dt, rec, std::move(fn));
}

}  // namespace adaptsplat
