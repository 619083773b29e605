#include "adaptsplat/losses.hpp"

#include <algorithm>
#include <cmath>

#include "adaptsplat/errors.hpp"
#include "adaptsplat/ops.hpp"

namespace adaptsplat {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

const Tensor& gaussian_window() {
  static const Tensor w = [] {
    std::vector<double> g(kWindow);
    double total = 0.0;
    for (std::size_t i = 0; i < kWindow; ++i) {
      const double x = static_cast<double>(i) - static_cast<double>(kWindow / 2);
      g[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
      total += g[i];
    }
    std::vector<double> k(kWindow * kWindow);
    for (std::size_t i = 0; i < kWindow; ++i)
      for (std::size_t j = 0; j < kWindow; ++j) k[i * kWindow + j] = g[i] * g[j] / (total * total);
    return Tensor::from({1, 1, kWindow, kWindow}, std::move(k));
  }();
  return w;
}

Tensor blur(const Tensor& x) { return conv2d(x, gaussian_window(), {}, 1, kWindow / 2); }

}  // namespace

Tensor mse(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "mse");
  return mean(square(sub(pred, gt)));
}

Tensor ssim(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "ssim");
  if (pred.ndim() != 3) throw ShapeError("ssim: expected [C×H×W], got " + shape_str(pred.shape()));
  std::vector<Tensor> maps;
  for (std::size_t c = 0; c < pred.dim(0); ++c) {
    const Tensor x = slice(pred, c, c + 1), y = slice(gt, c, c + 1);
    const Tensor mx = blur(x), my = blur(y);
    const Tensor mxx = square(mx), myy = square(my), mxy = mul(mx, my);
    const Tensor vx = sub(blur(square(x)), mxx);
    const Tensor vy = sub(blur(square(y)), myy);
    const Tensor cxy = sub(blur(mul(x, y)), mxy);
    const Tensor num = mul(add_scalar(scale(mxy, 2.0), kC1), add_scalar(scale(cxy, 2.0), kC2));
    const Tensor den = mul(add_scalar(add(mxx, myy), kC1), add_scalar(add(vx, vy), kC2));
    maps.push_back(div(num, den));
  }
  return mean(concat(maps));
}

Tensor ssim_term(const Tensor& pred, const Tensor& gt) {
  return scale(add_scalar(neg(ssim(pred, gt)), 1.0), 0.5);
}

Tensor focal_frequency(const Tensor& pred, const Tensor& gt, double alpha_focal) {
  require_same(pred, gt, "focal frequency");
  if (pred.ndim() != 3) {
    throw ShapeError("focal frequency: expected [C×H×W], got " + shape_str(pred.shape()));
  }
  const std::size_t C = pred.dim(0), H = pred.dim(1), W = pred.dim(2);
  std::vector<Tensor> per_channel;
  for (std::size_t c = 0; c < C; ++c) {
    auto [pr, pi] = dft2(reshape(slice(pred, c, c + 1), {H, W}));
    auto [gr, gi] = dft2(reshape(slice(gt, c, c + 1), {H, W}));
    const Tensor d = add(square(sub(pr, gr)), square(sub(pi, gi)));
    // Spectral weight from current values only; no gradient flows into it.
    std::vector<double> w(d.numel());
    double peak = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = std::pow(std::sqrt(d.data()[i]), alpha_focal);
      peak = std::max(peak, w[i]);
    }
    for (auto& v : w) v = peak > 0.0 ? v / peak : 0.0;
    per_channel.push_back(reshape(mean(mul(Tensor::from({H, W}, std::move(w)), d)), {1}));
  }
  return scale(sum(concat(per_channel)), 1.0 / static_cast<double>(C));
}

Tensor opacity_reg(const GaussianSet& g) {
  if (g.size() == 0) return Tensor::scalar(0.0);
  return mean(g.alpha);
}

LossReport total_loss(const Tensor& pred, const Tensor& gt, const GaussianSet& g,
                      const LossWeights& weights) {
  LossReport r;
  r.weights = weights;
  const Tensor m = mse(pred, gt);
  const Tensor s = ssim_term(pred, gt);
  const Tensor f = focal_frequency(pred, gt, weights.alpha_focal);
  const Tensor reg = opacity_reg(g);
  r.mse = m.item();
  r.ssim_term = s.item();
  r.ffl = f.item();
  r.reg = reg.item();
  const Tensor rec = scale(add(m, scale(s, weights.structure)), weights.rec);
  r.total = add(add(rec, scale(f, weights.ffl)), scale(reg, weights.reg));
  return r;
}

double psnr(const Tensor& pred, const Tensor& gt, double peak) {
  require_same(pred, gt, "psnr");
  const double e = mse(pred.detach(), gt.detach()).item();
  if (e <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / e));
}

}  // namespace adaptsplat
