#pragma once

#include "adaptsplat/gaussians.hpp"
#include "adaptsplat/tensor.hpp"

namespace adaptsplat {

/// Mean squared error over every entry.
Tensor mse(const Tensor& pred, const Tensor& gt);

/// Mean SSIM of [C×H×W] images with an 11×11 Gaussian window (σ = 1.5),
/// zero padding, C1 = 0.01², C2 = 0.03².
Tensor ssim(const Tensor& pred, const Tensor& gt);
/// (1 − SSIM)/2.
Tensor ssim_term(const Tensor& pred, const Tensor& gt);

/// Per channel mean of w·|F_p − F_g|² over the unnormalized DFT, with
/// w = |F_p − F_g|^alpha / max, held constant; averaged over channels.
Tensor focal_frequency(const Tensor& pred, const Tensor& gt, double alpha_focal = 1.0);

/// mean(alpha); 0 for an empty set.
Tensor opacity_reg(const GaussianSet& g);

struct LossWeights {
  double rec = 1.0;
  double ffl = 0.1;
  double reg = 0.01;
  double structure = 0.1;
  double alpha_focal = 1.0;
};

struct LossReport {
  Tensor total;
  double mse = 0, ssim_term = 0, ffl = 0, reg = 0;
  LossWeights weights;
};

/// total = rec·(mse + structure·ssim_term) + ffl·ffl + reg·reg.
LossReport total_loss(const Tensor& pred, const Tensor& gt, const GaussianSet& g,
                      const LossWeights& weights = {});

/// 10·log10(peak²/mse), capped at 99 dB.
double psnr(const Tensor& pred, const Tensor& gt, double peak = 1.0);
inline constexpr double kPsnrCap = 99.0;

}  // namespace adaptsplat
