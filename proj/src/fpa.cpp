#include "adaptsplat/fpa.hpp"

#include <cmath>
#include <numbers>

#include "adaptsplat/errors.hpp"
#include "adaptsplat/wavelet.hpp"

namespace adaptsplat {

namespace {

constexpr double kSobelY[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
constexpr double kSobelX[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
constexpr double kLaplacian[9] = {0, 1, 0, 1, -4, 1, 0, 1, 0};

// Ideal split at half Nyquist.
constexpr double kFourierCutoff = 0.25;

Tensor block_diagonal(std::size_t channels, std::initializer_list<const double*> taps) {
  const std::size_t C = channels, B = taps.size();
  std::vector<double> k(B * C * C * 9, 0.0);
  std::size_t b = 0;
  for (const double* t : taps) {
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < 9; ++i) k[((b * C + c) * C + c) * 9 + i] = t[i] / 4.0;
    ++b;
  }
  return Tensor::from({B * C, C, 3, 3}, std::move(k));
}

}  // namespace

Tensor highpass_kernels(std::size_t channels) {
  return block_diagonal(channels, {kSobelY, kSobelX, kLaplacian});
}

Tensor ideal_filter_matrix(std::size_t n, double cutoff, bool high_pass) {
  std::vector<double> gain(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = static_cast<double>(std::min(k, n - k)) / static_cast<double>(n);
    const bool low = f < cutoff;
    gain[k] = (low != high_pass) ? 1.0 : 0.0;
  }
  std::vector<double> m(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      const std::size_t shift = (i + n - j) % n;
      for (std::size_t k = 0; k < n; ++k) {
        if (gain[k] == 0.0) continue;
        s += std::cos(2.0 * std::numbers::pi * static_cast<double>((k * shift) % n) /
                      static_cast<double>(n));
      }
      m[i * n + j] = s / static_cast<double>(n);
    }
  return Tensor::from({n, n}, std::move(m));
}

Tensor directional_bands(const Tensor& x, PriorVariant variant, const Tensor& learned) {
  if (x.ndim() != 3) throw ShapeError("bands: expected [C×H×W], got " + shape_str(x.shape()));
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  switch (variant) {
    case PriorVariant::wavelet: {
      auto s = dwt2(x);
      return concat({s.lh, s.hl, s.hh});
    }
    case PriorVariant::sobel: {
      auto g = conv2d(x, block_diagonal(C, {kSobelY, kSobelX}), {}, 1, 1, Padding::reflect);
      auto gy = slice(g, 0, C), gx = slice(g, C, 2 * C);
      auto mag = sqrt(add_scalar(add(square(gx), square(gy)), 1e-6));
      return avg_pool2(concat({gy, gx, mag}));
    }
    case PriorVariant::fourier: {
      auto lo_h = ideal_filter_matrix(H, kFourierCutoff, false);
      auto hi_h = ideal_filter_matrix(H, kFourierCutoff, true);
      auto lo_w = ideal_filter_matrix(W, kFourierCutoff, false);
      auto hi_w = ideal_filter_matrix(W, kFourierCutoff, true);
      return avg_pool2(concat({separable_transform(x, hi_h, lo_w), separable_transform(x, lo_h, hi_w),
                               separable_transform(x, hi_h, hi_w)}));
    }
    case PriorVariant::conv: {
      if (!learned.defined()) throw ArgumentError("bands: conv variant needs a kernel");
      return avg_pool2(conv2d(x, learned, {}, 1, 1, Padding::reflect));
    }
  }
  throw ArgumentError("bands: unknown variant");
}

FrequencyAdapter::FrequencyAdapter(ParamStore& ps, const ModelConfig& cfg)
    : variant_(cfg.prior), channels_(cfg.widths[0]) {
  const std::size_t bands = 3 * channels_;
  if (variant_ == PriorVariant::conv) {
    auto k = highpass_kernels(channels_);
    learned_ = ps.constant("adapter.highpass.w", k.shape(), 0.0);
    auto dst = learned_.mutable_data();
    std::copy(k.data().begin(), k.data().end(), dst.begin());
  }
  conv1_ = Conv2d::make(ps, "adapter.conv1", bands, cfg.adapter_hidden, 3);
  conv2_ = Conv2d::make(ps, "adapter.conv2", cfg.adapter_hidden, cfg.d_model, 3);
  proj_ = Linear::make(ps, "adapter.proj", cfg.d_model, cfg.d_model);
  mask1_ = Linear::make(ps, "adapter.mask1", bands, 1);
  mask2_ = Linear::make(ps, "adapter.mask2", bands, 1);
  mask3_ = Linear::make(ps, "adapter.mask3", cfg.adapter_hidden, 1);
}

Tensor FrequencyAdapter::bands(const Tensor& shallow) const {
  if (shallow.ndim() != 3 || shallow.dim(0) != channels_) {
    throw ShapeError("adapter: expected [" + std::to_string(channels_) + "×h×w] shallow features, got " +
                     shape_str(shallow.shape()));
  }
  if (shallow.dim(1) % 8 || shallow.dim(2) % 8) {
    throw ShapeError("adapter: shallow extent " + shape_str(shallow.shape()) +
                     " not divisible by 8");
  }
  return directional_bands(shallow, variant_, learned_);
}

HighFreqPrior FrequencyAdapter::extract_prior(const Tensor& shallow) const {
  const Tensor b = bands(shallow);
  const Tensor hidden = relu(conv1_(avg_pool2(b)));
  const Tensor grid = relu(conv2_(avg_pool2(hidden)));
  HighFreqPrior p;
  p.f_hf = pointwise(proj_, grid);
  p.masks = {sigmoid(bilinear_upsample(pointwise(mask1_, b), 2)), sigmoid(pointwise(mask2_, b)),
             sigmoid(pointwise(mask3_, hidden))};
  return p;
}

std::size_t FrequencyAdapter::parameter_count() const {
  std::size_t n = learned_.defined() ? learned_.numel() : 0;
  for (const Tensor* t : {&conv1_.weight, &conv1_.bias, &conv2_.weight, &conv2_.bias, &proj_.weight,
                          &proj_.bias, &mask1_.weight, &mask1_.bias, &mask2_.weight, &mask2_.bias,
                          &mask3_.weight, &mask3_.bias}) {
    n += t->numel();
  }
  return n;
}

}  // namespace adaptsplat
