#include "adaptsplat/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "adaptsplat/errors.hpp"
#include "adaptsplat/gradcheck.hpp"
#include "test_util.hpp"

using namespace adaptsplat;
using adaptsplat::testing::param;
using adaptsplat::testing::random_tensor;

namespace {

using cld = std::complex<long double>;

// Naive unnormalized 2-D DFT of one channel.
std::vector<cld> naive_dft(const Tensor& x, std::size_t c) {
  const std::size_t H = x.dim(1), W = x.dim(2);
  const long double tau = 2.0L * std::numbers::pi_v<long double>;
  std::vector<cld> out(H * W);
  for (std::size_t u = 0; u < H; ++u)
    for (std::size_t v = 0; v < W; ++v) {
      cld acc = 0;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t k = 0; k < W; ++k) {
          const long double ang = -tau * (static_cast<long double>(u * y) / H +
                                          static_cast<long double>(v * k) / W);
          acc += static_cast<long double>(x.data()[(c * H + y) * W + k]) *
                 cld(std::cos(ang), std::sin(ang));
        }
      out[u * W + v] = acc;
    }
  return out;
}

long double ffl_oracle(const Tensor& p, const Tensor& g, double alpha) {
  long double total = 0;
  for (std::size_t c = 0; c < p.dim(0); ++c) {
    const auto fp = naive_dft(p, c), fg = naive_dft(g, c);
    std::vector<long double> d(fp.size()), w(fp.size());
    long double peak = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = std::norm(fp[i] - fg[i]);
      w[i] = std::pow(std::sqrt(d[i]), static_cast<long double>(alpha));
      peak = std::max(peak, w[i]);
    }
    long double acc = 0;
    for (std::size_t i = 0; i < d.size(); ++i) acc += (peak > 0 ? w[i] / peak : 0) * d[i];
    total += acc / d.size();
  }
  return total / p.dim(0);
}

// Mean SSIM with an explicit 11×11 window over zero-padded images.
long double ssim_oracle(const Tensor& p, const Tensor& g) {
  const std::size_t C = p.dim(0), H = p.dim(1), W = p.dim(2);
  long double k1[11], norm = 0;
  for (int i = 0; i < 11; ++i) norm += (k1[i] = std::exp(-(i - 5.0L) * (i - 5.0L) / (2 * 1.5L * 1.5L)));
  auto px = [&](const Tensor& t, std::size_t c, long y, long x) -> long double {
    if (y < 0 || x < 0 || y >= static_cast<long>(H) || x >= static_cast<long>(W)) return 0;
    return t.data()[(c * H + y) * W + x];
  };
  const long double c1 = 1e-4L, c2 = 9e-4L;
  long double total = 0;
  for (std::size_t c = 0; c < C; ++c)
    for (long y = 0; y < static_cast<long>(H); ++y)
      for (long x = 0; x < static_cast<long>(W); ++x) {
        long double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const long double w = k1[i] * k1[j] / (norm * norm);
            const long double a = px(p, c, y + i - 5, x + j - 5), b = px(g, c, y + i - 5, x + j - 5);
            mx += w * a;
            my += w * b;
            sxx += w * a * a;
            syy += w * b * b;
            sxy += w * a * b;
          }
        const long double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
        total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
  return total / (C * H * W);
}

GaussianSet set_with_alpha(std::vector<double> a) {
  const std::size_t n = a.size();
  return GaussianSet::from_values(std::vector<Vec3>(n, Vec3{0, 0, 0}), a,
                                  std::vector<Vec3>(n, Vec3{0.5, 0.5, 0.5}),
                                  std::vector<Vec3>(n, Vec3{0.1, 0.1, 0.1}),
                                  std::vector<Quat>(n, Quat{1, 0, 0, 0}));
}

}  // namespace

TEST(Mse, MatchesLoop) {
  const auto a = random_tensor({3, 5, 7}, 1), b = random_tensor({3, 5, 7}, 2);
  long double acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  EXPECT_NEAR(mse(a, b).item(), static_cast<double>(acc / a.numel()), 1e-15);
  EXPECT_THROW(mse(a, random_tensor({3, 5, 6}, 2)), ShapeError);
}

TEST(Mse, ZeroForIdenticalAndOffsetSquared) {
  const auto a = random_tensor({3, 6, 6}, 1, 0, 1);
  EXPECT_EQ(mse(a, a).item(), 0.0);
  EXPECT_NEAR(mse(add(a, Tensor::full(a.shape(), 0.1)), a).item(), 0.01, 1e-15);
}

TEST(Ssim, MatchesWindowOracle) {
  const auto a = random_tensor({3, 12, 14}, 1, 0, 1), b = random_tensor({3, 12, 14}, 2, 0, 1);
  EXPECT_NEAR(ssim(a, b).item(), static_cast<double>(ssim_oracle(a, b)), 1e-12);
}

TEST(Ssim, IdenticalImagesScoreOneAndIsSymmetric) {
  const auto a = random_tensor({3, 16, 16}, 1, 0, 1), b = random_tensor({3, 16, 16}, 2, 0, 1);
  EXPECT_NEAR(ssim(a, a).item(), 1.0, 1e-12);
  EXPECT_NEAR(ssim_term(a, a).item(), 0.0, 1e-12);
  EXPECT_NEAR(ssim(a, b).item(), ssim(b, a).item(), 1e-14);
  EXPECT_LT(ssim(a, b).item(), 0.5);
  EXPECT_THROW(ssim(Tensor::zeros({4, 4}), Tensor::zeros({4, 4})), ShapeError);
}

TEST(Ssim, InvertedBinaryImageIsNearMaximal) {
  // Zero padding correlates the borders, so the interior has to dominate.
  const auto u = random_tensor({3, 64, 64}, 5, 0, 1);
  std::vector<double> v(u.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = u.data()[i] < 0.5 ? 0.0 : 1.0;
  const auto a = Tensor::from(u.shape(), v);
  const auto inv = sub(Tensor::full(a.shape(), 1.0), a);
  const double t = ssim_term(inv, a).item();
  EXPECT_NEAR(t, static_cast<double>((1.0L - ssim_oracle(inv, a)) / 2.0L), 1e-12);
  EXPECT_GT(t, 0.9);
  EXPECT_LE(t, 1.0);
  EXPECT_GT(t, ssim_term(random_tensor(a.shape(), 6, 0, 1), a).item());
}

TEST(FocalFrequency, MatchesNaiveDftOracle) {
  const auto a = random_tensor({3, 4, 4}, 1, 0, 1), b = random_tensor({3, 4, 4}, 2, 0, 1);
  for (double alpha : {0.0, 1.0, 2.0})
    EXPECT_NEAR(focal_frequency(a, b, alpha).item(), static_cast<double>(ffl_oracle(a, b, alpha)), 1e-10)
        << alpha;
  const auto c = random_tensor({2, 6, 5}, 3, 0, 1), d = random_tensor({2, 6, 5}, 4, 0, 1);
  EXPECT_NEAR(focal_frequency(c, d).item(), static_cast<double>(ffl_oracle(c, d, 1.0)), 1e-10);
}

TEST(FocalFrequency, ZeroForIdenticalImages) {
  const auto a = random_tensor({3, 8, 8}, 1, 0, 1);
  EXPECT_EQ(focal_frequency(a, a).item(), 0.0);
}

TEST(FocalFrequency, NonNegativeAndSymmetric) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = random_tensor({2, 6, 5}, 2 * seed + 1, 0, 1), b = random_tensor({2, 6, 5}, 2 * seed + 2, 0, 1);
    for (double alpha : {0.0, 1.0, 2.0}) {
      const double ab = focal_frequency(a, b, alpha).item();
      EXPECT_GE(ab, 0.0);
      EXPECT_NEAR(ab, focal_frequency(b, a, alpha).item(), 1e-12 * (1 + ab));
    }
  }
}

TEST(FocalFrequency, AlphaZeroIsParsevalScaledMse) {
  // Unweighted: mean |ΔF|² = HW · mean |Δx|² per channel.
  const auto a = random_tensor({3, 8, 8}, 1, 0, 1), b = random_tensor({3, 8, 8}, 2, 0, 1);
  EXPECT_NEAR(focal_frequency(a, b, 0.0).item(), 64.0 * mse(a, b).item(), 1e-11);
}

TEST(FocalFrequency, WeightCarriesNoGradient) {
  // The gradient equals that of mean(w·|ΔF|²) with w frozen at its value.
  auto p = param({1, 4, 4}, 1, 0, 1);
  const auto g = random_tensor({1, 4, 4}, 2, 0, 1);
  auto grad_of = [&](auto&& f) {
    p.zero_grad();
    Tape tape;
    Tensor loss;
    {
      Tape::Scope scope(tape);
      loss = f();
    }
    tape.backward(loss);
    return p.grad();
  };
  const auto a = grad_of([&] { return focal_frequency(p, g, 1.0); });
  auto [pr, pi] = dft2(reshape(p.detach(), {4, 4}));
  auto [gr, gi] = dft2(reshape(g, {4, 4}));
  std::vector<double> w(16);
  double peak = 0;
  for (std::size_t i = 0; i < 16; ++i) {
    const double dr = pr.data()[i] - gr.data()[i], di = pi.data()[i] - gi.data()[i];
    peak = std::max(peak, w[i] = std::sqrt(dr * dr + di * di));
  }
  for (auto& v : w) v /= peak;
  const auto W = Tensor::from({4, 4}, w);
  const auto b = grad_of([&] {
    auto [qr, qi] = dft2(reshape(p, {4, 4}));
    return mean(mul(W, add(square(sub(qr, gr)), square(sub(qi, gi)))));
  });
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(OpacityReg, IsMeanAlpha) {
  EXPECT_NEAR(opacity_reg(set_with_alpha({0.2, 0.4, 0.9})).item(), 0.5, 1e-15);
  EXPECT_EQ(opacity_reg(GaussianSet::empty()).item(), 0.0);
  EXPECT_NEAR(opacity_reg(set_with_alpha({0.5, 0.5, 0.5, 0.5})).item(), 0.5, 1e-15);
}

TEST(OpacityReg, GradientIsOneOverN) {
  auto g = set_with_alpha({0.1, 0.1, 0.1, 0.1, 0.1});
  g.alpha = param({5}, 3, 0.1, 0.9);
  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    loss = opacity_reg(g);
  }
  tape.backward(loss);
  for (double d : g.alpha.grad()) EXPECT_NEAR(d, 0.2, 1e-15);
}

TEST(TotalLoss, VanishesForPerfectPredictionAndClearSplats) {
  const auto a = random_tensor({3, 16, 16}, 1, 0, 1);
  const auto r = total_loss(a, a, set_with_alpha({1e-12, 1e-12}), LossWeights{});
  EXPECT_NEAR(r.total.item(), 0.0, 1e-12);
}

TEST(TotalLoss, DefaultWeights) {
  const LossWeights w;
  EXPECT_EQ(w.rec, 1.0);
  EXPECT_EQ(w.ffl, 0.1);
  EXPECT_EQ(w.reg, 0.01);
  EXPECT_EQ(w.structure, 0.1);
}

TEST(TotalLoss, OnlyReconstructionReducesToMse) {
  const auto a = random_tensor({3, 16, 16}, 1, 0, 1), b = random_tensor({3, 16, 16}, 2, 0, 1);
  LossWeights w;
  w.ffl = w.reg = w.structure = 0.0;
  const auto r = total_loss(a, b, set_with_alpha({0.3, 0.6}), w);
  EXPECT_NEAR(r.total.item(), mse(a, b).item(), 1e-15);
}

TEST(TotalLoss, PartsRecombine) {
  const auto a = random_tensor({3, 16, 16}, 1, 0, 1), b = random_tensor({3, 16, 16}, 2, 0, 1);
  const auto g = set_with_alpha({0.3, 0.6, 0.1});
  LossWeights w;
  w.rec = 0.7;
  w.ffl = 0.05;
  w.reg = 0.2;
  w.structure = 0.3;
  const auto r = total_loss(a, b, g, w);
  EXPECT_NEAR(r.mse, mse(a, b).item(), 1e-15);
  EXPECT_NEAR(r.ssim_term, (1.0 - ssim(a, b).item()) / 2.0, 1e-15);
  EXPECT_NEAR(r.ffl, focal_frequency(a, b, 1.0).item(), 1e-12);
  EXPECT_NEAR(r.reg, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.total.item(), 0.7 * (r.mse + 0.3 * r.ssim_term) + 0.05 * r.ffl + 0.2 * r.reg, 1e-12);
}

TEST(TotalLoss, GradientsMatchFiniteDifferences) {
  auto p = param({3, 16, 16}, 1, 0, 1);
  const auto gt = random_tensor({3, 16, 16}, 2, 0, 1);
  auto alpha = param({5}, 3, 0.1, 0.9);
  LossWeights w;
  w.alpha_focal = 0.0;  // weights constant, so finite differences see the same function
  auto g = set_with_alpha({0.1, 0.1, 0.1, 0.1, 0.1});
  g.alpha = alpha;
  GradCheckOptions opt;
  opt.samples = 80;
  auto res = check_gradients("total loss", {p, alpha}, [&] { return total_loss(p, gt, g, w).total; }, opt);
  EXPECT_TRUE(res.passed) << res.max_rel_error;
}

TEST(Psnr, KnownValuesAndCap) {
  const auto a = Tensor::full({3, 4, 4}, 0.5);
  EXPECT_EQ(psnr(a, a), kPsnrCap);
  EXPECT_NEAR(psnr(a, Tensor::full({3, 4, 4}, 0.6)), 20.0, 1e-12);
  // mse 0.01 from alternating ±0.1 errors.
  std::vector<double> v(48);
  for (std::size_t i = 0; i < 48; ++i) v[i] = 0.5 + (i % 2 ? 0.1 : -0.1);
  EXPECT_NEAR(psnr(a, Tensor::from({3, 4, 4}, v)), 20.0, 1e-12);
  EXPECT_EQ(psnr(a, Tensor::full({3, 4, 4}, 0.5 + 1e-7)), kPsnrCap);
}
