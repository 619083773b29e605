#include <cmath>

#include "adaptsplat/camera.hpp"
#include "adaptsplat/decoder.hpp"
#include "adaptsplat/gaussians.hpp"
#include "adaptsplat/gradcheck.hpp"
#include "adaptsplat/losses.hpp"
#include "adaptsplat/model.hpp"
#include "adaptsplat/ops.hpp"
#include "adaptsplat/random.hpp"
#include "adaptsplat/renderer.hpp"
#include "adaptsplat/scene.hpp"
#include "adaptsplat/transformer.hpp"
#include "adaptsplat/wavelet.hpp"

namespace adaptsplat {

namespace {

Tensor random(Shape shape, const std::string& tag, double lo = -1.0, double hi = 1.0) {
  auto rng = SplitMix64::stream(0, "gradcheck-data/" + tag);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor leaf(Shape shape, const std::string& tag, double lo = -1.0, double hi = 1.0) {
  auto t = random(std::move(shape), tag, lo, hi);
  t.set_requires_grad(true);
  return t;
}

// Weighted sum with distinct fixed weights, so every output entry matters.
Tensor readout(const Tensor& t, const std::string& tag = "") {
  return sum(mul(t, random(t.shape(), "readout/" + tag + std::to_string(t.numel()))));
}

Tensor readout_bands(const WaveletSubbands& b) {
  return add(add(readout(b.ll, "ll"), readout(b.lh, "lh")),
             add(readout(b.hl, "hl"), readout(b.hh, "hh")));
}

struct Suite {
  GradCheckOptions opt;
  std::vector<GradCheckResult> results;
  const std::function<void(const GradCheckResult&)>& report;

  void run(const std::string& name, std::vector<Tensor> params, const std::function<Tensor()>& f) {
    results.push_back(check_gradients(name, std::move(params), f, opt));
    if (report) report(results.back());
  }
};

void pointwise_ops(Suite& s) {
  auto a = leaf({3, 4}, "a");
  auto b = leaf({3, 4}, "b");
  auto pos = leaf({3, 4}, "pos", 0.3, 2.0);
  auto c = leaf({1}, "c");
  s.run("add", {a, b}, [&] { return readout(add(a, b)); });
  s.run("add_broadcast", {a, c}, [&] { return readout(add(a, c)); });
  s.run("sub", {a, b}, [&] { return readout(sub(a, b)); });
  s.run("mul", {a, b}, [&] { return readout(mul(a, b)); });
  s.run("div", {a, pos}, [&] { return readout(div(a, pos)); });
  s.run("neg", {a}, [&] { return readout(neg(a)); });
  s.run("scale", {a}, [&] { return readout(scale(a, -2.5)); });
  s.run("add_scalar", {a}, [&] { return readout(add_scalar(a, 0.7)); });
  s.run("sigmoid", {a}, [&] { return readout(sigmoid(a)); });
  s.run("exp", {a}, [&] { return readout(exp(a)); });
  s.run("log", {pos}, [&] { return readout(log(pos)); });
  s.run("softplus", {a}, [&] { return readout(softplus(a)); });
  s.run("relu", {a}, [&] { return readout(relu(a)); });
  s.run("sqrt", {pos}, [&] { return readout(sqrt(pos)); });
  s.run("square", {a}, [&] { return readout(square(a)); });
  s.run("sum", {a}, [&] { return square(sum(a)); });
  s.run("mean", {a}, [&] { return square(mean(a)); });
}

void layout_ops(Suite& s) {
  auto a = leaf({3, 4}, "a");
  auto b = leaf({2, 4}, "b");
  auto m = leaf({2, 3, 4}, "m");
  auto n = leaf({2, 3, 5}, "n");
  auto rows = leaf({12, 2}, "rows");
  s.run("reshape", {a}, [&] { return readout(reshape(a, {2, 6})); });
  s.run("transpose", {a}, [&] { return readout(transpose(a)); });
  s.run("concat", {a, b}, [&] { return readout(concat({a, b})); });
  s.run("concat_axis", {m, n}, [&] { return readout(concat({m, n}, 2)); });
  s.run("slice", {a}, [&] { return readout(slice(a, 1, 3)); });
  s.run("channels_to_rows", {m}, [&] { return readout(channels_to_rows(m)); });
  s.run("rows_to_channels", {rows}, [&] { return readout(rows_to_channels(rows, 3, 4)); });
  s.run("repeat", {a}, [&] { return readout(repeat(a, 3)); });
  s.run("crop", {n}, [&] { return readout(crop(n, 1, 2, 2, 3)); });
}

void linear_algebra_ops(Suite& s) {
  auto a = leaf({3, 4}, "a");
  auto b = leaf({4, 5}, "b");
  auto x = leaf({6, 4}, "x");
  auto w = leaf({3, 4}, "w");
  auto bias = leaf({3}, "bias");
  auto img = leaf({2, 5, 6}, "img");
  const auto left = random({3, 5}, "left");
  const auto right = random({4, 6}, "right");
  auto k = leaf({3, 2, 3, 3}, "kernel");
  auto kb = leaf({3}, "kernel-bias");
  auto even = leaf({2, 6, 8}, "even");
  auto odd_img = leaf({2, 7, 9}, "odd-img");
  auto v = leaf({4, 5}, "v");
  auto gain = leaf({5}, "gain");
  auto shift = leaf({5}, "shift");
  auto cg = leaf({2}, "cgain");
  auto cb = leaf({2}, "cshift");
  auto plane = leaf({5, 6}, "plane");
  s.run("matmul", {a, b}, [&] { return readout(matmul(a, b)); });
  s.run("linear", {x, w, bias}, [&] { return readout(linear(x, w, bias)); });
  s.run("separable_transform", {img}, [&] { return readout(separable_transform(img, left, right)); });
  s.run("conv2d_zero", {img, k, kb}, [&] { return readout(conv2d(img, k, kb, 1, 1)); });
  s.run("conv2d_reflect", {img, k, kb},
        [&] { return readout(conv2d(img, k, kb, 1, 1, Padding::reflect)); });
  s.run("conv2d_stride2", {odd_img, k}, [&] { return readout(conv2d(odd_img, k, Tensor(), 2, 1)); });
  s.run("bilinear_upsample", {img}, [&] { return readout(bilinear_upsample(img, 2)); });
  s.run("avg_pool2", {even}, [&] { return readout(avg_pool2(even)); });
  s.run("softmax_rows", {v}, [&] { return readout(softmax(v, 1)); });
  s.run("softmax_cols", {v}, [&] { return readout(softmax(v, 0)); });
  s.run("layer_norm", {v, gain, shift}, [&] { return readout(layer_norm(v, gain, shift)); });
  s.run("channel_norm", {even, cg, cb}, [&] { return readout(channel_norm(even, cg, cb)); });
  s.run("dft2", {plane}, [&] {
    auto [re, im] = dft2(plane);
    return add(readout(re, "re"), readout(im, "im"));
  });
}

void model_ops(Suite& s) {
  auto img = leaf({2, 6, 8}, "img");
  auto odd = leaf({2, 5, 7}, "odd");
  s.run("dwt2_haar", {img}, [&] {
    return readout_bands(dwt2(img));
  });
  s.run("dwt2_d4_odd", {odd}, [&] {
    return readout_bands(dwt2(odd, WaveletFilter::daubechies4));
  });
  s.run("idwt2", {img}, [&] { return readout(idwt2(dwt2(scale(img, 1.5)))); });

  auto q = leaf({6, 8}, "q");
  auto k = leaf({6, 8}, "k");
  auto v = leaf({6, 8}, "v");
  auto f = leaf({6, 8}, "f");
  s.run("prior_attention", {q, k, v, f}, [&] { return readout(prior_attention(q, k, v, f, 2)); });

  auto deep = leaf({3, 2, 3}, "deep");
  auto lateral = leaf({3, 4, 6}, "lateral");
  auto mask = leaf({1, 4, 6}, "mask", 0.0, 1.0);
  auto gamma = leaf({1}, "gamma");
  s.run("fuse_scale", {deep, lateral, mask, gamma},
        [&] { return readout(fuse_scale(deep, lateral, mask, gamma)); });

  auto cam = camera_ring(8, 4.0, 20.0, 4, 4)[3];
  auto decoded = leaf({kHeadChannels, 4, 4}, "decoded");
  s.run("heads", {decoded}, [&] {
    auto g = heads(decoded, cam, 0.02, 3.0);
    return add(add(readout(g.mu, "mu"), readout(g.alpha)),
               add(readout(g.color, "color"), add(readout(g.scale, "scale"), readout(g.quat))));
  });

  const double r = 1.0 / std::sqrt(1.0 + 0.01 + 0.04 + 0.09);
  auto g = GaussianSet::from_values(
      {{0.1, 0.05, 0.0}, {-0.2, 0.1, 0.15}, {0.05, -0.25, -0.1}}, {0.7, 0.5, 0.85},
      {{0.9, 0.2, 0.1}, {0.2, 0.8, 0.3}, {0.1, 0.3, 0.9}},
      {{0.3, 0.15, 0.2}, {0.2, 0.3, 0.1}, {0.25, 0.2, 0.35}},
      {{r, 0.1 * r, -0.2 * r, 0.3 * r}, {1, 0, 0, 0}, {r, -0.3 * r, 0.1 * r, 0.2 * r}});
  for (Tensor* t : {&g.mu, &g.alpha, &g.color, &g.scale, &g.quat}) t->set_requires_grad(true);
  auto view = camera_ring(8, 4.0, 20.0, 16, 16)[1];
  s.run("render", {g.mu, g.alpha, g.color, g.scale, g.quat},
        [&] { return readout(render(g, view, {{0.1, 0.2, 0.3}})); });

  auto pred = leaf({3, 12, 12}, "pred", 0.0, 1.0);
  const auto gt = random({3, 12, 12}, "gt", 0.0, 1.0);
  s.run("mse", {pred}, [&] { return mse(pred, gt); });
  s.run("ssim", {pred}, [&] { return ssim(pred, gt); });
  // The focal weight is held constant by design; with exponent 0 it is
  // constant in value too, so central differences see the same function.
  s.run("focal_frequency", {pred}, [&] { return focal_frequency(pred, gt, 0.0); });
  s.run("opacity_reg", {g.alpha}, [&] { return opacity_reg(g); });
}

void end_to_end(Suite& s, double tolerance) {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.near = 3.0;
  AdaptSplatModel model(cfg, 0);
  // Zero-initialized heads and gates would block every upstream gradient.
  auto rng = SplitMix64::stream(0, "gradcheck-data/end-to-end");
  for (const auto& [name, p] : model.params().all()) {
    const bool gate = name.find("gamma") != std::string::npos;
    const bool head = name.rfind("decoder.head", 0) == 0;
    if (!gate && !head) continue;
    Tensor t = p;  // shares storage
    for (auto& v : t.mutable_data()) v = gate ? 0.5 : rng.uniform(-0.05, 0.05);
  }
  // 32×32 is the smallest extent at which the deepest stage has more than
  // one position; below that its channel norm erases the input entirely.
  const auto scene = make_scene(SceneKind::tri_gauss, 0, 32, 32);
  const std::vector<Tensor> images{scene.images[0], scene.images[4]};
  const std::vector<CameraView> cams{scene.cameras[0], scene.cameras[4]};
  LossWeights w;
  w.alpha_focal = 0.0;
  auto loss = [&] {
    const auto out = model.forward(images, cams);
    return total_loss(render(out.gaussians, scene.cameras[2]), scene.images[2], out.gaussians, w)
        .total;
  };
  GradCheckOptions opt = s.opt;
  opt.tolerance = tolerance;
  opt.samples = 2;
  // Thousands of ReLUs and splat windows put kinks within ±1e-6 of some
  // entries; a shorter stencil stays on one smooth piece.
  opt.step = 1e-7;
  GradCheckResult agg{"end_to_end", 0.0, 0, true};
  for (const auto& [name, p] : model.params().all()) {
    if (!p.requires_grad()) continue;
    auto r = check_gradients("end_to_end/" + name, {p}, loss, opt);
    agg.max_rel_error = std::max(agg.max_rel_error, r.max_rel_error);
    agg.checked += r.checked;
  }
  agg.passed = agg.max_rel_error <= tolerance;
  s.results.push_back(agg);
  if (s.report) s.report(agg);
}

}  // namespace

std::vector<GradCheckResult> gradcheck_suite(double op_tolerance, double end_to_end_tolerance,
                                             const std::function<void(const GradCheckResult&)>& report) {
  Suite s{{}, {}, report};
  s.opt.tolerance = op_tolerance;
  pointwise_ops(s);
  layout_ops(s);
  linear_algebra_ops(s);
  model_ops(s);
  end_to_end(s, end_to_end_tolerance);
  return s.results;
}

}  // namespace adaptsplat
