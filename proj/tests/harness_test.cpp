#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "adaptsplat/errors.hpp"
#include "adaptsplat/experiment.hpp"
#include "adaptsplat/image_io.hpp"
#include "adaptsplat/optim.hpp"
#include "test_util.hpp"

using namespace adaptsplat;
using adaptsplat::testing::random_tensor;
using adaptsplat::testing::values;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("adaptsplat_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig short_config(std::size_t iterations) {
  ExperimentConfig c;
  c.iterations = iterations;
  return c;
}

// 4-connected components of non-background pixels, grouped by dominant channel.
std::size_t color_components(const Tensor& img, double thresh) {
  const std::size_t H = img.dim(1), W = img.dim(2);
  std::vector<int> color(H * W, -1);
  for (std::size_t p = 0; p < H * W; ++p) {
    double m = thresh;
    for (int c = 0; c < 3; ++c)
      if (img.data()[c * H * W + p] > m) {
        m = img.data()[c * H * W + p];
        color[p] = c;
      }
  }
  std::vector<bool> seen(H * W, false);
  std::size_t count = 0;
  for (std::size_t s = 0; s < H * W; ++s) {
    if (seen[s] || color[s] < 0) continue;
    ++count;
    std::vector<std::size_t> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t y = p / W, x = p % W;
      const std::size_t nb[4] = {y > 0 ? p - W : p, y + 1 < H ? p + W : p, x > 0 ? p - 1 : p,
                                 x + 1 < W ? p + 1 : p};
      for (std::size_t q : nb)
        if (!seen[q] && color[q] == color[s]) {
          seen[q] = true;
          stack.push_back(q);
        }
    }
  }
  return count;
}

}  // namespace

TEST(Scene, DeterministicPerSeed) {
  const auto a = make_scene(SceneKind::tri_gauss, 3), b = make_scene(SceneKind::tri_gauss, 3);
  const auto c = make_scene(SceneKind::tri_gauss, 4);
  ASSERT_EQ(a.images.size(), kRingCameras);
  for (std::size_t i = 0; i < kRingCameras; ++i) EXPECT_EQ(values(a.images[i]), values(b.images[i]));
  EXPECT_EQ(values(a.gt.mu), values(b.gt.mu));
  EXPECT_NE(values(a.gt.mu), values(c.gt.mu));
}

TEST(Scene, RingGeometry) {
  const auto s = make_scene(SceneKind::edge_grid, 0, 32, 48);
  for (const auto& cam : s.cameras) {
    EXPECT_EQ(cam.height, 32u);
    EXPECT_EQ(cam.width, 48u);
    const auto o = cam.center();
    EXPECT_NEAR(std::sqrt(o[0] * o[0] + o[1] * o[1] + o[2] * o[2]), kRingRadius, 1e-12);
    EXPECT_NEAR(std::asin(o[2] / kRingRadius), kRingElevationDeg * std::numbers::pi / 180.0, 1e-12);
  }
  for (const auto& img : s.images) EXPECT_EQ(img.shape(), (Shape{3, 32, 48}));
}

TEST(Scene, TriGaussShowsThreeColorRegions) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto s = make_scene(SceneKind::tri_gauss, seed);
    for (std::size_t i = 0; i < s.images.size(); ++i)
      EXPECT_GE(color_components(s.images[i], 0.05), 3u) << "seed " << seed << " camera " << i;
  }
}

TEST(Scene, EdgeGridIsDominatedByHorizontalEdges) {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    for (const auto& img : make_scene(SceneKind::edge_grid, seed).images) {
      double vertical = 0, horizontal = 0;  // energy of d/dy and d/dx
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y + 1 < 32; ++y)
          for (std::size_t x = 0; x + 1 < 32; ++x) {
            const double* p = img.data().data() + (c * 32 + y) * 32 + x;
            vertical += (p[32] - p[0]) * (p[32] - p[0]);
            horizontal += (p[1] - p[0]) * (p[1] - p[0]);
          }
      EXPECT_GE(vertical, 10.0 * horizontal) << seed;
    }
}

TEST(Scene, UnknownKindIsRejected) {
  EXPECT_THROW(parse_scene_kind("sphere"), ArgumentError);
  for (auto k : {SceneKind::tri_gauss, SceneKind::edge_grid, SceneKind::checker_box})
    EXPECT_EQ(parse_scene_kind(to_string(k)), k);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c;
  c.seed = 17;
  c.prior = PriorVariant::sobel;
  c.fusion = Fusion::add;
  c.modulation = false;
  c.scene = SceneKind::checker_box;
  c.height = 48;
  c.width = 64;
  c.iterations = 123;
  c.learning_rate = 3.5e-4;
  c.depth_near = 2.25;
  c.weights.ffl = 0.3;
  c.weights.structure = 0.0;
  c.weights.alpha_focal = 2.0;
  c.threads = 3;
  c.out_dir = "runs/x";
  const auto d = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(d.to_json(), c.to_json());
  EXPECT_EQ(d.seed, 17u);
  EXPECT_EQ(d.prior, PriorVariant::sobel);
  EXPECT_EQ(d.fusion, Fusion::add);
  EXPECT_FALSE(d.modulation);
  EXPECT_EQ(d.learning_rate, 3.5e-4);
  EXPECT_EQ(d.weights.ffl, 0.3);
  EXPECT_EQ(d.model_config().near, 2.25);
  EXPECT_EQ(d.model_config().prior, PriorVariant::sobel);
}

TEST(Config, PartialJsonKeepsDefaults) {
  const auto c = ExperimentConfig::from_json(R"({"seed": 5, "lambda_ffl": 0.2})");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.weights.ffl, 0.2);
  EXPECT_EQ(c.weights.rec, 1.0);
  EXPECT_EQ(c.iterations, ExperimentConfig{}.iterations);
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(ExperimentConfig::from_json(R"({"sed": 5})"), ArgumentError);
  EXPECT_THROW(ExperimentConfig::from_json(R"({"seed": "five"})"), ArgumentError);
  EXPECT_THROW(ExperimentConfig::from_json(R"({"prior_variant": "laplace"})"), ArgumentError);
  EXPECT_THROW(ExperimentConfig::from_json("[1, 2]"), ArgumentError);
  EXPECT_THROW(ExperimentConfig::from_json("{"), ArgumentError);
}

TEST(Config, FileRoundTrip) {
  const auto dir = temp_dir("config");
  ExperimentConfig c;
  c.seed = 9;
  c.save(dir / "c.json");
  EXPECT_EQ(ExperimentConfig::load(dir / "c.json").to_json(), c.to_json());
  EXPECT_THROW(ExperimentConfig::load(dir / "missing.json"), IoError);
  fs::remove_all(dir);
}

TEST(Split, EvenlySpacedInputsAndTargets) {
  const auto s = split_views(8, 4, 2);
  EXPECT_EQ(s.inputs, (std::vector<std::size_t>{0, 2, 4, 6}));
  EXPECT_EQ(s.targets, (std::vector<std::size_t>{1, 5}));
  const auto t = split_views(8, 2, 1);
  EXPECT_EQ(t.inputs, (std::vector<std::size_t>{0, 4}));
  EXPECT_EQ(t.targets, (std::vector<std::size_t>{1}));
  EXPECT_THROW(split_views(8, 6, 3), ArgumentError);
  EXPECT_THROW(split_views(8, 0, 2), ArgumentError);
  EXPECT_THROW(split_views(8, 4, 0), ArgumentError);
}

TEST(Optimizer, FirstAdamStepMovesBySignedLearningRate) {
  // Bias correction makes the first step lr·g/(|g|+eps) per entry.
  auto vec = Tensor::from({3}, {1.0, -2.0, 0.5});
  auto mat = Tensor::from({1, 2}, {1.0, -1.0});
  vec.set_requires_grad(true);
  mat.set_requires_grad(true);
  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    loss = add(sum(scale(vec, 3.0)), sum(scale(mat, -0.5)));
  }
  tape.backward(loss);
  AdamWOptions o;
  o.weight_decay = 0.1;
  AdamW opt({vec, mat}, o);
  const double lr = 0.01;
  opt.step(lr);
  EXPECT_EQ(opt.steps(), 1u);
  const double sv = lr * 3.0 / (3.0 + 1e-8), sm = lr * 0.5 / (0.5 + 1e-8);
  EXPECT_NEAR(vec.data()[0], 1.0 - sv, 1e-15);  // rank 1: no decay
  EXPECT_NEAR(vec.data()[1], -2.0 - sv, 1e-15);
  EXPECT_NEAR(mat.data()[0], 1.0 * (1 - lr * 0.1) + sm, 1e-15);
  EXPECT_NEAR(mat.data()[1], -1.0 * (1 - lr * 0.1) + sm, 1e-15);
}

TEST(Optimizer, ConvergesOnQuadratic) {
  auto x = Tensor::from({2}, {3.0, -4.0});
  x.set_requires_grad(true);
  AdamWOptions o;
  o.weight_decay = 0.0;
  AdamW opt({x}, o);
  for (int i = 0; i < 2000; ++i) {
    x.zero_grad();
    Tape tape;
    Tensor loss;
    {
      Tape::Scope scope(tape);
      loss = sum(square(add_scalar(x, -1.0)));
    }
    tape.backward(loss);
    opt.step(0.05 * cosine_lr(i, 2000, 1.0));
  }
  EXPECT_NEAR(x.data()[0], 1.0, 1e-3);
  EXPECT_NEAR(x.data()[1], 1.0, 1e-3);
}

TEST(Schedule, WarmupThenCosine) {
  // 100 iterations, 5 warmup steps.
  EXPECT_NEAR(cosine_lr(0, 100, 1.0), 0.2, 1e-15);
  EXPECT_NEAR(cosine_lr(4, 100, 1.0), 1.0, 1e-15);
  EXPECT_NEAR(cosine_lr(5, 100, 1.0), 1.0, 1e-15);
  EXPECT_NEAR(cosine_lr(5 + 95 / 2.0, 100, 1.0), 0.5 * (1 + std::cos(std::numbers::pi * 47 / 95.0)),
              1e-15);
  EXPECT_LT(cosine_lr(99, 100, 1.0), 1e-3);
  for (std::size_t i = 5; i + 1 < 100; ++i) EXPECT_GE(cosine_lr(i, 100, 2.0), cosine_lr(i + 1, 100, 2.0));
}

TEST(Smoothing, BlockMeans) {
  std::vector<double> down(300);
  for (std::size_t i = 0; i < 300; ++i) down[i] = 1.0 / (1.0 + i) + 0.01 * ((i % 2) ? 1 : -1);
  EXPECT_TRUE(smoothed_nonincreasing(down));
  auto bump = down;
  for (std::size_t i = 200; i < 250; ++i) bump[i] += 0.1;
  EXPECT_FALSE(smoothed_nonincreasing(bump));
  // Early iterations are ignored.
  auto early = down;
  early[10] = 100.0;
  EXPECT_TRUE(smoothed_nonincreasing(early));
}

TEST(FaSummary, StatisticsAndBins) {
  const auto s = summarize_fa(Tensor::from({6}, {0.0, 0.04, 0.5, 0.51, 0.97, 1.0}));
  EXPECT_EQ(s.count, 6u);
  EXPECT_NEAR(s.mean, 3.02 / 6.0, 1e-15);
  EXPECT_NEAR(s.median, 0.505, 1e-15);
  EXPECT_EQ(s.bins[0], 2u);
  EXPECT_EQ(s.bins[10], 2u);
  EXPECT_EQ(s.bins[19], 2u);
  std::size_t total = 0;
  for (auto b : s.bins) total += b;
  EXPECT_EQ(total, 6u);
  EXPECT_EQ(summarize_fa(Tensor::from({3}, {0.1, 0.9, 0.3})).median, 0.3);
  const auto csv = fa_csv(s);
  EXPECT_EQ(csv.rfind("bin_lo,bin_hi,count\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
}

TEST(ImageIo, PpmRoundTripAndClamp) {
  const auto dir = temp_dir("ppm");
  std::vector<double> v(3 * 5 * 4);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i * 37) % 256) / 255.0;
  const auto img = Tensor::from({3, 5, 4}, v);
  write_ppm(dir / "a.ppm", img);
  const auto back = read_ppm(dir / "a.ppm");
  ASSERT_EQ(back.shape(), (Shape{3, 5, 4}));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(back.data()[i], v[i], 1e-15);
  write_ppm(dir / "b.ppm", Tensor::from({3, 1, 2}, {-0.5, 1.5, 0.0, 1.0, 2.0, -1.0}));
  EXPECT_EQ(values(read_ppm(dir / "b.ppm")), (std::vector<double>{0, 1, 0, 1, 1, 0}));
  EXPECT_THROW(read_ppm(dir / "missing.ppm"), IoError);
  std::ofstream(dir / "bad.ppm") << "P3\n1 1\n255\n0 0 0\n";
  EXPECT_THROW(read_ppm(dir / "bad.ppm"), IoError);
  fs::remove_all(dir);
}

TEST(Training, ZeroIterationsLeavesModelAtInit) {
  const auto scene = make_scene(SceneKind::tri_gauss, 0);
  const auto cfg = short_config(0);
  const auto r = train(cfg, scene);
  EXPECT_TRUE(r.log.empty());
  AdaptSplatModel fresh(cfg.model_config(), cfg.seed);
  const auto init = fresh.params().snapshot();
  ASSERT_EQ(r.checkpoint.size(), init.size());
  for (const auto& [name, t] : init) EXPECT_EQ(values(r.checkpoint.at(name)), values(t)) << name;
  EXPECT_EQ(r.initial.loss, r.final.loss);
  // Zero-initialized heads: every Gaussian is isotropic.
  EXPECT_EQ(r.initial.mean_fa, 0.0);
}

TEST(Training, FirstLoggedLossMatchesEvaluation) {
  const auto scene = make_scene(SceneKind::tri_gauss, 0);
  const auto r = train(short_config(1), scene);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_NEAR(r.log[0].total, r.initial.loss, 1e-12);
  const auto& l = r.log[0];
  const LossWeights w;
  EXPECT_NEAR(l.total, w.rec * (l.mse + w.structure * l.ssim) + w.ffl * l.ffl + w.reg * l.reg, 1e-12);
}

TEST(Training, RunsAreBitwiseReproducible) {
  const auto scene = make_scene(SceneKind::edge_grid, 2);
  auto cfg = short_config(3);
  cfg.seed = 2;
  const auto a = train(cfg, scene);
  cfg.threads = 3;
  const auto b = train(cfg, scene);
  ASSERT_EQ(a.log.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.log[i].total, b.log[i].total);
  for (const auto& [name, t] : a.checkpoint) EXPECT_EQ(values(t), values(b.checkpoint.at(name))) << name;
  EXPECT_EQ(values(a.final.renders[0]), values(b.final.renders[0]));
}

TEST(Training, NonFiniteLossIsANumericError) {
  const auto scene = make_scene(SceneKind::tri_gauss, 0);
  auto cfg = short_config(3);
  cfg.learning_rate = std::numeric_limits<double>::quiet_NaN();
  try {
    train(cfg, scene);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("iteration 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("decoder.head.w"), std::string::npos) << msg;
  }
}

TEST(Training, MetricsCsvHasOneRowPerIteration) {
  const auto scene = make_scene(SceneKind::tri_gauss, 0);
  const auto r = train(short_config(2), scene);
  const auto csv = metrics_csv(r.log);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "iter,total,mse,ssim,ffl,reg");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
    EXPECT_EQ(line.rfind(std::to_string(rows) + ",", 0), 0u);
    ++rows;
  }
  EXPECT_EQ(rows, 2u);
}

TEST(Training, WriteRunProducesEveryArtifact) {
  const auto dir = temp_dir("run");
  const auto scene = make_scene(SceneKind::tri_gauss, 0);
  const auto cfg = short_config(1);
  const auto r = train(cfg, scene);
  write_run(dir, cfg, r);
  for (const char* f : {"config.json", "checkpoint.atsc", "metrics.csv", "gaussians.ply",
                        "target_1.ppm", "target_1.atsp", "target_5.ppm", "target_5.atsp"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(ExperimentConfig::load(dir / "config.json").to_json(), cfg.to_json());
  const auto ck = atsp::load_container(dir / "checkpoint.atsc");
  for (const auto& [name, t] : r.checkpoint) EXPECT_EQ(values(ck.at(name)), values(t)) << name;
  EXPECT_EQ(values(atsp::load(dir / "target_5.atsp")), values(r.final.renders[1]));
  EXPECT_EQ(import_ply(dir / "gaussians.ply").size(), 4u * 32 * 32);
  fs::remove_all(dir);
}

TEST(Ablation, ZeroIterationArmsAgree) {
  auto cfg = short_config(0);
  cfg.scene = SceneKind::edge_grid;
  const auto rows = ablate_fpa(cfg, 2);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < 4; i += 2) {
    EXPECT_EQ(rows[i].arm, "fpa");
    EXPECT_EQ(rows[i + 1].arm, "baseline");
    EXPECT_EQ(rows[i].seed, rows[i + 1].seed);
    EXPECT_EQ(rows[i].psnr, rows[i + 1].psnr);
    EXPECT_EQ(rows[i].mean_fa - rows[i + 1].mean_fa, 0.0);
  }
  const auto csv = ablation_csv(rows);
  EXPECT_EQ(csv.rfind("seed,arm,psnr,ssim,mean_fa\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(ablation_markdown(rows).find("| seed |"), std::string::npos);
}
