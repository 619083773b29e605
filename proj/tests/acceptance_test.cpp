// Acceptance suite: one PASS/FAIL line per criterion. With arguments, runs
// only the listed criterion numbers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "adaptsplat/atsp.hpp"
#include "adaptsplat/decoder.hpp"
#include "adaptsplat/experiment.hpp"
#include "adaptsplat/gradcheck.hpp"
#include "adaptsplat/renderer.hpp"
#include "adaptsplat/transformer.hpp"
#include "adaptsplat/wavelet.hpp"
#include "test_util.hpp"

using namespace adaptsplat;
using adaptsplat::testing::random_tensor;
using adaptsplat::testing::values;

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::string failures;

  // Records a failed check; returns the check result for chaining.
  bool check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures += (failures.empty() ? "" : ", ") + what;
    }
    return ok;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double energy(const Tensor& t) {
  double e = 0;
  for (double v : t.data()) e += v * v;
  return e;
}

double max_abs(std::span<const double> a, std::span<const double> b) {
  return adaptsplat::testing::max_abs_diff(a, b);
}

unsigned worker_threads() { return std::clamp(std::thread::hardware_concurrency(), 1u, 8u); }

GaussianSet random_gaussians(std::size_t n, std::uint64_t seed) {
  auto rng = SplitMix64::stream(seed, "acceptance");
  std::vector<Vec3> mu, color, scale;
  std::vector<double> alpha;
  std::vector<Quat> quat;
  for (std::size_t i = 0; i < n; ++i) {
    mu.push_back({rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)});
    color.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    scale.push_back({rng.uniform(0.005, 0.3), rng.uniform(0.005, 0.3), rng.uniform(0.005, 0.3)});
    alpha.push_back(rng.uniform(0.05, 0.95));
    Quat q;
    double norm = 0;
    for (auto& c : q) norm += (c = rng.uniform(-1, 1)) * c;
    for (auto& c : q) c /= std::sqrt(norm);
    quat.push_back(q);
  }
  return GaussianSet::from_values(mu, alpha, color, scale, quat);
}

// 1. Gradient integrity.
void gradient_integrity(Outcome& o) {
  const auto t0 = Clock::now();
  std::size_t cases = 0;
  double worst_op = 0, e2e = 0;
  for (const auto& r : gradcheck_suite(1e-4, 1e-3)) {
    ++cases;
    if (r.name == "end_to_end") e2e = r.max_rel_error;
    else worst_op = std::max(worst_op, r.max_rel_error);
    o.check(r.passed, r.name);
  }
  const double s = seconds_since(t0);
  o.check(s <= 120.0, "runtime over 2 min");
  o.detail << cases << " cases, worst per-op rel err " << worst_op << ", end-to-end " << e2e
           << ", " << s << " s";
}

// 2. Wavelet exactness.
void wavelet_exactness(Outcome& o) {
  double recon = 0, energy_gap = 0;
  for (auto f : {WaveletFilter::haar, WaveletFilter::daubechies4})
    for (const Shape& shape : {Shape{3, 32, 32}, Shape{2, 9, 14}})
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto x = random_tensor(shape, seed);
        const auto s = dwt2(x, f);
        recon = std::max(recon, max_abs(idwt2(s).data(), x.data()));
        if (shape[1] % 2 == 0 && shape[2] % 2 == 0) {
          energy_gap = std::max(energy_gap, std::abs(energy(s.ll) + energy(s.lh) + energy(s.hl) +
                                                     energy(s.hh) - energy(x)));
        }
      }
  o.check(recon <= 1e-10, "reconstruction");
  o.check(energy_gap <= 1e-10, "energy");
  // Steps off the 2×2 block grid: horizontal edges go to LH, vertical to HL.
  double worst_share = 1.0;
  for (auto f : {WaveletFilter::haar, WaveletFilter::daubechies4})
    for (bool horizontal : {true, false}) {
      std::vector<double> v(16 * 16);
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x) v[y * 16 + x] = (horizontal ? y : x) >= 7 ? 1.0 : 0.0;
      const auto s = dwt2(Tensor::from({1, 16, 16}, std::move(v)), f);
      const double hp = energy(s.lh) + energy(s.hl) + energy(s.hh);
      const double share = (horizontal ? energy(s.lh) : energy(s.hl)) / hp;
      worst_share = std::min(worst_share, share);
    }
  o.check(worst_share >= 0.99, "directional share");
  o.detail << "recon err " << recon << ", energy err " << energy_gap
           << ", min directional share " << worst_share;
}

// 3. FA exactness.
void fa_exactness(Outcome& o) {
  const double iso = fractional_anisotropy(Vec3{1, 1, 1});
  const double two = fractional_anisotropy(Vec3{2, 1, 1});
  const double needle = fractional_anisotropy(Vec3{1, 1e-13, 1e-13});
  o.check(std::abs(iso) <= 1e-12, "(1,1,1)");
  o.check(std::abs(two - 1 / std::sqrt(6.0)) <= 1e-12, "(2,1,1)");
  o.check(std::abs(needle - 1.0) <= 1e-12, "degenerate limit");
  auto rng = SplitMix64::stream(3, "fa-invariance");
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 s{rng.uniform(1e-3, 5), rng.uniform(1e-3, 5), rng.uniform(1e-3, 5)};
    const double c = std::exp(rng.uniform(-5, 5));
    worst = std::max(worst, std::abs(fractional_anisotropy(Vec3{c * s[0], c * s[1], c * s[2]}) -
                                     fractional_anisotropy(s)));
  }
  o.check(worst <= 1e-12, "scale invariance");
  o.detail << "FA(2,1,1) err " << std::abs(two - 1 / std::sqrt(6.0)) << ", needle err "
           << std::abs(needle - 1) << ", max invariance err over 1e4 triples " << worst;
}

// 4. Prior-attention reduction.
void attention_reduction(Outcome& o) {
  const auto q = random_tensor({12, 16}, 1, -2, 2), k = random_tensor({12, 16}, 2, -2, 2);
  const auto v = random_tensor({12, 16}, 3), v2 = random_tensor({12, 16}, 4);
  o.check(values(prior_attention(q, k, v, Tensor::zeros({12, 16}), 4)) ==
              values(prior_attention(q, k, v, Tensor(), 4)),
          "op-level bit identity");

  auto cfg = ModelConfig::tiny();
  ParamStore ps(5);
  MultiViewTransformer tr(ps, cfg);
  const auto a = random_tensor({cfg.widths[3], 2, 2}, 6), b = random_tensor({cfg.widths[3], 2, 2}, 7);
  HighFreqPrior z{Tensor::zeros({cfg.d_model, 2, 2}), {}};
  o.check(values(tr.forward({a, b}, {z, z}, Fusion::pe).tokens) ==
              values(tr.forward({a, b}, {}, Fusion::none).tokens),
          "transformer bit identity");

  std::vector<Tensor> w;
  const auto f = random_tensor({12, 16}, 8, -2, 2);
  prior_attention(q, k, v, f, 4, &w);
  double row_err = 0;
  for (const auto& m : w)
    for (std::size_t i = 0; i < 12; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 12; ++j) s += m.data()[i * 12 + j];
      row_err = std::max(row_err, std::abs(s - 1));
    }
  o.check(row_err <= 1e-12, "row sums");
  const double ca = 0.8, cb = -1.3;
  const auto lhs = prior_attention(q, k, add(scale(v, ca), scale(v2, cb)), f, 4);
  const auto rhs = add(scale(prior_attention(q, k, v, f, 4), ca), scale(prior_attention(q, k, v2, f, 4), cb));
  const double lin = max_abs(lhs.data(), rhs.data());
  o.check(lin <= 1e-10, "V-linearity");
  o.detail << "zero prior bit-identical, row-sum err " << row_err << ", V-linearity err " << lin;
}

// 5. Gated skip identities.
void skip_identities(Outcome& o) {
  const auto deep = random_tensor({8, 4, 4}, 1), lateral = random_tensor({8, 8, 8}, 2);
  const auto mask = random_tensor({1, 8, 8}, 3, 0, 1);
  const auto plain = values(add(bilinear_upsample(deep, 2), lateral));
  o.check(values(fuse_scale(deep, lateral, mask, Tensor::from({1}, {0.0}))) == plain, "gamma=0");
  o.check(values(fuse_scale(deep, lateral, Tensor::zeros({1, 8, 8}), Tensor::from({1}, {1.7}))) == plain,
          "mask=0");
  const auto full = fuse_scale(deep, lateral, Tensor::full({1, 8, 8}, 1.0), Tensor::from({1}, {1.0}));
  const auto want = add(bilinear_upsample(deep, 2), scale(lateral, 2.0));
  const double err = max_abs(full.data(), want.data());
  o.check(err == 0.0, "gamma=1, mask=1");
  o.detail << "gamma=0 and mask=0 bit-identical to plain skip, gamma=mask=1 err " << err;
}

// 6. Renderer conservation and determinism.
void renderer_conservation(Outcome& o) {
  const auto cam = camera_ring(8, 4.0, 20.0, 32, 32)[1];
  const auto g = random_gaussians(300, 6);
  RasterTrace trace;
  const auto img = rasterize(project(g, cam), 32, 32, {0.2, 0.1, 0.3}, 1, &trace);
  double sum_err = 0;
  for (double s : trace.coefficient_sum) sum_err = std::max(sum_err, std::abs(s - 1));
  o.check(sum_err <= 1e-12, "coefficient sum");

  CameraView c;
  c.fx = c.fy = 20;
  c.cx = c.cy = 6;
  c.height = c.width = 12;
  const auto two = GaussianSet::from_values({{0.05, 0, 2}, {-0.05, 0.02, 3}}, {0.6, 0.8},
                                            {{1, 0.2, 0.1}, {0.1, 0.3, 0.9}},
                                            {{0.15, 0.1, 0.1}, {0.2, 0.2, 0.1}},
                                            {{1, 0, 0, 0}, {1, 0, 0, 0}});
  const Vec3 bg{0.05, 0.1, 0.15};
  const auto p = project(two, c);
  const auto out = rasterize(p, 12, 12, bg);
  auto weight = [](const ProjectedGaussian& q, double x, double y) {
    const double dx = x - q.mean[0], dy = y - q.mean[1];
    if (std::abs(dx) > 3 * std::sqrt(q.cov[0]) || std::abs(dy) > 3 * std::sqrt(q.cov[2])) return 0.0;
    const double e = q.conic[0] * dx * dx + 2 * q.conic[1] * dx * dy + q.conic[2] * dy * dy;
    return std::min(q.alpha * std::exp(-0.5 * e), kMaxWeight);
  };
  double oracle_err = p.size() == 2 ? 0.0 : INFINITY;
  for (std::size_t y = 0; y < 12 && p.size() == 2; ++y)
    for (std::size_t x = 0; x < 12; ++x) {
      const double w1 = weight(p[0], x, y), w2 = weight(p[1], x, y);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double want = w1 * p[0].color[ch] + (1 - w1) * w2 * p[1].color[ch] +
                            (1 - w1) * (1 - w2) * bg[ch];
        oracle_err = std::max(oracle_err, std::abs(out.data()[ch * 144 + y * 12 + x] - want));
      }
    }
  o.check(oracle_err <= 1e-12, "two-Gaussian oracle");

  const auto serial = render(g, cam, {{0.2, 0.1, 0.3}, 1});
  bool same = values(serial) == values(img);
  for (unsigned t : {2u, 5u, 8u}) same = same && values(render(g, cam, {{0.2, 0.1, 0.3}, t})) == values(serial);
  o.check(same, "parallel determinism");
  o.detail << "coefficient-sum err " << sum_err << ", two-Gaussian oracle err " << oracle_err
           << ", threads 1/2/5/8 bit-identical";
}

// 7. Convergence on tri-gauss.
void convergence(Outcome& o) {
  const auto t0 = Clock::now();
  ExperimentConfig cfg;
  cfg.seed = 0;
  cfg.scene = SceneKind::tri_gauss;
  cfg.iterations = 500;
  cfg.threads = worker_threads();
  const auto scene = make_scene(cfg.scene, cfg.seed, cfg.height, cfg.width);
  const auto r = train(cfg, scene);
  std::vector<double> losses;
  for (const auto& l : r.log) losses.push_back(l.total);
  const double s = seconds_since(t0);
  o.check(r.final.psnr >= r.initial.psnr + 10.0, "PSNR gain");
  o.check(smoothed_nonincreasing(losses, 100, 50), "smoothed loss");
  o.check(s <= 600.0, "runtime over 10 min");
  o.detail << "PSNR " << r.initial.psnr << " -> " << r.final.psnr << " dB, smoothed loss "
           << (smoothed_nonincreasing(losses, 100, 50) ? "non-increasing" : "rises") << ", " << s << " s";
}

// 8. Adapter ablation direction on edge-grid.
void ablation_direction(Outcome& o) {
  const auto t0 = Clock::now();
  ExperimentConfig cfg;
  cfg.seed = 0;
  cfg.scene = SceneKind::edge_grid;
  cfg.threads = worker_threads();
  const auto rows = ablate_fpa(cfg, 5, [](const AblationRow& r) {
    std::fprintf(stderr, "  seed %llu %-8s psnr %.3f mean FA %.4f\n",
                 static_cast<unsigned long long>(r.seed), r.arm.c_str(), r.psnr, r.mean_fa);
  });
  std::size_t fa_wins = 0, psnr_ok = 0;
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    const auto& fpa = rows[i];
    const auto& base = rows[i + 1];
    fa_wins += fpa.mean_fa > base.mean_fa;
    psnr_ok += fpa.psnr >= base.psnr - 0.2;
    o.detail << "seed " << fpa.seed << ": FA " << fpa.mean_fa << " vs " << base.mean_fa << ", PSNR "
             << fpa.psnr << " vs " << base.psnr << "; ";
  }
  const double s = seconds_since(t0);
  o.check(fa_wins >= 4, "FA wins");
  o.check(psnr_ok >= 4, "PSNR within 0.2 dB");
  o.check(s <= 5400.0, "runtime over 90 min");
  o.detail << "FA wins " << fa_wins << "/5, PSNR ok " << psnr_ok << "/5, " << s << " s";
}

// 9. Loss-weight contract.
void loss_weights(Outcome& o) {
  const auto a = random_tensor({3, 32, 32}, 1, 0, 1), b = random_tensor({3, 32, 32}, 2, 0, 1);
  const auto g = random_gaussians(20, 3);
  LossWeights w;
  w.ffl = w.reg = w.structure = 0.0;
  const double err = std::abs(total_loss(a, b, g, w).total.item() - mse(a, b).item());
  o.check(err <= 1e-15, "reduces to mse");
  const LossWeights d;
  o.check(d.rec == 1.0 && d.ffl == 0.1 && d.reg == 0.01, "defaults");
  const ExperimentConfig c;
  o.check(c.weights.rec == 1.0 && c.weights.ffl == 0.1 && c.weights.reg == 0.01, "config defaults");
  o.detail << "|total - mse| = " << err << ", defaults rec " << d.rec << " ffl " << d.ffl << " reg "
           << d.reg;
}

// 10. Format round trips.
void format_round_trips(Outcome& o) {
  const auto dir = fs::temp_directory_path() / "adaptsplat_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto g = random_gaussians(2000, 10);
  export_ply(g, dir / "g.ply");
  const auto back = import_ply(dir / "g.ply");
  double ply_err = 0;
  for (auto [x, y] : {std::pair{&g.mu, &back.mu}, {&g.alpha, &back.alpha}, {&g.color, &back.color},
                      {&g.scale, &back.scale}, {&g.quat, &back.quat}})
    for (std::size_t i = 0; i < x->numel(); ++i)
      ply_err = std::max(ply_err, std::abs(x->data()[i] - y->data()[i]) / std::max(1.0, std::abs(x->data()[i])));
  o.check(back.size() == g.size() && ply_err <= 1e-6, "PLY values");

  const auto t64 = random_tensor({3, 5, 7}, 11);
  const auto t32 = Tensor::from({4, 6}, values(random_tensor({4, 6}, 12)), DType::f32);
  atsp::save(dir / "a.atsp", t64);
  atsp::save(dir / "b.atsp", t32);
  const auto r64 = atsp::load(dir / "a.atsp"), r32 = atsp::load(dir / "b.atsp");
  o.check(r64.shape() == t64.shape() && values(r64) == values(t64), "ATSP f64");
  o.check(r32.dtype() == DType::f32 && values(r32) == values(t32), "ATSP f32");

  const auto mem = summarize_fa(fractional_anisotropy(g.scale));
  const std::string cmd = std::string(ADAPTSPLAT_CLI) + " analyze-fa " + (dir / "g.ply").string();
  std::string text;
  if (FILE* p = popen(cmd.c_str(), "r")) {
    char buf[256];
    while (std::fgets(buf, sizeof buf, p)) text += buf;
    o.check(pclose(p) == 0, "analyze-fa exit code");
  }
  double cli_mean = NAN, cli_median = NAN;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    if (line.rfind("mean FA", 0) == 0) cli_mean = std::stod(line.substr(7));
    if (line.rfind("median FA", 0) == 0) cli_median = std::stod(line.substr(9));
  }
  const double fa_err = std::max(std::abs(cli_mean - mem.mean), std::abs(cli_median - mem.median));
  o.check(fa_err <= 1e-6, "analyze-fa vs in-memory FA");
  fs::remove_all(dir);
  o.detail << "PLY max rel err " << ply_err << ", ATSP exact, analyze-fa mean/median err " << fa_err;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
      {"gradient integrity", gradient_integrity},
      {"wavelet exactness", wavelet_exactness},
      {"FA exactness", fa_exactness},
      {"prior attention reduction", attention_reduction},
      {"gated skip identities", skip_identities},
      {"renderer conservation", renderer_conservation},
      {"convergence on tri-gauss", convergence},
      {"adapter ablation on edge-grid", ablation_direction},
      {"loss-weight contract", loss_weights},
      {"format round trips", format_round_trips},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    o.detail.precision(4);
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::string line = o.detail.str();
    if (!o.failures.empty()) line += (line.empty() ? "[failed: " : "  [failed: ") + o.failures + "]";
    std::printf("criterion %2d %-30s %s  %s\n", n, criteria[i].first, o.pass ? "PASS" : "FAIL", line.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
