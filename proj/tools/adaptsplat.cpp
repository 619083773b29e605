// Command-line front end: train, render, analyze-fa, dwt, ablate, gradcheck.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "adaptsplat/atsp.hpp"
#include "adaptsplat/errors.hpp"
#include "adaptsplat/experiment.hpp"
#include "adaptsplat/gradcheck.hpp"
#include "adaptsplat/image_io.hpp"
#include "adaptsplat/wavelet.hpp"

namespace fs = std::filesystem;
using namespace adaptsplat;

namespace {

constexpr int kOk = 0, kUsage = 1, kNumeric = 2;

// Flags shared by the config-driven subcommands. Anything given on the
// command line overrides the config file.
struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> prior, fusion, scene, out;
  std::optional<std::size_t> iterations, size;
  std::optional<double> lr, lambda_rec, lambda_ffl, lambda_reg, lambda_struct;

  void attach(CLI::App* app, bool training) {
    app->add_option("--config", config, "JSON experiment config")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "random seed");
    app->add_option("--prior-variant", prior, "wavelet|sobel|fourier|conv");
    app->add_option("--fusion", fusion, "pe|add|none");
    app->add_option("--out", out, "output directory");
    if (!training) return;
    app->add_option("--scene", scene, "tri-gauss|edge-grid|checker-box");
    app->add_option("--iterations", iterations, "training iterations");
    app->add_option("--size", size, "square image extent, a multiple of 16");
    app->add_option("--lr", lr, "peak learning rate");
    app->add_option("--lambda-rec", lambda_rec);
    app->add_option("--lambda-ffl", lambda_ffl);
    app->add_option("--lambda-reg", lambda_reg);
    app->add_option("--lambda-struct", lambda_struct);
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : ExperimentConfig::load(config);
    if (seed) c.seed = *seed;
    if (prior) c.prior = parse_prior_variant(*prior);
    if (fusion) c.fusion = parse_fusion(*fusion);
    if (scene) c.scene = parse_scene_kind(*scene);
    if (out) c.out_dir = *out;
    if (iterations) c.iterations = *iterations;
    if (size) c.height = c.width = *size;
    if (lr) c.learning_rate = *lr;
    if (lambda_rec) c.weights.rec = *lambda_rec;
    if (lambda_ffl) c.weights.ffl = *lambda_ffl;
    if (lambda_reg) c.weights.reg = *lambda_reg;
    if (lambda_struct) c.weights.structure = *lambda_struct;
    if (c.out_dir.empty()) c.out_dir = "run";
    return c;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

int cmd_train(const Common& common) {
  const auto cfg = common.resolve();
  const auto scene = make_scene(cfg.scene, cfg.seed, cfg.height, cfg.width);
  const auto result = train(cfg, scene, [&](const IterationLog& l) {
    if (l.iter % 50 == 0 || l.iter + 1 == cfg.iterations) {
      std::printf("iter %5zu  loss %.6f  mse %.6f  lr %.3e\n", l.iter, l.total, l.mse, l.lr);
      std::fflush(stdout);
    }
  });
  write_run(cfg.out_dir, cfg, result);
  std::printf("psnr %.3f -> %.3f dB  ssim %.4f -> %.4f  mean FA %.4f\n", result.initial.psnr,
              result.final.psnr, result.initial.ssim, result.final.ssim, result.final.mean_fa);
  std::printf("wrote %s\n", cfg.out_dir.c_str());
  return kOk;
}

int cmd_render(const Common& common, const std::string& run, bool all_cameras) {
  Common c = common;
  if (c.config.empty()) c.config = (fs::path(run) / "config.json").string();
  auto cfg = c.resolve();
  if (!common.out) cfg.out_dir = run;
  const auto scene = make_scene(cfg.scene, cfg.seed, cfg.height, cfg.width);
  AdaptSplatModel model(cfg.model_config(), cfg.seed);
  model.params().load(atsp::load_container(fs::path(run) / "checkpoint.atsc"));
  auto split = split_views(scene.cameras.size(), cfg.input_views, cfg.target_views);
  if (all_cameras) {
    split.targets.clear();
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) split.targets.push_back(i);
  }
  const auto e = evaluate(model, scene, split, cfg.weights, cfg.threads);
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  for (std::size_t i = 0; i < split.targets.size(); ++i) {
    const std::string stem = "target_" + std::to_string(split.targets[i]);
    write_ppm(out / (stem + ".ppm"), e.renders[i]);
    atsp::save(out / (stem + ".atsp"), e.renders[i]);
  }
  export_ply(e.gaussians, out / "gaussians.ply");
  std::printf("rendered %zu views, psnr %.3f dB, %zu gaussians -> %s\n", split.targets.size(),
              e.psnr, e.gaussians.size(), out.string().c_str());
  return kOk;
}

int cmd_analyze_fa(const std::string& ply, const std::string& csv) {
  const auto g = import_ply(ply);
  const auto s = summarize_fa(fractional_anisotropy(g.scale));
  std::cout << fa_table(s);
  if (!csv.empty()) write_text(csv, fa_csv(s));
  return kOk;
}

int cmd_dwt(const std::string& image, const std::string& filter, const std::string& out) {
  WaveletFilter f;
  if (filter == "haar") f = WaveletFilter::haar;
  else if (filter == "d4") f = WaveletFilter::daubechies4;
  else throw ArgumentError("unknown filter '" + filter + "' (haar|d4)");
  const auto bands = dwt2(read_ppm(image), f);
  const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  fs::create_directories(dir);
  for (const auto& [name, t] : {std::pair{"ll", bands.ll}, {"lh", bands.lh}, {"hl", bands.hl},
                                {"hh", bands.hh}}) {
    atsp::save(dir / (std::string(name) + ".atsp"), t);
    double energy = 0.0;
    for (double v : t.data()) energy += v * v;
    std::printf("%s  %zux%zux%zu  energy %.9g\n", name, t.dim(0), t.dim(1), t.dim(2), energy);
  }
  return kOk;
}

int cmd_ablate(const Common& common, std::size_t seeds) {
  auto cfg = common.resolve();
  if (!common.scene && common.config.empty()) cfg.scene = SceneKind::edge_grid;
  const auto rows = ablate_fpa(cfg, seeds, [](const AblationRow& r) {
    std::printf("seed %llu  %-8s  psnr %.3f  ssim %.4f  mean FA %.4f\n",
                static_cast<unsigned long long>(r.seed), r.arm.c_str(), r.psnr, r.ssim, r.mean_fa);
    std::fflush(stdout);
  });
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  write_text(out / "ablation.csv", ablation_csv(rows));
  write_text(out / "ablation.md", ablation_markdown(rows));
  std::cout << '\n' << ablation_markdown(rows);
  return kOk;
}

int cmd_gradcheck() {
  bool ok = true;
  gradcheck_suite(1e-4, 1e-3, [&](const GradCheckResult& r) {
    ok = ok && r.passed;
    std::printf("%-22s max rel err %.3e  (%zu entries)  %s\n", r.name.c_str(), r.max_rel_error,
                r.checked, r.passed ? "ok" : "FAIL");
    std::fflush(stdout);
  });
  std::printf("%s\n", ok ? "gradcheck passed" : "gradcheck FAILED");
  return ok ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feed-forward Gaussian splatting with a frequency-preserving adapter"};
  app.require_subcommand(1);

  Common train_flags, render_flags, ablate_flags;
  auto* train_cmd = app.add_subcommand("train", "train on a synthetic scene");
  train_flags.attach(train_cmd, true);

  std::string run;
  bool all_cameras = false;
  auto* render_cmd = app.add_subcommand("render", "render target views from a trained run");
  render_flags.attach(render_cmd, false);
  render_cmd->add_option("--run", run, "run directory holding checkpoint.atsc and config.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  render_cmd->add_flag("--all-cameras", all_cameras, "render every ring camera");

  std::string ply, csv;
  auto* fa_cmd = app.add_subcommand("analyze-fa", "fractional anisotropy of a PLY");
  fa_cmd->add_option("ply", ply, "splat PLY")->required()->check(CLI::ExistingFile);
  fa_cmd->add_option("--csv", csv, "also write the histogram as CSV");

  std::string image, filter = "haar", dwt_out;
  auto* dwt_cmd = app.add_subcommand("dwt", "one-level wavelet subbands of a PPM");
  dwt_cmd->add_option("image", image, "P6 image")->required()->check(CLI::ExistingFile);
  dwt_cmd->add_option("--filter", filter, "haar|d4");
  dwt_cmd->add_option("--out", dwt_out, "output directory");

  std::size_t seeds = 5;
  auto* ablate_cmd = app.add_subcommand("ablate", "twin runs with and without the adapter");
  ablate_flags.attach(ablate_cmd, true);
  ablate_cmd->add_option("--seeds", seeds, "number of seeds");

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_flags);
    if (*render_cmd) return cmd_render(render_flags, run, all_cameras);
    if (*fa_cmd) return cmd_analyze_fa(ply, csv);
    if (*dwt_cmd) return cmd_dwt(image, filter, dwt_out);
    if (*ablate_cmd) return cmd_ablate(ablate_flags, seeds);
    if (*gradcheck_cmd) return cmd_gradcheck();
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
