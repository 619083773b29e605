#include "adaptsplat/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "adaptsplat/errors.hpp"
#include "adaptsplat/image_io.hpp"
#include "adaptsplat/optim.hpp"
#include "adaptsplat/renderer.hpp"

namespace adaptsplat {

using nlohmann::json;

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig m = ModelConfig::of(model);
  m.prior = prior;
  m.fusion = fusion;
  m.modulation = modulation;
  m.near = depth_near;
  return m;
}

std::string ExperimentConfig::to_json() const {
  json j = {{"seed", seed},
            {"model", to_string(model)},
            {"prior_variant", to_string(prior)},
            {"fusion", to_string(fusion)},
            {"modulation", modulation},
            {"scene", to_string(scene)},
            {"height", height},
            {"width", width},
            {"input_views", input_views},
            {"target_views", target_views},
            {"iterations", iterations},
            {"learning_rate", learning_rate},
            {"weight_decay", weight_decay},
            {"warmup_fraction", warmup_fraction},
            {"depth_near", depth_near},
            {"lambda_rec", weights.rec},
            {"lambda_ffl", weights.ffl},
            {"lambda_reg", weights.reg},
            {"lambda_struct", weights.structure},
            {"alpha_focal", weights.alpha_focal},
            {"threads", threads},
            {"out_dir", out_dir}};
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ArgumentError("config: expected a JSON object");
  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "model") c.model = parse_model_size(value.get<std::string>());
      else if (key == "prior_variant") c.prior = parse_prior_variant(value.get<std::string>());
      else if (key == "fusion") c.fusion = parse_fusion(value.get<std::string>());
      else if (key == "modulation") c.modulation = value.get<bool>();
      else if (key == "scene") c.scene = parse_scene_kind(value.get<std::string>());
      else if (key == "height") c.height = value.get<std::size_t>();
      else if (key == "width") c.width = value.get<std::size_t>();
      else if (key == "input_views") c.input_views = value.get<std::size_t>();
      else if (key == "target_views") c.target_views = value.get<std::size_t>();
      else if (key == "iterations") c.iterations = value.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "warmup_fraction") c.warmup_fraction = value.get<double>();
      else if (key == "depth_near") c.depth_near = value.get<double>();
      else if (key == "lambda_rec") c.weights.rec = value.get<double>();
      else if (key == "lambda_ffl") c.weights.ffl = value.get<double>();
      else if (key == "lambda_reg") c.weights.reg = value.get<double>();
      else if (key == "lambda_struct") c.weights.structure = value.get<double>();
      else if (key == "alpha_focal") c.weights.alpha_focal = value.get<double>();
      else if (key == "threads") c.threads = value.get<unsigned>();
      else if (key == "out_dir") c.out_dir = value.get<std::string>();
      else throw ArgumentError("config: unknown key '" + key + "'");
    } catch (const json::exception& e) {
      throw ArgumentError("config: bad value for '" + key + "': " + e.what());
    }
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << to_json();
}

ViewSplit split_views(std::size_t cameras, std::size_t inputs, std::size_t targets) {
  if (inputs == 0 || targets == 0 || inputs + targets > cameras) {
    throw ArgumentError("split: " + std::to_string(inputs) + " inputs and " +
                        std::to_string(targets) + " targets from " + std::to_string(cameras) +
                        " cameras");
  }
  ViewSplit s;
  std::vector<bool> used(cameras, false);
  for (std::size_t i = 0; i < inputs; ++i) {
    const std::size_t c = i * cameras / inputs;
    s.inputs.push_back(c);
    used[c] = true;
  }
  std::vector<std::size_t> rest;
  for (std::size_t c = 0; c < cameras; ++c)
    if (!used[c]) rest.push_back(c);
  for (std::size_t i = 0; i < targets; ++i) s.targets.push_back(rest[i * rest.size() / targets]);
  return s;
}

namespace {

struct SplitData {
  std::vector<Tensor> images;
  std::vector<CameraView> cams;
};

SplitData gather(const SyntheticScene& scene, const std::vector<std::size_t>& idx) {
  SplitData d;
  for (auto i : idx) {
    d.images.push_back(scene.images.at(i));
    d.cams.push_back(scene.cameras.at(i));
  }
  return d;
}

double mean_fa(const GaussianSet& g) {
  if (g.size() == 0) return 0.0;
  Tensor fa;
  try {
    fa = fractional_anisotropy(g.scale.detach());
  } catch (const ArgumentError& e) {
    throw NumericError(std::string("predicted scales underflowed: ") + e.what());
  }
  double s = 0.0;
  for (double v : fa.data()) s += v;
  return s / static_cast<double>(fa.numel());
}

std::string parameter_norms(const ParamStore& ps) {
  std::ostringstream os;
  os << std::setprecision(6);
  for (const auto& [name, t] : ps.all()) {
    double s = 0.0;
    for (double v : t.data()) s += v * v;
    os << "\n  " << name << " " << std::sqrt(s);
  }
  return os.str();
}

}  // namespace

Evaluation evaluate(const AdaptSplatModel& model, const SyntheticScene& scene,
                    const ViewSplit& split, const LossWeights& weights, unsigned threads) {
  const auto in = gather(scene, split.inputs);
  const auto out = model.forward(in.images, in.cams);
  Evaluation e;
  e.gaussians = out.gaussians.detach();
  for (auto t : split.targets) {
    auto img = render(e.gaussians, scene.cameras[t], {{0, 0, 0}, threads});
    const auto r = total_loss(img, scene.images[t], e.gaussians, weights);
    e.loss += r.total.item();
    e.psnr += psnr(img, scene.images[t]);
    e.ssim += ssim(img, scene.images[t]).item();
    e.renders.push_back(img);
  }
  const double n = static_cast<double>(split.targets.size());
  e.loss /= n;
  e.psnr /= n;
  e.ssim /= n;
  e.mean_fa = mean_fa(e.gaussians);
  return e;
}

TrainResult train(const ExperimentConfig& cfg, const SyntheticScene& scene,
                  const ProgressFn& progress) {
  TrainResult res;
  res.split = split_views(scene.cameras.size(), cfg.input_views, cfg.target_views);
  AdaptSplatModel model(cfg.model_config(), cfg.seed);
  AdamWOptions opt_cfg;
  opt_cfg.weight_decay = cfg.weight_decay;
  AdamW opt(model.params().trainable(), opt_cfg);
  const auto in = gather(scene, res.split.inputs);
  res.initial = evaluate(model, scene, res.split, cfg.weights, cfg.threads);
  const double n_targets = static_cast<double>(res.split.targets.size());

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    IterationLog log;
    log.iter = it;
    log.lr = cosine_lr(it, cfg.iterations, cfg.learning_rate, cfg.warmup_fraction);
    try {
      Tape tape;
      Tape::Scope scope(tape);
      const auto out = model.forward(in.images, in.cams);
      Tensor loss;
      for (auto t : res.split.targets) {
        const auto img = render(out.gaussians, scene.cameras[t], {{0, 0, 0}, cfg.threads});
        const auto r = total_loss(img, scene.images[t], out.gaussians, cfg.weights);
        loss = loss.defined() ? add(loss, r.total) : r.total;
        log.mse += r.mse / n_targets;
        log.ssim += r.ssim_term / n_targets;
        log.ffl += r.ffl / n_targets;
        log.reg += r.reg / n_targets;
      }
      loss = scale(loss, 1.0 / n_targets);
      log.total = loss.item();
      if (!std::isfinite(log.total)) throw NumericError("non-finite loss");
      tape.backward(loss);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(it) +
                         "; parameter norms:" + parameter_norms(model.params()));
    }
    for (const auto& p : model.params().trainable()) {
      for (double g : p.grad()) {
        if (!std::isfinite(g)) {
          throw NumericError("non-finite gradient at iteration " + std::to_string(it) +
                             "; parameter norms:" + parameter_norms(model.params()));
        }
      }
    }
    opt.step(log.lr);
    model.params().zero_grad();
    res.log.push_back(log);
    if (progress) progress(log);
  }
  res.final = evaluate(model, scene, res.split, cfg.weights, cfg.threads);
  res.checkpoint = model.params().snapshot();
  return res;
}

std::string metrics_csv(const std::vector<IterationLog>& log) {
  std::ostringstream os;
  os << std::setprecision(17) << "iter,total,mse,ssim,ffl,reg\n";
  for (const auto& l : log) {
    os << l.iter << ',' << l.total << ',' << l.mse << ',' << l.ssim << ',' << l.ffl << ',' << l.reg
       << '\n';
  }
  return os.str();
}

void write_run(const std::filesystem::path& dir, const ExperimentConfig& cfg,
               const TrainResult& result) {
  std::filesystem::create_directories(dir);
  cfg.save(dir / "config.json");
  atsp::save_container(dir / "checkpoint.atsc", result.checkpoint);
  {
    std::ofstream os(dir / "metrics.csv");
    if (!os) throw IoError("cannot write " + (dir / "metrics.csv").string());
    os << metrics_csv(result.log);
  }
  for (std::size_t i = 0; i < result.split.targets.size(); ++i) {
    const std::string stem = "target_" + std::to_string(result.split.targets[i]);
    write_ppm(dir / (stem + ".ppm"), result.final.renders[i]);
    atsp::save(dir / (stem + ".atsp"), result.final.renders[i]);
  }
  export_ply(result.final.gaussians, dir / "gaussians.ply");
}

bool smoothed_nonincreasing(const std::vector<double>& losses, std::size_t start,
                            std::size_t window) {
  double prev = INFINITY;
  for (std::size_t b = start; b + window <= losses.size(); b += window) {
    double s = 0.0;
    for (std::size_t i = b; i < b + window; ++i) s += losses[i];
    s /= static_cast<double>(window);
    if (s > prev) return false;
    prev = s;
  }
  return true;
}

FaSummary summarize_fa(const Tensor& fa) {
  FaSummary s;
  s.count = fa.numel();
  if (s.count == 0) return s;
  std::vector<double> v(fa.data().begin(), fa.data().end());
  double total = 0.0;
  for (double x : v) {
    total += x;
    const auto bin = static_cast<std::size_t>(std::clamp(x, 0.0, 1.0) * kFaBins);
    ++s.bins[std::min(bin, kFaBins - 1)];
  }
  s.mean = total / static_cast<double>(s.count);
  std::sort(v.begin(), v.end());
  const std::size_t mid = s.count / 2;
  s.median = s.count % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
  return s;
}

std::string fa_table(const FaSummary& s) {
  std::ostringstream os;
  os << std::setprecision(9) << "gaussians " << s.count << "\nmean FA   " << s.mean
     << "\nmedian FA " << s.median << "\n\n";
  os << std::fixed << std::setprecision(2) << "  bin          count\n";
  for (std::size_t b = 0; b < kFaBins; ++b) {
    os << "  [" << static_cast<double>(b) / kFaBins << ", " << static_cast<double>(b + 1) / kFaBins
       << (b + 1 == kFaBins ? "]" : ")") << "  " << std::setw(6) << s.bins[b] << '\n';
  }
  return os.str();
}

std::string fa_csv(const FaSummary& s) {
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < kFaBins; ++b) {
    os << static_cast<double>(b) / kFaBins << ',' << static_cast<double>(b + 1) / kFaBins << ','
       << s.bins[b] << '\n';
  }
  return os.str();
}

std::vector<AblationRow> ablate_fpa(const ExperimentConfig& cfg, std::size_t seeds,
                                    const std::function<void(const AblationRow&)>& done) {
  std::vector<AblationRow> rows;
  for (std::size_t k = 0; k < seeds; ++k) {
    const std::uint64_t seed = cfg.seed + k;
    const auto scene = make_scene(cfg.scene, seed, cfg.height, cfg.width);
    for (const bool fpa : {true, false}) {
      ExperimentConfig c = cfg;
      c.seed = seed;
      c.fusion = fpa ? Fusion::pe : Fusion::none;
      c.modulation = fpa;
      const auto r = train(c, scene);
      AblationRow row{seed, fpa ? "fpa" : "baseline", r.final.psnr, r.final.ssim, r.final.mean_fa};
      rows.push_back(row);
      if (done) done(row);
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17) << "seed,arm,psnr,ssim,mean_fa\n";
  for (const auto& r : rows) {
    os << r.seed << ',' << r.arm << ',' << r.psnr << ',' << r.ssim << ',' << r.mean_fa << '\n';
  }
  return os.str();
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "| seed | FA (fpa) | FA (baseline) | PSNR (fpa) | PSNR (baseline) | SSIM (fpa) | SSIM (baseline) |\n"
     << "|---|---|---|---|---|---|---|\n";
  std::size_t fa_wins = 0, psnr_ok = 0, pairs = 0;
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    const auto& a = rows[i].arm == "fpa" ? rows[i] : rows[i + 1];
    const auto& b = rows[i].arm == "fpa" ? rows[i + 1] : rows[i];
    os << "| " << a.seed << " | " << a.mean_fa << " | " << b.mean_fa << " | " << a.psnr << " | "
       << b.psnr << " | " << a.ssim << " | " << b.ssim << " |\n";
    ++pairs;
    if (a.mean_fa > b.mean_fa) ++fa_wins;
    if (a.psnr >= b.psnr - 0.2) ++psnr_ok;
  }
  os << "\nFA higher with the adapter: " << fa_wins << "/" << pairs << " seeds\n"
     << "PSNR within 0.2 dB or better with the adapter: " << psnr_ok << "/" << pairs << " seeds\n";
  return os.str();
}

}  // namespace adaptsplat
