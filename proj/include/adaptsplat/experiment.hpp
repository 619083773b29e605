#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "adaptsplat/atsp.hpp"
#include "adaptsplat/config.hpp"
#include "adaptsplat/losses.hpp"
#include "adaptsplat/model.hpp"
#include "adaptsplat/scene.hpp"

namespace adaptsplat {

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ModelSize model = ModelSize::tiny;
  PriorVariant prior = PriorVariant::wavelet;
  Fusion fusion = Fusion::pe;
  bool modulation = true;
  SceneKind scene = SceneKind::tri_gauss;
  std::size_t height = 32, width = 32;
  std::size_t input_views = 4, target_views = 2;
  std::size_t iterations = 500;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double warmup_fraction = 0.05;
  /// Offset of the depth head, D = depth_near + softplus(raw).
  double depth_near = 3.0;
  LossWeights weights;
  unsigned threads = 1;
  std::string out_dir;

  ModelConfig model_config() const;

  /// Flat JSON object. Parsing rejects unknown keys and ill-typed values
  /// with ArgumentError; absent keys keep their defaults.
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// Input cameras evenly spaced around the ring; targets evenly spaced among
/// the rest.
struct ViewSplit {
  std::vector<std::size_t> inputs, targets;
};
ViewSplit split_views(std::size_t cameras, std::size_t inputs, std::size_t targets);

struct IterationLog {
  std::size_t iter = 0;
  double total = 0, mse = 0, ssim = 0, ffl = 0, reg = 0;
  double lr = 0;
};

struct Evaluation {
  std::vector<Tensor> renders;  // one per target view
  GaussianSet gaussians;
  double loss = 0;
  double psnr = 0;  // mean over targets
  double ssim = 0;  // mean SSIM over targets
  double mean_fa = 0;
};

/// Forward-only pass of `model` on the split, no tape.
Evaluation evaluate(const AdaptSplatModel& model, const SyntheticScene& scene,
                    const ViewSplit& split, const LossWeights& weights, unsigned threads = 1);

struct TrainResult {
  ViewSplit split;
  std::vector<IterationLog> log;
  Evaluation initial, final;
  atsp::NamedTensors checkpoint;
};

using ProgressFn = std::function<void(const IterationLog&)>;

/// Throws NumericError naming the iteration and every parameter's norm if
/// the loss or a gradient turns non-finite.
TrainResult train(const ExperimentConfig& cfg, const SyntheticScene& scene,
                  const ProgressFn& progress = {});

/// Writes checkpoint.atsc, metrics.csv, config.json, gaussians.ply and
/// target_<camera>.ppm / .atsp into `dir`.
void write_run(const std::filesystem::path& dir, const ExperimentConfig& cfg,
               const TrainResult& result);

std::string metrics_csv(const std::vector<IterationLog>& log);

/// Means over consecutive `window`-iteration blocks starting at `start`
/// never increase.
bool smoothed_nonincreasing(const std::vector<double>& losses, std::size_t start = 100,
                            std::size_t window = 50);

inline constexpr std::size_t kFaBins = 20;

/// FA statistics with a histogram of kFaBins equal bins over [0, 1].
struct FaSummary {
  std::size_t count = 0;
  double mean = 0, median = 0;
  std::array<std::size_t, kFaBins> bins{};
};
FaSummary summarize_fa(const Tensor& fa);
std::string fa_table(const FaSummary& s);
/// Columns bin_lo,bin_hi,count.
std::string fa_csv(const FaSummary& s);

struct AblationRow {
  std::uint64_t seed = 0;
  std::string arm;  // "fpa" or "baseline"
  double psnr = 0, ssim = 0, mean_fa = 0;
};

/// Twin runs per seed: fpa (fusion pe, gates trainable) and baseline
/// (fusion none, gates frozen at 0), over seeds cfg.seed .. cfg.seed+seeds−1.
std::vector<AblationRow> ablate_fpa(const ExperimentConfig& cfg, std::size_t seeds = 5,
                                    const std::function<void(const AblationRow&)>& done = {});
std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_markdown(const std::vector<AblationRow>& rows);

}  // namespace adaptsplat
