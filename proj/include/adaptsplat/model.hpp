#pragma once

#include <cstdint>
#include <vector>

#include "adaptsplat/backbone.hpp"
#include "adaptsplat/camera.hpp"
#include "adaptsplat/config.hpp"
#include "adaptsplat/decoder.hpp"
#include "adaptsplat/fpa.hpp"
#include "adaptsplat/gaussians.hpp"
#include "adaptsplat/nn.hpp"
#include "adaptsplat/transformer.hpp"

namespace adaptsplat {

struct ModelOutput {
  std::vector<GaussianSet> per_view;
  GaussianSet gaussians;  // all views, view-major
  std::vector<HighFreqPrior> priors;
};

/// Posed images in, one pixel-aligned Gaussian per input pixel out.
class AdaptSplatModel {
 public:
  AdaptSplatModel(const ModelConfig& cfg, std::uint64_t seed);
  AdaptSplatModel(const AdaptSplatModel&) = delete;
  AdaptSplatModel& operator=(const AdaptSplatModel&) = delete;

  /// images[v] is [3×H×W] seen by cams[v].
  ModelOutput forward(const std::vector<Tensor>& images, const std::vector<CameraView>& cams) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const FrequencyAdapter& adapter() const { return adapter_; }
  const DptDecoder& decoder() const { return decoder_; }

 private:
  ModelConfig cfg_;
  ParamStore params_;
  Backbone backbone_;
  FrequencyAdapter adapter_;
  MultiViewTransformer transformer_;
  DptDecoder decoder_;
};

}  // namespace adaptsplat
