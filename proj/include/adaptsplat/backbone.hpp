#pragma once

#include <vector>

#include "adaptsplat/config.hpp"
#include "adaptsplat/nn.hpp"

namespace adaptsplat {

/// stages[i] is [C_{i+1} × H/2^{i+1} × W/2^{i+1}]; stages[0] is the shallow
/// map fed to the adapter, stages[3] the deep map turned into tokens.
struct FeaturePyramid {
  std::vector<Tensor> stages;
};

/// Four downsampling stages, each: 2×2 mean pool, then twice
/// (3×3 conv → channel norm → ReLU).
class Backbone {
 public:
  Backbone(ParamStore& ps, const ModelConfig& cfg);

  /// image is [in_channels×H×W] with H, W divisible by 16.
  FeaturePyramid encode(const Tensor& image) const;

  const Conv2d& first_conv() const { return stages_[0].conv_a; }

 private:
  struct Stage {
    Conv2d conv_a, conv_b;
    Norm norm_a, norm_b;
  };
  std::size_t in_channels_;
  std::vector<Stage> stages_;
};

}  // namespace adaptsplat
