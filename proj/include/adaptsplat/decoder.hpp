#pragma once

#include <vector>

#include "adaptsplat/backbone.hpp"
#include "adaptsplat/config.hpp"
#include "adaptsplat/fpa.hpp"
#include "adaptsplat/nn.hpp"

namespace adaptsplat {

/// upsample(deep, 2) + lateral ⊙ (1 + gamma·mask).
/// deep [C×h×w], lateral [C×2h×2w], mask [1×2h×2w], gamma a scalar tensor.
Tensor fuse_scale(const Tensor& deep, const Tensor& lateral, const Tensor& mask,
                  const Tensor& gamma);

/// Coarse-to-fine decoder. Token map → 1×1 projection, then for scales 3, 2, 1:
/// fuse_scale with the projected pyramid stage and mask, followed by a
/// residual 3×3 refinement. A final ×2 upsample and zero-initialized 3×3
/// conv emit the head channels at input resolution.
class DptDecoder {
 public:
  DptDecoder(ParamStore& ps, const ModelConfig& cfg);

  /// tokens is one view's [d×H/16×W/16] map. prior.masks may be empty,
  /// which uses plain skips.
  Tensor decode(const FeaturePyramid& pyramid, const Tensor& tokens,
                const HighFreqPrior& prior) const;

  /// Gate of pyramid scale 1, 2 or 3.
  const Tensor& gamma(std::size_t scale) const { return gammas_.at(scale - 1); }

 private:
  Linear token_proj_;
  std::vector<Linear> laterals_;  // stages 1..3
  std::vector<Conv2d> refine_;    // scales 1..3
  std::vector<Tensor> gammas_;    // scales 1..3
  Conv2d head_;
};

}  // namespace adaptsplat
