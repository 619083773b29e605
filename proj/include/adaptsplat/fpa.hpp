#pragma once

#include <vector>

#include "adaptsplat/config.hpp"
#include "adaptsplat/nn.hpp"

namespace adaptsplat {

/// f_hf is [d_model×H/16×W/16], on the token grid of the input image.
/// masks[i] is [1×H/2^{i+1}×W/2^{i+1}], finest first, one per decoder scale.
struct HighFreqPrior {
  Tensor f_hf;
  std::vector<Tensor> masks;
};

/// Directional high-frequency bands of a shallow map x[C×h×w] at h/2×w/2.
/// Channel blocks follow the LH, HL, HH order: horizontal edges, vertical
/// edges, then the rest, for every variant. `learned` holds the conv
/// variant's kernel [3C×C×3×3] and is ignored otherwise.
Tensor directional_bands(const Tensor& x, PriorVariant variant, const Tensor& learned = {});

/// Fixed 3×3 kernels [3C×C×3×3] for Sobel-y, Sobel-x and Laplacian per
/// channel, scaled by 1/4 so a unit step gives a unit response.
Tensor highpass_kernels(std::size_t channels);

/// Symmetric n×n circulant ideal filter keeping frequencies below
/// `cutoff` cycles per sample (high_pass = false) or at and above it.
Tensor ideal_filter_matrix(std::size_t n, double cutoff, bool high_pass);

/// Bands → two 3×3 bottleneck convs to the token grid, a shared linear
/// projection to d_model, and one 1×1 conv + sigmoid gate per decoder scale.
class FrequencyAdapter {
 public:
  FrequencyAdapter(ParamStore& ps, const ModelConfig& cfg);

  /// shallow is backbone stage 1, [C_1×H/2×W/2].
  HighFreqPrior extract_prior(const Tensor& shallow) const;
  Tensor bands(const Tensor& shallow) const;

  PriorVariant variant() const { return variant_; }
  /// Entries in every adapter parameter, the learned high-pass included.
  std::size_t parameter_count() const;

 private:
  PriorVariant variant_;
  std::size_t channels_;
  Tensor learned_;  // conv variant only
  Conv2d conv1_, conv2_;
  Linear proj_;
  Linear mask1_, mask2_, mask3_;
};

}  // namespace adaptsplat
