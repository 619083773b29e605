#pragma once

#include <vector>

#include "adaptsplat/config.hpp"
#include "adaptsplat/fpa.hpp"
#include "adaptsplat/nn.hpp"

namespace adaptsplat {

/// tokens is [V·N×d] with each view's N = grid_h·grid_w tokens contiguous,
/// in row-major grid order.
struct TokenGrid {
  Tensor tokens;
  std::size_t views = 0, grid_h = 0, grid_w = 0;

  std::size_t per_view() const { return grid_h * grid_w; }
  std::size_t view_of(std::size_t token) const { return token / per_view(); }
  /// Throws ShapeError if the buffer does not hold V·N rows.
  void validate() const;
  /// View v's tokens as a [d×grid_h×grid_w] map.
  Tensor view_map(std::size_t v) const;
};

/// Flattens [d×h×w] maps (one per view) into a grid.
TokenGrid to_tokens(const std::vector<Tensor>& maps);

/// Multi-head softmax((Q+F)(K+F)ᵀ/√d_head)·V over rows of [N×d] inputs,
/// heads taking contiguous column blocks. An undefined `f_hf` means none.
/// If `weights` is given it receives one [N×N] attention matrix per head.
Tensor prior_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& f_hf,
                       std::size_t heads, std::vector<Tensor>* weights = nullptr);

/// Pre-norm block: x += W_o·attn(LN(x)), x += FFN(LN(x)).
class AttentionBlock {
 public:
  AttentionBlock(ParamStore& ps, const std::string& name, const ModelConfig& cfg);

  /// f_hf is [V·N×d] or undefined.
  TokenGrid operator()(const TokenGrid& x, const Tensor& f_hf, Fusion fusion) const;

  Linear wq, wk, wv, wo, ffn1, ffn2;
  Norm ln1, ln2;
  std::size_t heads;
};

class MultiViewTransformer {
 public:
  MultiViewTransformer(ParamStore& ps, const ModelConfig& cfg);

  /// deep[v] is backbone stage 4 of view v. priors is empty or one per view.
  TokenGrid forward(const std::vector<Tensor>& deep, const std::vector<HighFreqPrior>& priors,
                    Fusion fusion) const;

  const std::vector<AttentionBlock>& blocks() const { return blocks_; }

 private:
  Linear embed_;
  std::vector<AttentionBlock> blocks_;
  Norm out_norm_;
};

}  // namespace adaptsplat
