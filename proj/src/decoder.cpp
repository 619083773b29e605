#include "adaptsplat/decoder.hpp"

#include "adaptsplat/errors.hpp"

namespace adaptsplat {

Tensor fuse_scale(const Tensor& deep, const Tensor& lateral, const Tensor& mask,
                  const Tensor& gamma) {
  if (deep.ndim() != 3 || lateral.ndim() != 3 || mask.ndim() != 3) {
    throw ShapeError("fuse_scale: expected rank-3 maps");
  }
  const Tensor up = bilinear_upsample(deep, 2);
  if (up.shape() != lateral.shape() || mask.dim(0) != 1 || mask.dim(1) != lateral.dim(1) ||
      mask.dim(2) != lateral.dim(2)) {
    throw ShapeError("fuse_scale: upsampled " + shape_str(up.shape()) + ", lateral " +
                     shape_str(lateral.shape()) + ", mask " + shape_str(mask.shape()));
  }
  if (gamma.numel() != 1) throw ShapeError("fuse_scale: gamma must be a scalar");
  const Tensor gate = add_scalar(mul(gamma, repeat(mask, lateral.dim(0))), 1.0);
  return add(up, mul(lateral, gate));
}

DptDecoder::DptDecoder(ParamStore& ps, const ModelConfig& cfg)
    : token_proj_(Linear::make(ps, "decoder.token_proj", cfg.d_model, cfg.decoder_width)) {
  const std::size_t C = cfg.decoder_width;
  for (std::size_t s = 1; s <= 3; ++s) {
    const std::string p = "decoder.s" + std::to_string(s);
    laterals_.push_back(Linear::make(ps, p + ".lateral", cfg.widths[s - 1], C));
    refine_.push_back(Conv2d::make(ps, p + ".refine", C, C, 3));
    gammas_.push_back(ps.constant(p + ".gamma", {1}, 0.0, cfg.modulation));
  }
  head_ = Conv2d::make(ps, "decoder.head", C, cfg.head_channels, 3, /*zero_init=*/true);
}

Tensor DptDecoder::decode(const FeaturePyramid& pyramid, const Tensor& tokens,
                          const HighFreqPrior& prior) const {
  if (pyramid.stages.size() != 4) throw ShapeError("decoder: pyramid must have 4 stages");
  const auto& deepest = pyramid.stages[3];
  if (tokens.ndim() != 3 || tokens.dim(1) != deepest.dim(1) || tokens.dim(2) != deepest.dim(2)) {
    throw ShapeError("decoder: token map " + shape_str(tokens.shape()) +
                     " does not match coarsest scale " + shape_str(deepest.shape()));
  }
  if (!prior.masks.empty() && prior.masks.size() != 3) {
    throw ShapeError("decoder: expected 3 masks, got " + std::to_string(prior.masks.size()));
  }
  Tensor x = pointwise(token_proj_, tokens);
  for (std::size_t s = 3; s >= 1; --s) {
    const Tensor lateral = pointwise(laterals_[s - 1], pyramid.stages[s - 1]);
    if (prior.masks.empty()) {
      const Tensor up = bilinear_upsample(x, 2);
      if (up.shape() != lateral.shape()) {
        throw ShapeError("decoder: scale chain breaks at " + shape_str(lateral.shape()));
      }
      x = add(up, lateral);
    } else {
      x = fuse_scale(x, lateral, prior.masks[s - 1], gammas_[s - 1]);
    }
    x = add(x, refine_[s - 1](relu(x)));
  }
  return head_(relu(bilinear_upsample(x, 2)));
}

}  // namespace adaptsplat
