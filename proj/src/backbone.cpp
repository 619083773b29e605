#include "adaptsplat/backbone.hpp"

#include "adaptsplat/errors.hpp"

namespace adaptsplat {

Backbone::Backbone(ParamStore& ps, const ModelConfig& cfg) : in_channels_(cfg.in_channels) {
  std::size_t in = cfg.in_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t out = cfg.widths[i];
    const std::string p = "backbone.s" + std::to_string(i + 1);
    stages_.push_back({Conv2d::make(ps, p + ".conv_a", in, out, 3),
                       Conv2d::make(ps, p + ".conv_b", out, out, 3), Norm::make(ps, p + ".norm_a", out),
                       Norm::make(ps, p + ".norm_b", out)});
    in = out;
  }
}

FeaturePyramid Backbone::encode(const Tensor& image) const {
  if (image.ndim() != 3 || image.dim(0) != in_channels_) {
    throw ShapeError("backbone: expected [" + std::to_string(in_channels_) + "×H×W], got " +
                     shape_str(image.shape()));
  }
  if (image.dim(1) % 16 || image.dim(2) % 16 || image.dim(1) == 0 || image.dim(2) == 0) {
    throw ShapeError("backbone: extent " + shape_str(image.shape()) + " not divisible by 16");
  }
  FeaturePyramid pyr;
  Tensor x = image;
  for (const auto& s : stages_) {
    x = avg_pool2(x);
    x = relu(s.norm_a.channels(s.conv_a(x)));
    x = relu(s.norm_b.channels(s.conv_b(x)));
    pyr.stages.push_back(x);
  }
  return pyr;
}

}  // namespace adaptsplat
