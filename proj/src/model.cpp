#include "adaptsplat/model.hpp"

#include "adaptsplat/errors.hpp"

namespace adaptsplat {

AdaptSplatModel::AdaptSplatModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      params_(seed),
      backbone_(params_, cfg_),
      adapter_(params_, cfg_),
      transformer_(params_, cfg_),
      decoder_(params_, cfg_) {}

ModelOutput AdaptSplatModel::forward(const std::vector<Tensor>& images,
                                     const std::vector<CameraView>& cams) const {
  if (images.empty() || images.size() != cams.size()) {
    throw ArgumentError("model: need one camera per input image, got " +
                        std::to_string(images.size()) + " images and " +
                        std::to_string(cams.size()) + " cameras");
  }
  ModelOutput out;
  std::vector<FeaturePyramid> pyramids;
  std::vector<Tensor> deep;
  for (std::size_t v = 0; v < images.size(); ++v) {
    const auto& img = images[v];
    if (img.ndim() != 3 || img.dim(0) != 3 || img.dim(1) != cams[v].height ||
        img.dim(2) != cams[v].width) {
      throw ShapeError("model: image " + shape_str(img.shape()) + " for a " +
                       std::to_string(cams[v].height) + "x" + std::to_string(cams[v].width) +
                       " camera");
    }
    pyramids.push_back(backbone_.encode(concat({img, plucker_rays(cams[v])})));
    deep.push_back(pyramids.back().stages[3]);
    out.priors.push_back(adapter_.extract_prior(pyramids.back().stages[0]));
  }
  const TokenGrid tokens = transformer_.forward(deep, out.priors, cfg_.fusion);
  for (std::size_t v = 0; v < images.size(); ++v) {
    const Tensor decoded = decoder_.decode(pyramids[v], tokens.view_map(v), out.priors[v]);
    out.per_view.push_back(heads(decoded, cams[v], cfg_.base_scale, cfg_.near));
  }
  out.gaussians = concat_sets(out.per_view);
  return out;
}

}  // namespace adaptsplat
