#pragma once

#include <vector>

#include "adaptsplat/tensor.hpp"

namespace adaptsplat {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled decay, applied to parameters of rank ≥ 2 only.
  double weight_decay = 0.01;
};

class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWOptions options = {});

  /// One update with learning rate `lr` from the accumulated gradients.
  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamWOptions opt_;
  std::size_t t_ = 0;
};

/// Linear warmup over the first ⌈warmup_fraction·total⌉ iterations, then
/// cosine decay from `base` to 0 at `total`.
double cosine_lr(std::size_t iteration, std::size_t total, double base,
                 double warmup_fraction = 0.05);

}  // namespace adaptsplat
