#include "adaptsplat/optim.hpp"

#include <cmath>
#include <numbers>

namespace adaptsplat {

AdamW::AdamW(std::vector<Tensor> params, AdamWOptions options)
    : params_(std::move(params)), opt_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double t = static_cast<double>(t_);
  const double c1 = 1.0 - std::pow(opt_.beta1, t), c2 = 1.0 - std::pow(opt_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto x = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    const double decay = p.ndim() >= 2 ? lr * opt_.weight_decay : 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * g[k];
      v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * g[k] * g[k];
      x[k] -= decay * x[k];
      x[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + opt_.eps);
    }
  }
}

double cosine_lr(std::size_t iteration, std::size_t total, double base, double warmup_fraction) {
  if (total == 0) return base;
  const auto warmup = static_cast<std::size_t>(std::ceil(warmup_fraction * static_cast<double>(total)));
  if (iteration < warmup) {
    return base * static_cast<double>(iteration + 1) / static_cast<double>(warmup);
  }
  const double span = static_cast<double>(total - warmup);
  const double progress = span > 0 ? static_cast<double>(iteration - warmup) / span : 1.0;
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

}  // namespace adaptsplat
