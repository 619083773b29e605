#include "adaptsplat/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adaptsplat/errors.hpp"
#include "adaptsplat/random.hpp"

namespace adaptsplat {

GradCheckResult check_gradients(std::string name, std::vector<Tensor> params,
                                const std::function<Tensor()>& loss_fn,
                                const GradCheckOptions& options) {
  for (auto& p : params) {
    p.zero_grad();
    p.set_requires_grad(true);
  }
  double loss_value = 0.0;
  {
    Tape tape;
    Tensor loss;
    {
      Tape::Scope scope(tape);
      loss = loss_fn();
    }
    tape.backward(loss);
    loss_value = loss.item();
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.push_back(p.grad());

  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t j = 0; j < params[i].numel(); ++j) entries.emplace_back(i, j);
  if (options.samples != 0 && options.samples < entries.size()) {
    auto rng = SplitMix64::stream(options.seed, "gradcheck/" + name);
    for (std::size_t i = 0; i < options.samples; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.next() % (entries.size() - i));
      std::swap(entries[i], entries[j]);
    }
    entries.resize(options.samples);
  }

  const double noise = options.noise_ulps * std::numeric_limits<double>::epsilon() *
                       std::abs(loss_value) / options.step;
  const double floor = std::max(options.floor, noise);
  GradCheckResult result{std::move(name), 0.0, 0, true};
  for (auto [pi, ei] : entries) {
    auto values = params[pi].mutable_data();
    const double orig = values[ei];
    values[ei] = orig + options.step;
    const double up = loss_fn().item();
    values[ei] = orig - options.step;
    const double down = loss_fn().item();
    values[ei] = orig;
    const double numeric = (up - down) / (2.0 * options.step);
    const double a = analytic[pi][ei];
    if (!std::isfinite(numeric) || !std::isfinite(a)) {
      throw NumericError("gradcheck " + result.name + ": non-finite gradient");
    }
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
    ++result.checked;
  }
  result.passed = result.max_rel_error <= options.tolerance;
  for (auto& p : params) p.zero_grad();
  return result;
}

}  // namespace adaptsplat
