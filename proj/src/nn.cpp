#include "adaptsplat/nn.hpp"

#include <cmath>

#include "adaptsplat/errors.hpp"
#include "adaptsplat/random.hpp"

namespace adaptsplat {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  if (params_.count(name)) throw ArgumentError("parameter registered twice: " + name);
  params_.emplace(name, t);
  return t;
}

Tensor ParamStore::uniform(const std::string& name, Shape shape, std::size_t fan_in) {
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
  auto rng = SplitMix64::stream(seed_, "init/" + name);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  auto t = Tensor::from(std::move(shape), std::move(v));
  t.set_requires_grad(true);
  return add(name, t);
}

Tensor ParamStore::constant(const std::string& name, Shape shape, double value, bool trainable) {
  auto t = Tensor::full(std::move(shape), value);
  t.set_requires_grad(trainable);
  return add(name, t);
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ArgumentError("unknown parameter: " + name);
  return it->second;
}

std::vector<Tensor> ParamStore::trainable() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params_)
    if (t.requires_grad()) out.push_back(t);
  return out;
}

std::size_t ParamStore::count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_)
    if (name.compare(0, prefix.size(), prefix) == 0) n += t.numel();
  return n;
}

atsp::NamedTensors ParamStore::snapshot() const {
  atsp::NamedTensors out;
  for (const auto& [name, t] : params_) out.emplace(name, t.detach());
  return out;
}

void ParamStore::load(const atsp::NamedTensors& values) {
  if (values.size() != params_.size()) {
    throw ArgumentError("checkpoint has " + std::to_string(values.size()) + " tensors, model has " +
                        std::to_string(params_.size()));
  }
  for (auto& [name, t] : params_) {
    auto it = values.find(name);
    if (it == values.end()) throw ArgumentError("checkpoint lacks parameter " + name);
    if (it->second.shape() != t.shape()) {
      throw ShapeError("checkpoint parameter " + name + " has shape " +
                       shape_str(it->second.shape()) + ", expected " + shape_str(t.shape()));
    }
    auto dst = t.mutable_data();
    auto src = it->second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

Conv2d Conv2d::make(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
                    std::size_t k, bool zero_init) {
  Conv2d c;
  c.weight = zero_init ? ps.constant(name + ".w", {out, in, k, k}, 0.0)
                       : ps.uniform(name + ".w", {out, in, k, k}, in * k * k);
  c.bias = ps.constant(name + ".b", {out}, 0.0);
  c.padding = k / 2;
  return c;
}

Linear Linear::make(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out) {
  return {ps.uniform(name + ".w", {out, in}, in), ps.constant(name + ".b", {out}, 0.0)};
}

Norm Norm::make(ParamStore& ps, const std::string& name, std::size_t width) {
  return {ps.constant(name + ".g", {width}, 1.0), ps.constant(name + ".b", {width}, 0.0)};
}

Tensor pointwise(const Linear& l, const Tensor& x) {
  if (x.ndim() != 3) throw ShapeError("pointwise: expected [C×H×W], got " + shape_str(x.shape()));
  return rows_to_channels(l(channels_to_rows(x)), x.dim(1), x.dim(2));
}

}  // namespace adaptsplat
