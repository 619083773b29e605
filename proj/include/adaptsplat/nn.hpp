#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adaptsplat/atsp.hpp"
#include "adaptsplat/ops.hpp"
#include "adaptsplat/tensor.hpp"

namespace adaptsplat {

/// Owns every named parameter of a model. Each parameter draws its initial
/// values from its own SplitMix64 stream keyed by (seed, name), so adding a
/// parameter never changes the values of the others.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Uniform in ±√(3/fan_in).
  Tensor uniform(const std::string& name, Shape shape, std::size_t fan_in);
  Tensor constant(const std::string& name, Shape shape, double value, bool trainable = true);

  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  const std::map<std::string, Tensor>& all() const { return params_; }
  std::vector<Tensor> trainable() const;
  /// Total entries over parameters whose name starts with `prefix`.
  std::size_t count(const std::string& prefix = "") const;

  /// Detached copies, suitable for checkpointing.
  atsp::NamedTensors snapshot() const;
  /// Overwrites values in place. Names and shapes must match exactly.
  void load(const atsp::NamedTensors& values);
  void zero_grad();

 private:
  Tensor add(const std::string& name, Tensor t);

  std::uint64_t seed_;
  std::map<std::string, Tensor> params_;
};

struct Conv2d {
  Tensor weight;  // [out×in×k×k]
  Tensor bias;    // [out] or undefined
  std::size_t padding = 0;

  static Conv2d make(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
                     std::size_t k, bool zero_init = false);
  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, 1, padding); }
};

struct Linear {
  Tensor weight;  // [out×in]
  Tensor bias;    // [out]

  static Linear make(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
};

struct Norm {
  Tensor gain, bias;

  static Norm make(ParamStore& ps, const std::string& name, std::size_t width);
  Tensor rows(const Tensor& x) const { return layer_norm(x, gain, bias); }
  Tensor channels(const Tensor& x) const { return channel_norm(x, gain, bias); }
};

/// 1×1 convolution as a per-pixel linear map: [C_in×H×W] → [C_out×H×W].
Tensor pointwise(const Linear& l, const Tensor& x);

}  // namespace adaptsplat
