#pragma once

#include <array>
#include <cstddef>
#include <string>

namespace adaptsplat {

enum class PriorVariant { wavelet, sobel, fourier, conv };
enum class Fusion { pe, add, none };
enum class ModelSize { tiny, base };

/// Throw ArgumentError on unknown names.
PriorVariant parse_prior_variant(const std::string& s);
Fusion parse_fusion(const std::string& s);
ModelSize parse_model_size(const std::string& s);
std::string to_string(PriorVariant v);
std::string to_string(Fusion f);
std::string to_string(ModelSize s);

struct ModelConfig {
  std::size_t in_channels = 9;  // RGB + Plücker
  std::array<std::size_t, 4> widths{16, 32, 64, 128};
  std::size_t d_model = 128;
  std::size_t heads = 4;
  std::size_t blocks = 4;
  std::size_t ffn_hidden = 256;
  std::size_t decoder_width = 64;
  std::size_t adapter_hidden = 64;
  std::size_t head_channels = 12;  // alpha 1, scale 3, quat 4, color 3, depth 1
  PriorVariant prior = PriorVariant::wavelet;
  Fusion fusion = Fusion::pe;
  /// Decoder gates train when true; frozen at 0 otherwise.
  bool modulation = true;
  double base_scale = 0.02;
  double near = 0.1;

  static ModelConfig tiny();
  static ModelConfig base();
  static ModelConfig of(ModelSize s) { return s == ModelSize::tiny ? tiny() : base(); }
};

}  // namespace adaptsplat
