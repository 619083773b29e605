#include "adaptsplat/config.hpp"

#include "adaptsplat/errors.hpp"

namespace adaptsplat {

PriorVariant parse_prior_variant(const std::string& s) {
  if (s == "wavelet") return PriorVariant::wavelet;
  if (s == "sobel") return PriorVariant::sobel;
  if (s == "fourier") return PriorVariant::fourier;
  if (s == "conv") return PriorVariant::conv;
  throw ArgumentError("unknown prior variant '" + s + "' (wavelet|sobel|fourier|conv)");
}

Fusion parse_fusion(const std::string& s) {
  if (s == "pe") return Fusion::pe;
  if (s == "add") return Fusion::add;
  if (s == "none") return Fusion::none;
  throw ArgumentError("unknown fusion mode '" + s + "' (pe|add|none)");
}

ModelSize parse_model_size(const std::string& s) {
  if (s == "tiny") return ModelSize::tiny;
  if (s == "base") return ModelSize::base;
  throw ArgumentError("unknown model size '" + s + "' (tiny|base)");
}

std::string to_string(PriorVariant v) {
  switch (v) {
    case PriorVariant::wavelet: return "wavelet";
    case PriorVariant::sobel: return "sobel";
    case PriorVariant::fourier: return "fourier";
    case PriorVariant::conv: return "conv";
  }
  return "?";
}

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::pe: return "pe";
    case Fusion::add: return "add";
    case Fusion::none: return "none";
  }
  return "?";
}

std::string to_string(ModelSize s) { return s == ModelSize::tiny ? "tiny" : "base"; }

ModelConfig ModelConfig::tiny() { return {}; }

ModelConfig ModelConfig::base() {
  ModelConfig c;
  c.widths = {32, 64, 128, 256};
  c.d_model = 256;
  c.heads = 4;
  c.ffn_hidden = 512;
  c.decoder_width = 128;
  // Puts the base adapter at about 1.49M parameters.
  c.adapter_hidden = 448;
  return c;
}

}  // namespace adaptsplat
