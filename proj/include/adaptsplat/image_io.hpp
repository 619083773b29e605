#pragma once

#include <filesystem>

#include "adaptsplat/tensor.hpp"

namespace adaptsplat {

/// Binary P6, 8 bits per channel: each value is clamped to [0, 1], scaled
/// by 255 and rounded. image is [3×H×W].
void write_ppm(const std::filesystem::path& path, const Tensor& image);

/// Reads P6 with maxval ≤ 255 into [3×H×W] values in [0, 1].
Tensor read_ppm(const std::filesystem::path& path);

}  // namespace adaptsplat
