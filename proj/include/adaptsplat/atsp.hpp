#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "adaptsplat/tensor.hpp"

namespace adaptsplat::atsp {

// Tensor dump: "ATSP", u32 version = 1, u8 dtype (0 = f32, 1 = f64),
// u8 ndim, ndim × u64 extents, row-major payload. Little-endian throughout.
inline constexpr std::uint32_t kVersion = 1;

void write(std::ostream& os, const Tensor& t);
Tensor read(std::istream& is);

void save(const std::filesystem::path& path, const Tensor& t);
Tensor load(const std::filesystem::path& path);

// Named-tensor container: "ATSC", u32 version = 1, u32 record count, then per
// record u32 name length, name bytes, one ATSP dump.
using NamedTensors = std::map<std::string, Tensor>;

void save_container(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_container(const std::filesystem::path& path);

}  // namespace adaptsplat::atsp
