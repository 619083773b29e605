#include "adaptsplat/atsp.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "adaptsplat/errors.hpp"

namespace adaptsplat::atsp {

namespace {

template <typename U>
void put(std::ostream& os, U v) {
  std::array<char, sizeof(U)> b{};
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), b.size());
}

template <typename U>
U get(std::istream& is) {
  std::array<unsigned char, sizeof(U)> b{};
  is.read(reinterpret_cast<char*>(b.data()), b.size());
  if (!is) throw IoError("atsp: truncated stream");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

void expect_magic(std::istream& is, const char* magic) {
  char m[4];
  is.read(m, 4);
  if (!is || std::memcmp(m, magic, 4) != 0) {
    throw IoError(std::string("atsp: bad magic, expected ") + magic);
  }
}

}  // namespace

void write(std::ostream& os, const Tensor& t) {
  os.write("ATSP", 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(t.dtype()));
  if (t.ndim() > 255) throw ArgumentError("atsp: rank above 255");
  put<std::uint8_t>(os, static_cast<std::uint8_t>(t.ndim()));
  for (auto e : t.shape()) put<std::uint64_t>(os, e);
  for (double v : t.data()) {
    if (t.dtype() == DType::f32) {
      put<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      put<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
    }
  }
}

Tensor read(std::istream& is) {
  expect_magic(is, "ATSP");
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) throw IoError("atsp: unsupported version " + std::to_string(version));
  const auto dt = get<std::uint8_t>(is);
  if (dt > 1) throw IoError("atsp: unknown dtype code " + std::to_string(dt));
  const auto ndim = get<std::uint8_t>(is);
  Shape shape(ndim);
  for (auto& e : shape) e = get<std::uint64_t>(is);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) {
    if (dt == 0) {
      v = std::bit_cast<float>(get<std::uint32_t>(is));
    } else {
      v = std::bit_cast<double>(get<std::uint64_t>(is));
    }
  }
  return Tensor::from(std::move(shape), std::move(values), dt == 0 ? DType::f32 : DType::f64);
}

void save(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("atsp: cannot open " + path.string() + " for writing");
  write(os, t);
  if (!os) throw IoError("atsp: write failed for " + path.string());
}

Tensor load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("atsp: cannot open " + path.string());
  try {
    return read(is);
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

void save_container(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("atsp: cannot open " + path.string() + " for writing");
  os.write("ATSC", 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write(os, t);
  }
  if (!os) throw IoError("atsp: write failed for " + path.string());
}

NamedTensors load_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("atsp: cannot open " + path.string());
  try {
    expect_magic(is, "ATSC");
    const auto version = get<std::uint32_t>(is);
    if (version != kVersion) throw IoError("atsp: unsupported container version");
    const auto count = get<std::uint32_t>(is);
    NamedTensors out;
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto len = get<std::uint32_t>(is);
      std::string name(len, '\0');
      is.read(name.data(), len);
      if (!is) throw IoError("atsp: truncated record name");
      out.emplace(std::move(name), read(is));
    }
    return out;
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

}  // namespace adaptsplat::atsp
