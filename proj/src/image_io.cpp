#include "adaptsplat/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "adaptsplat/errors.hpp"

namespace adaptsplat {

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw ShapeError("write_ppm: expected [3×H×W], got " + shape_str(image.shape()));
  }
  const std::size_t H = image.dim(1), W = image.dim(2), n = H * W;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "P6\n" << W << " " << H << "\n255\n";
  std::vector<unsigned char> bytes(3 * n);
  const auto v = image.data();
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      const double x = std::clamp(v[c * n + p], 0.0, 1.0);
      bytes[3 * p + c] = static_cast<unsigned char>(std::lround(x * 255.0));
    }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string token(std::istream& is, const std::filesystem::path& path) {
  std::string t;
  char ch;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(is, rest);
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!t.empty()) return t;
    } else {
      t += ch;
    }
  }
  if (t.empty()) throw IoError(path.string() + ": truncated PPM header");
  return t;
}

}  // namespace

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  if (token(is, path) != "P6") throw IoError(path.string() + ": not a binary PPM (P6)");
  std::size_t W = 0, H = 0, maxval = 0;
  try {
    W = std::stoul(token(is, path));
    H = std::stoul(token(is, path));
    maxval = std::stoul(token(is, path));
  } catch (const std::logic_error&) {
    throw IoError(path.string() + ": malformed PPM header");
  }
  if (W == 0 || H == 0 || maxval == 0 || maxval > 255) {
    throw IoError(path.string() + ": unsupported PPM extent or maxval");
  }
  const std::size_t n = H * W;
  std::vector<unsigned char> bytes(3 * n);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw IoError(path.string() + ": truncated PPM payload");
  }
  std::vector<double> v(3 * n);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      v[c * n + p] = static_cast<double>(bytes[3 * p + c]) / static_cast<double>(maxval);
  return Tensor::from({3, H, W}, std::move(v));
}

}  // namespace adaptsplat
