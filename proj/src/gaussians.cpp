#include "adaptsplat/gaussians.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "adaptsplat/errors.hpp"
#include "adaptsplat/ops.hpp"

namespace adaptsplat {

namespace {

constexpr double kShC0 = 0.28209479177387814;

constexpr const char* kPlyProps[] = {"x",       "y",       "z",     "opacity", "scale_0",
                                     "scale_1", "scale_2", "rot_0", "rot_1",   "rot_2",
                                     "rot_3",   "f_dc_0",  "f_dc_1", "f_dc_2"};
constexpr std::size_t kPlyFloats = 14;

// [C×H×W] channels [c0, c0+n) as [HW×n].
Tensor pixel_rows(const Tensor& decoded, std::size_t c0, std::size_t n) {
  return channels_to_rows(slice(decoded, c0, c0 + n));
}

void put_f32(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

double get_f32(const unsigned char* b) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace

void GaussianSet::validate() const {
  const std::size_t n = size();
  auto check = [&](const Tensor& t, Shape want, const char* name) {
    if (n == 0 && (!t.defined() || t.numel() == 0)) return;
    if (!t.defined() || t.shape() != want) {
      throw ShapeError(std::string("gaussians: ") + name + " is " +
                       (t.defined() ? shape_str(t.shape()) : "[]") + ", expected " +
                       shape_str(want));
    }
  };
  check(alpha, {n}, "alpha");
  check(mu, {n, 3}, "mu");
  check(color, {n, 3}, "color");
  check(scale, {n, 3}, "scale");
  check(quat, {n, 4}, "quat");
}

GaussianSet GaussianSet::detach() const {
  return {mu.detach(), alpha.detach(), color.detach(), scale.detach(), quat.detach()};
}

GaussianSet GaussianSet::empty() {
  return {Tensor::zeros({0, 3}), Tensor::zeros({0}), Tensor::zeros({0, 3}), Tensor::zeros({0, 3}),
          Tensor::zeros({0, 4})};
}

GaussianSet GaussianSet::from_values(const std::vector<Vec3>& mu, const std::vector<double>& alpha,
                                     const std::vector<Vec3>& color, const std::vector<Vec3>& scale,
                                     const std::vector<Quat>& quat) {
  const std::size_t n = alpha.size();
  if (mu.size() != n || color.size() != n || scale.size() != n || quat.size() != n) {
    throw ShapeError("gaussians: per-Gaussian value lists differ in length");
  }
  auto flat = [](const auto& rows) {
    std::vector<double> v;
    for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
    return v;
  };
  return {Tensor::from({n, 3}, flat(mu)), Tensor::from({n}, alpha), Tensor::from({n, 3}, flat(color)),
          Tensor::from({n, 3}, flat(scale)), Tensor::from({n, 4}, flat(quat))};
}

GaussianSet concat_sets(const std::vector<GaussianSet>& sets) {
  if (sets.empty()) return GaussianSet::empty();
  if (sets.size() == 1) return sets[0];
  GaussianSet out;
  std::vector<Tensor> mu, alpha, color, scale, quat;
  for (const auto& s : sets) {
    s.validate();
    mu.push_back(s.mu);
    alpha.push_back(s.alpha);
    color.push_back(s.color);
    scale.push_back(s.scale);
    quat.push_back(s.quat);
  }
  return {concat(mu), concat(alpha), concat(color), concat(scale), concat(quat)};
}

Tensor backproject(const Tensor& depth, const CameraView& cam) {
  if (depth.ndim() != 3 || depth.dim(0) != 1 || depth.dim(1) != cam.height ||
      depth.dim(2) != cam.width) {
    throw ShapeError("backproject: depth " + shape_str(depth.shape()) + " for a " +
                     std::to_string(cam.height) + "x" + std::to_string(cam.width) + " camera");
  }
  const auto rays = camera_rays(cam);
  const Tensor offset = mul(repeat(depth, 3), rays.directions);
  return channels_to_rows(add(rays.origins, offset));
}

GaussianSet heads(const Tensor& decoded, const CameraView& cam, double base_scale, double near) {
  if (decoded.ndim() != 3 || decoded.dim(0) != kHeadChannels || decoded.dim(1) != cam.height ||
      decoded.dim(2) != cam.width) {
    throw ShapeError("heads: decoded " + shape_str(decoded.shape()) + " for a " +
                     std::to_string(cam.height) + "x" + std::to_string(cam.width) + " camera");
  }
  const std::size_t n = cam.height * cam.width;
  GaussianSet g;
  g.alpha = reshape(sigmoid(slice(decoded, kAlphaChannel, kAlphaChannel + 1)), {n});
  g.scale = scale(softplus(pixel_rows(decoded, kScaleChannel, 3)), base_scale);
  // Zero raw output is the identity rotation.
  std::vector<double> unit(4 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) unit[4 * i] = 1.0;
  const Tensor q = add(pixel_rows(decoded, kQuatChannel, 4), Tensor::from({n, 4}, std::move(unit)));
  const Tensor inv_norm = div(Tensor::full({n, 1}, 1.0), sqrt(matmul(square(q), Tensor::full({4, 1}, 1.0))));
  g.quat = mul(q, matmul(inv_norm, Tensor::full({1, 4}, 1.0)));
  g.color = sigmoid(pixel_rows(decoded, kColorChannel, 3));
  const Tensor depth = add_scalar(softplus(slice(decoded, kDepthChannel, kDepthChannel + 1)), near);
  g.mu = backproject(depth, cam);
  return g;
}

Mat3 quat_to_rotation(const Quat& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

Mat3 covariance(const Vec3& s, const Quat& quat, std::size_t* renormalized) {
  Quat q = quat;
  const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (n == 0.0) throw ArgumentError("covariance: zero quaternion");
  if (std::abs(n - 1.0) > 1e-10) {
    for (auto& c : q) c /= n;
    if (renormalized) ++*renormalized;
  }
  const Mat3 R = quat_to_rotation(q);
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += R[i * 3 + k] * s[k] * s[k] * R[j * 3 + k];
      out[i * 3 + j] = acc;
    }
  return out;
}

double fractional_anisotropy(const Vec3& s) {
  if (!(s[0] > 0) || !(s[1] > 0) || !(s[2] > 0)) {
    throw ArgumentError("fractional anisotropy: scales must be positive");
  }
  const double m = (s[0] + s[1] + s[2]) / 3.0;
  const double dev = (s[0] - m) * (s[0] - m) + (s[1] - m) * (s[1] - m) + (s[2] - m) * (s[2] - m);
  const double mag = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
  return std::sqrt(1.5 * dev / mag);
}

Tensor fractional_anisotropy(const Tensor& scale) {
  if (scale.ndim() != 2 || scale.dim(1) != 3) {
    throw ShapeError("fractional anisotropy: expected [N×3], got " + shape_str(scale.shape()));
  }
  const std::size_t n = scale.dim(0);
  const auto S = scale.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fractional_anisotropy({S[3 * i], S[3 * i + 1], S[3 * i + 2]});
  return Tensor::from({n}, std::move(out));
}

std::string ply_header(std::size_t count) {
  std::string h = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(count) + "\n";
  for (const char* p : kPlyProps) h += std::string("property float ") + p + "\n";
  return h + "end_header\n";
}

void export_ply(const GaussianSet& g, const std::filesystem::path& path) {
  g.validate();
  const std::size_t n = g.size();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << ply_header(n);
  const auto mu = g.mu.data(), a = g.alpha.data(), c = g.color.data(), s = g.scale.data(),
             q = g.quat.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) put_f32(os, mu[3 * i + k]);
    put_f32(os, std::log(a[i] / (1.0 - a[i])));
    for (int k = 0; k < 3; ++k) put_f32(os, std::log(s[3 * i + k]));
    for (int k = 0; k < 4; ++k) put_f32(os, q[4 * i + k]);
    for (int k = 0; k < 3; ++k) put_f32(os, (c[3 * i + k] - 0.5) / kShC0);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

GaussianSet import_ply(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t count = 0;
  bool has_count = false;
  std::vector<std::string> props;
  if (!std::getline(is, line) || line != "ply") throw IoError(path.string() + ": not a PLY file");
  while (std::getline(is, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") {
        throw IoError(path.string() + ": unsupported PLY format '" + fmt + "'");
      }
    } else if (word == "element") {
      std::string name;
      ls >> name;
      if (name != "vertex" || has_count) {
        throw IoError(path.string() + ": unexpected element '" + name + "'");
      }
      ls >> count;
      has_count = true;
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      if (type != "float") throw IoError(path.string() + ": property " + name + " is not float");
      props.push_back(name);
    } else if (word != "comment" && word != "obj_info") {
      throw IoError(path.string() + ": unexpected header line '" + line + "'");
    }
  }
  if (line != "end_header" || !has_count) throw IoError(path.string() + ": truncated PLY header");
  std::size_t index[kPlyFloats];
  for (std::size_t k = 0; k < kPlyFloats; ++k) {
    auto it = std::find(props.begin(), props.end(), kPlyProps[k]);
    if (it == props.end()) throw IoError(path.string() + ": missing property " + kPlyProps[k]);
    index[k] = static_cast<std::size_t>(it - props.begin());
  }
  const std::size_t stride = 4 * props.size();
  std::vector<unsigned char> row(stride);
  std::vector<double> mu(3 * count), alpha(count), color(3 * count), scale(3 * count), quat(4 * count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(stride))) {
      throw IoError(path.string() + ": truncated vertex data at vertex " + std::to_string(i));
    }
    auto f = [&](std::size_t k) { return get_f32(row.data() + 4 * index[k]); };
    for (std::size_t k = 0; k < 3; ++k) mu[3 * i + k] = f(k);
    alpha[i] = 1.0 / (1.0 + std::exp(-f(3)));
    for (std::size_t k = 0; k < 3; ++k) scale[3 * i + k] = std::exp(f(4 + k));
    for (std::size_t k = 0; k < 4; ++k) quat[4 * i + k] = f(7 + k);
    for (std::size_t k = 0; k < 3; ++k) color[3 * i + k] = f(11 + k) * kShC0 + 0.5;
  }
  return {Tensor::from({count, 3}, std::move(mu)), Tensor::from({count}, std::move(alpha)),
          Tensor::from({count, 3}, std::move(color)), Tensor::from({count, 3}, std::move(scale)),
          Tensor::from({count, 4}, std::move(quat))};
}

}  // namespace adaptsplat
