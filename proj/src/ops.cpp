#include "adaptsplat/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "adaptsplat/errors.hpp"

namespace adaptsplat {

namespace {

using Impl = std::shared_ptr<detail::TensorImpl>;

void require_finite(std::span<const double> v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  const bool rec = detail::should_record({&x});
  Impl xi = x.impl();
  Tape::BackwardFn fn;
  if (rec) {
    fn = [xi, df](std::span<const double> g) {
      if (!xi->requires_grad) return;
      auto gx = xi->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xi->data[i]);
    };
  }
  return detail::finish(x.shape(), std::move(out), x.dtype(), rec, std::move(fn));
}

enum class BinOp { add, sub, mul, div };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  Shape shape;
  if (a.shape() == b.shape() || nb == 1) {
    shape = a.shape();
  } else if (na == 1) {
    shape = b.shape();
  } else {
    throw ShapeError("elementwise: cannot broadcast " + shape_str(a.shape()) + " with " +
                     shape_str(b.shape()) + " (scalar broadcast only)");
  }
  const std::size_t n = shape_numel(shape);
  const std::size_t sa = na == 1 ? 0 : 1;
  const std::size_t sb = nb == 1 ? 0 : 1;
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = da[i * sa];
    const double y = db[i * sb];
    switch (op) {
      case BinOp::add: out[i] = x + y; break;
      case BinOp::sub: out[i] = x - y; break;
      case BinOp::mul: out[i] = x * y; break;
      case BinOp::div: out[i] = x / y; break;
    }
  }
  const bool rec = detail::should_record({&a, &b});
  Tape::BackwardFn fn;
  if (rec) {
    Impl ai = a.impl();
    Impl bi = b.impl();
    fn = [ai, bi, sa, sb, op](std::span<const double> g) {
      const std::size_t m = g.size();
      if (ai->requires_grad) {
        auto ga = ai->grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
          double d = 1.0;
          if (op == BinOp::mul) d = bi->data[i * sb];
          if (op == BinOp::div) d = 1.0 / bi->data[i * sb];
          ga[i * sa] += g[i] * d;
        }
      }
      if (bi->requires_grad) {
        auto gb = bi->grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
          double d = 1.0;
          if (op == BinOp::sub) d = -1.0;
          if (op == BinOp::mul) d = ai->data[i * sa];
          if (op == BinOp::div) {
            const double y = bi->data[i * sb];
            d = -ai->data[i * sa] / (y * y);
          }
          gb[i * sb] += g[i] * d;
        }
      }
    };
  }
  return detail::finish(std::move(shape), std::move(out), detail::result_dtype({&a, &b}),
                        rec, std::move(fn));
}

// Pass-through gradient for pure data movement; `index[i]` is the source
// element of output i.
Tensor gather(const Tensor& x, Shape shape, std::vector<std::size_t> index) {
  const auto in = x.data();
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = in[index[i]];
  const bool rec = detail::should_record({&x});
  Tape::BackwardFn fn;
  if (rec) {
    Impl xi = x.impl();
    fn = [xi, index = std::move(index)](std::span<const double> g) {
      if (!xi->requires_grad) return;
      auto gx = xi->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[index[i]] += g[i];
    };
  }
  return detail::finish(std::move(shape), std::move(out), x.dtype(), rec, std::move(fn));
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.ndim() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_str(x.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::mul); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::div); }

Tensor neg(const Tensor& x) {
  return unary(x, [](double v) { return -v; }, [](double) { return -1.0; });
}

Tensor scale(const Tensor& x, double c) {
  return unary(x, [c](double v) { return c * v; }, [c](double) { return c; });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary(x, [c](double v) { return v + c; }, [](double) { return 1.0; });
}

namespace {
double sigmoid_value(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}
double softplus_value(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }
}  // namespace

Tensor sigmoid(const Tensor& x) {
  return unary(x, sigmoid_value, [](double v) {
    const double s = sigmoid_value(v);
    return s * (1.0 - s);
  });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Tensor softplus(const Tensor& x) { return unary(x, softplus_value, sigmoid_value); }

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0 ? v : 0.0; },
               [](double v) { return v > 0 ? 1.0 : 0.0; });
}

Tensor sqrt(const Tensor& x) {
  return unary(x, [](double v) { return std::sqrt(v); },
               [](double v) { return 0.5 / std::sqrt(v); });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  const bool rec = detail::should_record({&x});
  Tape::BackwardFn fn;
  if (rec) {
    Impl xi = x.impl();
    fn = [xi](std::span<const double> g) {
      if (!xi->requires_grad) return;
      auto gx = xi->grad_buffer();
      for (auto& v : gx) v += g[0];
    };
  }
  return detail::finish({}, {s}, x.dtype(), rec, std::move(fn));
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const bool rec = detail::should_record({&x});
  Tape::BackwardFn fn;
  if (rec) {
    Impl xi = x.impl();
    fn = [xi](std::span<const double> g) {
      if (!xi->requires_grad) return;
      auto gx = xi->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    };
  }
  return detail::finish(std::move(shape), std::move(out), x.dtype(), rec, std::move(fn));
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<std::size_t> index(r * c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < r; ++j) index[i * r + j] = j * c + i;
  return gather(x, {c, r}, std::move(index));
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ArgumentError("concat: no inputs");
  for (const auto& p : parts)
    if (p.ndim() == 0) throw ShapeError("concat: rank-0 input");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (Shape(p.shape().begin() + 1, p.shape().end()) != tail) {
      throw ShapeError("concat: " + shape_str(p.shape()) + " incompatible with " +
                       shape_str(parts[0].shape()));
    }
    rows += p.dim(0);
  }
  Shape shape = parts[0].shape();
  shape[0] = rows;
  std::vector<double> out;
  out.reserve(shape_numel(shape));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  const bool rec = detail::should_record(parts);
  Tape::BackwardFn fn;
  if (rec) {
    std::vector<Impl> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    fn = [impls](std::span<const double> g) {
      std::size_t off = 0;
      for (const auto& pi : impls) {
        const std::size_t n = pi->data.size();
        if (pi->requires_grad) {
          auto gp = pi->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
        }
        off += n;
      }
    };
  }
  DType dt = DType::f64;
  for (const auto& p : parts)
    if (p.dtype() == DType::f32) dt = DType::f32;
  return detail::finish(std::move(shape), std::move(out), dt, rec, std::move(fn));
}

Tensor slice(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.ndim() == 0 || begin > end || end > x.dim(0)) {
    throw ShapeError("slice: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_str(x.shape()));
  }
  const std::size_t inner = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  std::vector<std::size_t> index(shape_numel(shape));
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = begin * inner + i;
  return gather(x, std::move(shape), std::move(index));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ArgumentError("concat: no inputs");
  if (axis == 0) return concat(parts);
  const Shape& ref = parts[0].shape();
  if (axis >= ref.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(ref));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape a = p.shape(), b = ref;
    if (a.size() != b.size()) throw ShapeError("concat: rank mismatch");
    a[axis] = b[axis] = 0;
    if (a != b) {
      throw ShapeError("concat: " + shape_str(p.shape()) + " incompatible with " +
                       shape_str(ref) + " along axis " + std::to_string(axis));
    }
    total += p.dim(axis);
  }
  // Gather from a flat concatenation of the parts.
  std::vector<Tensor> flat;
  for (const auto& p : parts) flat.push_back(reshape(p, {p.numel()}));
  Tensor joined = concat(flat);
  Shape shape = ref;
  shape[axis] = total;
  std::vector<std::size_t> index;
  index.reserve(shape_numel(shape));
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t base = 0;
    for (const auto& p : parts) {
      const std::size_t n = p.dim(axis);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < inner; ++i) index.push_back(base + (o * n + j) * inner + i);
      base += p.numel();
    }
  }
  return gather(joined, std::move(shape), std::move(index));
}

Tensor crop(const Tensor& x, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  require_rank(x, 3, "crop");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (y0 + h > H || x0 + w > W) {
    throw ShapeError("crop: window exceeds " + shape_str(x.shape()));
  }
  std::vector<std::size_t> index;
  index.reserve(C * h * w);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) index.push_back((c * H + y0 + y) * W + x0 + xx);
  return gather(x, {C, h, w}, std::move(index));
}

Tensor separable_transform(const Tensor& x, const Tensor& left, const Tensor& right) {
  require_rank(x, 3, "separable_transform");
  require_rank(left, 2, "separable_transform left");
  require_rank(right, 2, "separable_transform right");
  const std::size_t C = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t m = left.dim(0), n = right.dim(0);
  if (left.dim(1) != h || right.dim(1) != w) {
    throw ShapeError("separable_transform: " + shape_str(left.shape()) + " · " +
                     shape_str(x.shape()) + " · " + shape_str(right.shape()) + "ᵀ");
  }
  const auto X = x.data();
  const auto L = left.data();
  const auto R = right.data();
  std::vector<double> out(C * m * n, 0.0);
  std::vector<double> t(h * n);
  for (std::size_t c = 0; c < C; ++c) {
    // t = x[c] · Rᵀ  (h×n)
    std::fill(t.begin(), t.end(), 0.0);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t q = 0; q < w; ++q) s += X[(c * h + i) * w + q] * R[j * w + q];
        t[i * n + j] = s;
      }
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t i = 0; i < h; ++i) {
        const double l = L[r * h + i];
        if (l == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out[(c * m + r) * n + j] += l * t[i * n + j];
      }
  }
  const bool rec = detail::should_record({&x});
  Tape::BackwardFn fn;
  if (rec) {
    Impl xi = x.impl(), li = left.impl(), ri = right.impl();
    fn = [xi, li, ri, C, h, w, m, n](std::span<const double> g) {
      if (!xi->requires_grad) return;
      auto gx = xi->grad_buffer();
      std::vector<double> t(h * n);
      for (std::size_t c = 0; c < C; ++c) {
        // gx[c] += Lᵀ · g[c] · R
        std::fill(t.begin(), t.end(), 0.0);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t i = 0; i < h; ++i) {
            const double l = li->data[r * h + i];
            if (l == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) t[i * n + j] += l * g[(c * m + r) * n + j];
          }
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t q = 0; q < w; ++q) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += t[i * n + j] * ri->data[j * w + q];
            gx[(c * h + i) * w + q] += s;
          }
      }
    };
  }
  return detail::finish({C, m, n}, std::move(out), x.dtype(), rec, std::move(fn));
}

Tensor channels_to_rows(const Tensor& x) {
  require_rank(x, 3, "channels_to_rows");
  return transpose(reshape(x, {x.dim(0), x.dim(1) * x.dim(2)}));
}

Tensor rows_to_channels(const Tensor& x, std::size_t height, std::size_t width) {
  require_rank(x, 2, "rows_to_channels");
  if (x.dim(0) != height * width) {
    throw ShapeError("rows_to_channels: " + shape_str(x.shape()) + " is not a " +
                     std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  return reshape(transpose(x), {x.dim(1), height, width});
}

Tensor repeat(const Tensor& x, std::size_t copies) {
  return concat(std::vector<Tensor>(copies, x));
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> C(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = &B[p * n];
      double* crow = &C[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  const bool rec = detail::should_record({&a, &b});
  Tape::BackwardFn fn;
  if (rec) {
    Impl ai = a.impl(), bi = b.impl();
    fn = [ai, bi, m, k, n](std::span<const double> g) {
      if (ai->requires_grad) {  // dA = dC · Bᵀ
        auto ga = ai->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bi->data[p * n + j];
            ga[i * k + p] += s;
          }
      }
      if (bi->requires_grad) {  // dB = Aᵀ · dC
        auto gb = bi->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = ai->data[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
          }
      }
    };
  }
  return detail::finish({m, n}, std::move(C), detail::result_dtype({&a, &b}), rec,
                        std::move(fn));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(1)) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " +
                     shape_str(w.shape()));
  }
  const std::size_t rows = x.dim(0), in = x.dim(1), outc = w.dim(0);
  if (b.defined() && (b.numel() != outc)) {
    throw ShapeError("linear: bias " + shape_str(b.shape()) + " for " +
                     std::to_string(outc) + " outputs");
  }
  const auto X = x.data();
  const auto Wd = w.data();
  std::vector<double> Y(rows * outc);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < outc; ++o) {
      double s = b.defined() ? b.data()[o] : 0.0;
      const double* xr = &X[r * in];
      const double* wr = &Wd[o * in];
      for (std::size_t i = 0; i < in; ++i) s += xr[i] * wr[i];
      Y[r * outc + o] = s;
    }
  const bool rec = detail::should_record({&x, &w, &b});
  Tape::BackwardFn fn;
  if (rec) {
    Impl xi = x.impl(), wi = w.impl();
    Impl bi = b.defined() ? b.impl() : nullptr;
    fn = [xi, wi, bi, rows, in, outc](std::span<const double> g) {
      if (xi->requires_grad) {
        auto gx = xi->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < outc; ++o) {
            const double go = g[r * outc + o];
            const double* wr = &wi->data[o * in];
            for (std::size_t i = 0; i < in; ++i) gx[r * in + i] += go * wr[i];
          }
      }
      if (wi->requires_grad) {
        auto gw = wi->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < outc; ++o) {
            const double go = g[r * outc + o];
            const double* xr = &xi->data[r * in];
            for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += go * xr[i];
          }
      }
      if (bi && bi->requires_grad) {
        auto gb = bi->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < outc; ++o) gb[o] += g[r * outc + o];
      }
    };
  }
  return detail::finish({rows, outc}, std::move(Y), detail::result_dtype({&x, &w, &b}), rec,
                        std::move(fn));
}

// ---------------------------------------------------------------------------

namespace {

// Source index along one axis for each padded coordinate; -1 is a zero pad.
std::vector<long> pad_map(std::size_t n, std::size_t pad, Padding mode) {
  std::vector<long> m(n + 2 * pad);
  const long ln = static_cast<long>(n);
  for (std::size_t i = 0; i < m.size(); ++i) {
    long s = static_cast<long>(i) - static_cast<long>(pad);
    if (s < 0 || s >= ln) {
      if (mode == Padding::zero) {
        s = -1;
      } else {
        if (s < 0) s = -s;
        if (s >= ln) s = 2 * (ln - 1) - s;
      }
    }
    m[i] = s;
  }
  return m;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding, Padding mode) {
  require_rank(x, 3, "conv2d");
  require_rank(kernel, 4, "conv2d kernel");
  const std::size_t cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t cout = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != cin || kernel.dim(3) != k || k % 2 == 0) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) + " for input " +
                     shape_str(x.shape()) + " (square odd kernel over all input channels)");
  }
  if (stride == 0) throw ArgumentError("conv2d: stride must be positive");
  if (bias.defined() && bias.numel() != cout) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " for " +
                     std::to_string(cout) + " output channels");
  }
  const std::size_t Hp = H + 2 * padding, Wp = W + 2 * padding;
  if (Hp < k || Wp < k || (Hp - k) % stride != 0 || (Wp - k) % stride != 0) {
    throw ShapeError("conv2d: non-integral output extent for input " + shape_str(x.shape()) +
                     ", kernel " + std::to_string(k) + ", stride " + std::to_string(stride) +
                     ", padding " + std::to_string(padding));
  }
  if (mode == Padding::reflect && (padding >= H || padding >= W)) {
    throw ShapeError("conv2d: reflect padding " + std::to_string(padding) +
                     " too large for " + shape_str(x.shape()));
  }
  const std::size_t Ho = (Hp - k) / stride + 1, Wo = (Wp - k) / stride + 1;
  const auto rows = pad_map(H, padding, mode);
  const auto cols = pad_map(W, padding, mode);

  const auto X = x.data();
  std::vector<double> P(cin * Hp * Wp, 0.0);
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t y = 0; y < Hp; ++y) {
      if (rows[y] < 0) continue;
      for (std::size_t xx = 0; xx < Wp; ++xx) {
        if (cols[xx] < 0) continue;
        P[(c * Hp + y) * Wp + xx] = X[(c * H + rows[y]) * W + cols[xx]];
      }
    }

  const auto K = kernel.data();
  std::vector<double> out(cout * Ho * Wo, 0.0);
  for (std::size_t co = 0; co < cout; ++co) {
    double* o = &out[co * Ho * Wo];
    if (bias.defined()) std::fill(o, o + Ho * Wo, bias.data()[co]);
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double w = K[((co * cin + ci) * k + ky) * k + kx];
          if (w == 0.0) continue;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const double* prow = &P[(ci * Hp + oy * stride + ky) * Wp + kx];
            double* orow = o + oy * Wo;
            if (stride == 1) {
              for (std::size_t ox = 0; ox < Wo; ++ox) orow[ox] += w * prow[ox];
            } else {
              for (std::size_t ox = 0; ox < Wo; ++ox) orow[ox] += w * prow[ox * stride];
            }
          }
        }
  }

  const bool rec = detail::should_record({&x, &kernel, &bias});
  Tape::BackwardFn fn;
  if (rec) {
    Impl xi = x.impl(), ki = kernel.impl();
    Impl bi = bias.defined() ? bias.impl() : nullptr;
    fn = [xi, ki, bi, P = std::move(P), rows, cols, cin, cout, H, W, Hp, Wp, Ho, Wo, k,
          stride](std::span<const double> g) {
      if (bi && bi->requires_grad) {
        auto gb = bi->grad_buffer();
        for (std::size_t co = 0; co < cout; ++co) {
          double s = 0.0;
          for (std::size_t i = 0; i < Ho * Wo; ++i) s += g[co * Ho * Wo + i];
          gb[co] += s;
        }
      }
      if (ki->requires_grad) {
        auto gk = ki->grad_buffer();
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                double s = 0.0;
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                  const double* prow = &P[(ci * Hp + oy * stride + ky) * Wp + kx];
                  const double* grow = &g[(co * Ho + oy) * Wo];
                  for (std::size_t ox = 0; ox < Wo; ++ox) s += grow[ox] * prow[ox * stride];
                }
                gk[((co * cin + ci) * k + ky) * k + kx] += s;
              }
      }
      if (xi->requires_grad) {
        std::vector<double> gp(cin * Hp * Wp, 0.0);
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const double w = ki->data[((co * cin + ci) * k + ky) * k + kx];
                if (w == 0.0) continue;
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                  double* prow = &gp[(ci * Hp + oy * stride + ky) * Wp + kx];
                  const double* grow = &g[(co * Ho + oy) * Wo];
                  for (std::size_t ox = 0; ox < Wo; ++ox) prow[ox * stride] += w * grow[ox];
                }
              }
        auto gx = xi->grad_buffer();
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t y = 0; y < Hp; ++y) {
            if (rows[y] < 0) continue;
            for (std::size_t xx = 0; xx < Wp; ++xx) {
              if (cols[xx] < 0) continue;
              gx[(c * H + rows[y]) * W + cols[xx]] += gp[(c * Hp + y) * Wp + xx];
            }
          }
      }
    };
  }
  return detail::finish({cout, Ho, Wo}, std::move(out),
                        detail::result_dtype({&x, &kernel, &bias}), rec, std::move(fn));
}

namespace {

struct Lerp {
  std::size_t lo, hi;
  double w_hi;
};

std::vector<Lerp> lerp_table(std::size_t n, std::size_t factor) {
  std::vector<Lerp> t(n * factor);
  for (std::size_t i = 0; i < t.size(); ++i) {
    double src = (static_cast<double>(i) + 0.5) / static_cast<double>(factor) - 0.5;
    if (src < 0) src = 0;
    auto lo = static_cast<std::size_t>(std::floor(src));
    if (lo > n - 1) lo = n - 1;
    const std::size_t hi = std::min(lo + 1, n - 1);
    t[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return t;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& x, std::size_t factor) {
  require_rank(x, 3, "bilinear_upsample");
  if (factor == 0) throw ArgumentError("bilinear_upsample: factor must be >= 1");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t Ho = H * factor, Wo = W * factor;
  const auto ty = lerp_table(H, factor);
  const auto tx = lerp_table(W, factor);
  const auto X = x.data();
  std::vector<double> out(C * Ho * Wo);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      const auto& ly = ty[oy];
      const double* r0 = &X[(c * H + ly.lo) * W];
      const double* r1 = &X[(c * H + ly.hi) * W];
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        const auto& lx = tx[ox];
        const double top = r0[lx.lo] * (1 - lx.w_hi) + r0[lx.hi] * lx.w_hi;
        const double bot = r1[lx.lo] * (1 - lx.w_hi) + r1[lx.hi] * lx.w_hi;
        out[(c * Ho + oy) * Wo + ox] = top * (1 - ly.w_hi) + bot * ly.w_hi;
      }
    }
  const bool rec = detail::should_record({&x});
  Tape::BackwardFn fn;
  if (rec) {
    Impl xi = x.impl();
    fn = [xi, ty, tx, C, H, W, Ho, Wo](std::span<const double> g) {
      if (!xi->requires_grad) return;
      auto gx = xi->grad_buffer();
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const auto& ly = ty[oy];
          double* r0 = &gx[(c * H + ly.lo) * W];
          double* r1 = &gx[(c * H + ly.hi) * W];
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const auto& lx = tx[ox];
            const double v = g[(c * Ho + oy) * Wo + ox];
            const double top = v * (1 - ly.w_hi);
            const double bot = v * ly.w_hi;
            r0[lx.lo] += top * (1 - lx.w_hi);
            r0[lx.hi] += top * lx.w_hi;
            r1[lx.lo] += bot * (1 - lx.w_hi);
            r1[lx.hi] += bot * lx.w_hi;
          }
        }
    };
  }
  return detail::finish({C, Ho, Wo}, std::move(out), x.dtype(), rec, std::move(fn));
}

Tensor avg_pool2(const Tensor& x) {
  require_rank(x, 3, "avg_pool2");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (H % 2 || W % 2) throw ShapeError("avg_pool2: odd extent " + shape_str(x.shape()));
  const std::size_t Ho = H / 2, Wo = W / 2;
  const auto X = x.data();
  std::vector<double> out(C * Ho * Wo);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < Ho; ++y)
      for (std::size_t xx = 0; xx < Wo; ++xx) {
        const double* r0 = &X[(c * H + 2 * y) * W + 2 * xx];
        const double* r1 = r0 + W;
        out[(c * Ho + y) * Wo + xx] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
  const bool rec = detail::should_record({&x});
  Tape::BackwardFn fn;
  if (rec) {
    Impl xi = x.impl();
    fn = [xi, C, H, W, Ho, Wo](std::span<const double> g) {
      if (!xi->requires_grad) return;
      auto gx = xi->grad_buffer();
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < Ho; ++y)
          for (std::size_t xx = 0; xx < Wo; ++xx) {
            const double v = 0.25 * g[(c * Ho + y) * Wo + xx];
            double* r0 = &gx[(c * H + 2 * y) * W + 2 * xx];
            r0[0] += v;
            r0[1] += v;
            r0[W] += v;
            r0[W + 1] += v;
          }
    };
  }
  return detail::finish({C, Ho, Wo}, std::move(out), x.dtype(), rec, std::move(fn));
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.ndim()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(x.shape()));
  }
  require_finite(x.data(), "softmax");
  const auto& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  const auto X = x.data();
  std::vector<double> out(X.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double m = X[base];
      for (std::size_t j = 1; j < n; ++j) m = std::max(m, X[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(X[base + j * inner] - m);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  const bool rec = detail::should_record({&x});
  Tape::BackwardFn fn;
  if (rec) {
    Impl xi = x.impl();
    fn = [xi, Y = out, outer, inner, n](std::span<const double> g) {
      if (!xi->requires_grad) return;
      auto gx = xi->grad_buffer();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * n * inner + in;
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * Y[base + j * inner];
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t idx = base + j * inner;
            gx[idx] += Y[idx] * (g[idx] - dot);
          }
        }
    };
  }
  return detail::finish(s, std::move(out), x.dtype(), rec, std::move(fn));
}

namespace {

// Normalizes `groups` contiguous runs of length `len`. Gain/bias index is
// `per_group ? group : position`.
Tensor normalize_groups(const Tensor& x, const Tensor& gain, const Tensor& bias,
                        std::size_t groups, std::size_t len, bool per_group, double eps) {
  const auto X = x.data();
  std::vector<double> out(X.size());
  std::vector<double> xhat(X.size());
  std::vector<double> inv_std(groups);
  const auto G = gain.data();
  const auto B = bias.data();
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const double* v = &X[gi * len];
    double m = 0.0;
    for (std::size_t i = 0; i < len; ++i) m += v[i];
    m /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t i = 0; i < len; ++i) var += (v[i] - m) * (v[i] - m);
    var /= static_cast<double>(len);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[gi] = is;
    for (std::size_t i = 0; i < len; ++i) {
      const double h = (v[i] - m) * is;
      const std::size_t pi = per_group ? gi : i;
      xhat[gi * len + i] = h;
      out[gi * len + i] = h * G[pi] + B[pi];
    }
  }
  const bool rec = detail::should_record({&x, &gain, &bias});
  Tape::BackwardFn fn;
  if (rec) {
    Impl xi = x.impl(), gi_ = gain.impl(), bi = bias.impl();
    fn = [xi, gi_, bi, xhat = std::move(xhat), inv_std = std::move(inv_std), groups, len,
          per_group](std::span<const double> g) {
      if (gi_->requires_grad) {
        auto gg = gi_->grad_buffer();
        for (std::size_t q = 0; q < groups; ++q)
          for (std::size_t i = 0; i < len; ++i)
            gg[per_group ? q : i] += g[q * len + i] * xhat[q * len + i];
      }
      if (bi->requires_grad) {
        auto gb = bi->grad_buffer();
        for (std::size_t q = 0; q < groups; ++q)
          for (std::size_t i = 0; i < len; ++i) gb[per_group ? q : i] += g[q * len + i];
      }
      if (xi->requires_grad) {
        auto gx = xi->grad_buffer();
        const double inv_len = 1.0 / static_cast<double>(len);
        for (std::size_t q = 0; q < groups; ++q) {
          double mean_d = 0.0, mean_dh = 0.0;
          for (std::size_t i = 0; i < len; ++i) {
            const double d = g[q * len + i] * gi_->data[per_group ? q : i];
            mean_d += d;
            mean_dh += d * xhat[q * len + i];
          }
          mean_d *= inv_len;
          mean_dh *= inv_len;
          for (std::size_t i = 0; i < len; ++i) {
            const double d = g[q * len + i] * gi_->data[per_group ? q : i];
            gx[q * len + i] += inv_std[q] * (d - mean_d - xhat[q * len + i] * mean_dh);
          }
        }
      }
    };
  }
  return detail::finish(x.shape(), std::move(out), detail::result_dtype({&x, &gain, &bias}),
                        rec, std::move(fn));
}

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank(x, 2, "layer_norm");
  const std::size_t D = x.dim(1);
  if (gain.numel() != D || bias.numel() != D) {
    throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                     shape_str(bias.shape()) + " for width " + std::to_string(D));
  }
  return normalize_groups(x, gain, bias, x.dim(0), D, false, eps);
}

Tensor channel_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank(x, 3, "channel_norm");
  const std::size_t C = x.dim(0);
  if (gain.numel() != C || bias.numel() != C) {
    throw ShapeError("channel_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                     shape_str(bias.shape()) + " for " + std::to_string(C) + " channels");
  }
  return normalize_groups(x, gain, bias, C, x.dim(1) * x.dim(2), true, eps);
}

// ---------------------------------------------------------------------------

namespace detail {

namespace {
// Twiddles e^{sign·2πi·j/n} for j in [0, n).
void twiddles(std::size_t n, int sign, std::vector<double>& c, std::vector<double>& s) {
  c.resize(n);
  s.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    c[j] = std::cos(a);
    s[j] = sign * std::sin(a);
  }
}
}  // namespace

void complex_dft2(const double* re, const double* im, std::size_t H, std::size_t W, int sign,
                  double* out_re, double* out_im) {
  std::vector<double> cw, sw, ch, sh;
  twiddles(W, sign, cw, sw);
  twiddles(H, sign, ch, sh);
  // Along rows.
  std::vector<double> tr(H * W), ti(H * W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t v = 0; v < W; ++v) {
      double ar = 0.0, ai = 0.0;
      for (std::size_t x = 0; x < W; ++x) {
        const std::size_t t = (v * x) % W;
        const double xr = re[y * W + x];
        const double xi = im ? im[y * W + x] : 0.0;
        ar += xr * cw[t] - xi * sw[t];
        ai += xr * sw[t] + xi * cw[t];
      }
      tr[y * W + v] = ar;
      ti[y * W + v] = ai;
    }
  // Along columns.
  for (std::size_t u = 0; u < H; ++u)
    for (std::size_t v = 0; v < W; ++v) {
      double ar = 0.0, ai = 0.0;
      for (std::size_t y = 0; y < H; ++y) {
        const std::size_t t = (u * y) % H;
        const double xr = tr[y * W + v];
        const double xi = ti[y * W + v];
        ar += xr * ch[t] - xi * sh[t];
        ai += xr * sh[t] + xi * ch[t];
      }
      out_re[u * W + v] = ar;
      out_im[u * W + v] = ai;
    }
}

}  // namespace detail

std::pair<Tensor, Tensor> dft2(const Tensor& x) {
  require_rank(x, 2, "dft2");
  const std::size_t H = x.dim(0), W = x.dim(1);
  std::vector<double> re(H * W), im(H * W);
  detail::complex_dft2(x.data().data(), nullptr, H, W, -1, re.data(), im.data());
  const bool rec = detail::should_record({&x});
  // Both outputs feed one shared accumulator: gx = Re(DFT(gRe - i·gIm)).
  Tape::BackwardFn fn_re, fn_im;
  if (rec) {
    Impl xi = x.impl();
    auto apply = [xi, H, W](std::span<const double> g_re, std::span<const double> g_im) {
      if (!xi->requires_grad) return;
      std::vector<double> zr(H * W, 0.0), zi(H * W, 0.0), outr(H * W), outi(H * W);
      if (!g_re.empty()) std::copy(g_re.begin(), g_re.end(), zr.begin());
      if (!g_im.empty())
        for (std::size_t i = 0; i < H * W; ++i) zi[i] = -g_im[i];
      detail::complex_dft2(zr.data(), zi.data(), H, W, -1, outr.data(), outi.data());
      auto gx = xi->grad_buffer();
      for (std::size_t i = 0; i < H * W; ++i) gx[i] += outr[i];
    };
    fn_re = [apply](std::span<const double> g) { apply(g, {}); };
    fn_im = [apply](std::span<const double> g) { apply({}, g); };
  }
  Tensor tre = detail::finish({H, W}, std::move(re), x.dtype(), rec, std::move(fn_re));
  Tensor tim = detail::finish({H, W}, std::move(im), x.dtype(), rec, std::move(fn_im));
  return {tre, tim};
}

}  // namespace adaptsplat
