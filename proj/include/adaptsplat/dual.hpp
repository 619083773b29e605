#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace adaptsplat {

/// Forward-mode dual number carrying N partial derivatives.
template <std::size_t N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // implicit, so constants mix with duals

  static Dual variable(double value, std::size_t i) {
    Dual x(value);
    x.d[i] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
    v *= inv;
    return *this;
  }
};

template <std::size_t N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <std::size_t N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <std::size_t N>
Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <std::size_t N>
Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }
template <std::size_t N>
Dual<N> operator-(Dual<N> a) {
  a.v = -a.v;
  for (auto& x : a.d) x = -x;
  return a;
}
template <std::size_t N>
Dual<N> operator*(double c, Dual<N> a) {
  a.v *= c;
  for (auto& x : a.d) x *= c;
  return a;
}
template <std::size_t N>
Dual<N> operator*(Dual<N> a, double c) { return c * a; }
template <std::size_t N>
Dual<N> operator+(Dual<N> a, double c) {
  a.v += c;
  return a;
}
template <std::size_t N>
Dual<N> operator+(double c, Dual<N> a) { return a + c; }
template <std::size_t N>
Dual<N> operator-(Dual<N> a, double c) {
  a.v -= c;
  return a;
}
template <std::size_t N>
Dual<N> operator-(double c, const Dual<N>& a) { return -a + c; }
template <std::size_t N>
Dual<N> operator/(Dual<N> a, double c) { return a * (1.0 / c); }
template <std::size_t N>
Dual<N> operator/(double c, const Dual<N>& a) { return Dual<N>(c) / a; }

template <std::size_t N>
Dual<N> sqrt(const Dual<N>& a) {
  Dual<N> r(std::sqrt(a.v));
  const double k = 0.5 / r.v;
  for (std::size_t i = 0; i < N; ++i) r.d[i] = k * a.d[i];
  return r;
}

inline double value_of(double x) { return x; }
template <std::size_t N>
double value_of(const Dual<N>& x) { return x.v; }

}  // namespace adaptsplat
