#pragma once

// Forward-mode dual numbers over kMaxChartDim directions. Nesting
// Dual<Dual<double>> yields exact first and second partial derivatives,
// which is what metric curvature needs.

#include <array>
#include <cmath>

#include "stableflow/core.hpp"

namespace stableflow {

template <class T>
struct Dual {
  T v{};
  std::array<T, kMaxChartDim> d{};

  Dual() = default;
  Dual(double c) : v(c) {}  // NOLINT(google-explicit-constructor)
  Dual(const T& val, const std::array<T, kMaxChartDim>& der) : v(val), d(der) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < kMaxChartDim; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < kMaxChartDim; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < kMaxChartDim; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    T inv = T(1.0) / o.v;
    v *= inv;
    for (int i = 0; i < kMaxChartDim; ++i) d[i] = (d[i] - v * o.d[i]) * inv;
    return *this;
  }
};

using Jet1 = Dual<double>;
using Jet2 = Dual<Dual<double>>;

inline double value_of(double x) { return x; }
template <class T>
double value_of(const Dual<T>& x) {
  return value_of(x.v);
}

template <class T>
Dual<T> operator-(const Dual<T>& a) {
  Dual<T> r;
  r.v = -a.v;
  for (int i = 0; i < kMaxChartDim; ++i) r.d[i] = -a.d[i];
  return r;
}
template <class T>
Dual<T> operator+(Dual<T> a, const Dual<T>& b) { return a += b; }
template <class T>
Dual<T> operator-(Dual<T> a, const Dual<T>& b) { return a -= b; }
template <class T>
Dual<T> operator*(Dual<T> a, const Dual<T>& b) { return a *= b; }
template <class T>
Dual<T> operator/(Dual<T> a, const Dual<T>& b) { return a /= b; }

template <class T>
Dual<T> operator+(Dual<T> a, double b) { a.v += b; return a; }
template <class T>
Dual<T> operator+(double b, Dual<T> a) { a.v += b; return a; }
template <class T>
Dual<T> operator-(Dual<T> a, double b) { a.v -= b; return a; }
template <class T>
Dual<T> operator-(double b, const Dual<T>& a) { return Dual<T>(b) - a; }
template <class T>
Dual<T> operator*(Dual<T> a, double b) {
  a.v *= b;
  for (auto& x : a.d) x *= b;
  return a;
}
template <class T>
Dual<T> operator*(double b, Dual<T> a) { return a * b; }
template <class T>
Dual<T> operator/(Dual<T> a, double b) { return a * (1.0 / b); }
template <class T>
Dual<T> operator/(double b, const Dual<T>& a) { return Dual<T>(b) / a; }

namespace detail {
// Chain rule: f(a) with f(a.v) = fv and f'(a.v) = fp.
template <class T>
Dual<T> chain(const Dual<T>& a, const T& fv, const T& fp) {
  Dual<T> r;
  r.v = fv;
  for (int i = 0; i < kMaxChartDim; ++i) r.d[i] = fp * a.d[i];
  return r;
}
}  // namespace detail

template <class T>
Dual<T> sin(const Dual<T>& a) {
  using std::cos, std::sin;
  return detail::chain(a, T(sin(a.v)), T(cos(a.v)));
}
template <class T>
Dual<T> cos(const Dual<T>& a) {
  using std::cos, std::sin;
  return detail::chain(a, T(cos(a.v)), T(-sin(a.v)));
}
template <class T>
Dual<T> sinh(const Dual<T>& a) {
  using std::cosh, std::sinh;
  return detail::chain(a, T(sinh(a.v)), T(cosh(a.v)));
}
template <class T>
Dual<T> cosh(const Dual<T>& a) {
  using std::cosh, std::sinh;
  return detail::chain(a, T(cosh(a.v)), T(sinh(a.v)));
}
template <class T>
Dual<T> tanh(const Dual<T>& a) {
  using std::tanh;
  T t = tanh(a.v);
  return detail::chain(a, t, T(1.0 - t * t));
}
template <class T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  T e = exp(a.v);
  return detail::chain(a, e, e);
}
template <class T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return detail::chain(a, T(log(a.v)), T(1.0 / a.v));
}
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  T s = sqrt(a.v);
  return detail::chain(a, s, T(0.5 / s));
}
template <class T>
Dual<T> pow(const Dual<T>& a, double p) {
  using std::pow;
  return detail::chain(a, T(pow(a.v, p)), T(p * pow(a.v, p - 1.0)));
}
template <class T>
Dual<T> pow(const Dual<T>& a, const Dual<T>& b) {
  return exp(b * log(a));
}

// Seed helpers: x_i = value + unit derivative in direction i.
inline Jet1 seed1(double x, int i) {
  Jet1 r(x);
  r.d[i] = 1.0;
  return r;
}
inline Jet2 seed2(double x, int i) {
  Jet2 r(x);
  r.v.d[i] = 1.0;
  r.d[i].v = 1.0;
  return r;
}

}  // namespace stableflow
