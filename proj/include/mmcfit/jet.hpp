#pragma once

// Forward-mode dual number with a runtime-sized tangent vector. Used for the
// small dense Jacobians of the per-frame marker solves.

#include <Eigen/Dense>

#include <cmath>

namespace mmc {

struct Jet {
  double a = 0.0;
  Eigen::VectorXd v;

  Jet() = default;
  Jet(double value) : a(value) {}  // NOLINT: implicit constants are the point
  Jet(double value, Eigen::VectorXd tangent) : a(value), v(std::move(tangent)) {}

  static Jet variable(double value, Eigen::Index n, Eigen::Index i) {
    Jet j(value, Eigen::VectorXd::Zero(n));
    j.v[i] = 1.0;
    return j;
  }
};

namespace detail {
// Constants carry an empty tangent; combine treating empty as zero.
inline Eigen::VectorXd lin(double ca, const Eigen::VectorXd& va, double cb, const Eigen::VectorXd& vb) {
  if (va.size() == 0 && vb.size() == 0) return {};
  if (va.size() == 0) return cb * vb;
  if (vb.size() == 0) return ca * va;
  return ca * va + cb * vb;
}
inline Eigen::VectorXd scaled(double c, const Eigen::VectorXd& v) {
  if (v.size() == 0) return {};
  return c * v;
}
}  // namespace detail

inline Jet operator+(const Jet& x, const Jet& y) { return {x.a + y.a, detail::lin(1.0, x.v, 1.0, y.v)}; }
inline Jet operator-(const Jet& x, const Jet& y) { return {x.a - y.a, detail::lin(1.0, x.v, -1.0, y.v)}; }
inline Jet operator*(const Jet& x, const Jet& y) { return {x.a * y.a, detail::lin(y.a, x.v, x.a, y.v)}; }
inline Jet operator/(const Jet& x, const Jet& y) {
  const double q = x.a / y.a;
  return {q, detail::lin(1.0 / y.a, x.v, -q / y.a, y.v)};
}
inline Jet operator-(const Jet& x) { return {-x.a, detail::scaled(-1.0, x.v)}; }
inline Jet operator+(const Jet& x, double c) { return {x.a + c, x.v}; }
inline Jet operator+(double c, const Jet& x) { return {x.a + c, x.v}; }
inline Jet operator-(const Jet& x, double c) { return {x.a - c, x.v}; }
inline Jet operator-(double c, const Jet& x) { return {c - x.a, detail::scaled(-1.0, x.v)}; }
inline Jet operator*(const Jet& x, double c) { return {x.a * c, detail::scaled(c, x.v)}; }
inline Jet operator*(double c, const Jet& x) { return {x.a * c, detail::scaled(c, x.v)}; }
inline Jet operator/(const Jet& x, double c) { return {x.a / c, detail::scaled(1.0 / c, x.v)}; }
inline Jet operator/(double c, const Jet& x) { return {c / x.a, detail::scaled(-c / (x.a * x.a), x.v)}; }
inline Jet& operator+=(Jet& x, const Jet& y) { return x = x + y; }
inline Jet& operator-=(Jet& x, const Jet& y) { return x = x - y; }
inline Jet& operator*=(Jet& x, const Jet& y) { return x = x * y; }

inline Jet sin(const Jet& x) { return {std::sin(x.a), detail::scaled(std::cos(x.a), x.v)}; }
inline Jet cos(const Jet& x) { return {std::cos(x.a), detail::scaled(-std::sin(x.a), x.v)}; }
inline Jet exp(const Jet& x) {
  const double e = std::exp(x.a);
  return {e, detail::scaled(e, x.v)};
}
inline Jet log(const Jet& x) { return {std::log(x.a), detail::scaled(1.0 / x.a, x.v)}; }
inline Jet sqrt(const Jet& x) {
  const double s = std::sqrt(x.a);
  return {s, detail::scaled(0.5 / s, x.v)};
}
inline Jet tanh(const Jet& x) {
  const double t = std::tanh(x.a);
  return {t, detail::scaled(1.0 - t * t, x.v)};
}
inline Jet square(const Jet& x) { return x * x; }

}  // namespace mmc
