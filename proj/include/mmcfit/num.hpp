#pragma once

// Constant-folding wrapper used by the generic kinematics/projection code.
//
// Kinematic chains multiply many literal zeros and ones (axis components,
// identity rotations). For tape-based scalar types every such product would
// allocate a node, so values that are still compile-free constants are kept
// as plain doubles until they meet a real variable.

#include <cmath>
#include <type_traits>
#include <utility>

#include "mmcfit/autodiff.hpp"
#include "mmcfit/jet.hpp"

namespace mmc {

template <class T>
class Num {
 public:
  Num() : is_const_(true), c_(0.0) {}
  Num(double c) : is_const_(true), c_(c) {}  // NOLINT
  Num(T v) : is_const_(false), c_(0.0), v_(std::move(v)) {}  // NOLINT

  bool is_const() const { return is_const_; }
  double constant() const { return c_; }
  const T& var() const { return v_; }

 private:
  bool is_const_;
  double c_;
  T v_;
};

/// Scalar used inside generic code: doubles stay doubles, everything else folds.
template <class T>
using Folded = std::conditional_t<std::is_same_v<T, double>, double, Num<T>>;

template <class T>
Num<T> operator+(const Num<T>& a, const Num<T>& b) {
  if (a.is_const() && b.is_const()) return a.constant() + b.constant();
  if (a.is_const()) return a.constant() == 0.0 ? b : Num<T>(b.var() + a.constant());
  if (b.is_const()) return b.constant() == 0.0 ? a : Num<T>(a.var() + b.constant());
  return Num<T>(a.var() + b.var());
}

template <class T>
Num<T> operator-(const Num<T>& a) {
  if (a.is_const()) return -a.constant();
  return Num<T>(-a.var());
}

template <class T>
Num<T> operator-(const Num<T>& a, const Num<T>& b) {
  if (a.is_const() && b.is_const()) return a.constant() - b.constant();
  if (b.is_const()) return b.constant() == 0.0 ? a : Num<T>(a.var() - b.constant());
  if (a.is_const()) return a.constant() == 0.0 ? -b : Num<T>(a.constant() - b.var());
  return Num<T>(a.var() - b.var());
}

template <class T>
Num<T> operator*(const Num<T>& a, const Num<T>& b) {
  if (a.is_const() && b.is_const()) return a.constant() * b.constant();
  if (a.is_const() || b.is_const()) {
    const double c = a.is_const() ? a.constant() : b.constant();
    const Num<T>& v = a.is_const() ? b : a;
    if (c == 0.0) return 0.0;
    if (c == 1.0) return v;
    return Num<T>(v.var() * c);
  }
  return Num<T>(a.var() * b.var());
}

template <class T>
Num<T> operator/(const Num<T>& a, const Num<T>& b) {
  if (a.is_const() && b.is_const()) return a.constant() / b.constant();
  if (b.is_const()) return b.constant() == 1.0 ? a : Num<T>(a.var() * (1.0 / b.constant()));
  if (a.is_const()) return a.constant() == 0.0 ? Num<T>(0.0) : Num<T>(a.constant() / b.var());
  return Num<T>(a.var() / b.var());
}

template <class T> Num<T> operator+(const Num<T>& a, double b) { return a + Num<T>(b); }
template <class T> Num<T> operator+(double a, const Num<T>& b) { return Num<T>(a) + b; }
template <class T> Num<T> operator-(const Num<T>& a, double b) { return a - Num<T>(b); }
template <class T> Num<T> operator-(double a, const Num<T>& b) { return Num<T>(a) - b; }
template <class T> Num<T> operator*(const Num<T>& a, double b) { return a * Num<T>(b); }
template <class T> Num<T> operator*(double a, const Num<T>& b) { return Num<T>(a) * b; }
template <class T> Num<T> operator/(const Num<T>& a, double b) { return a / Num<T>(b); }
template <class T> Num<T> operator/(double a, const Num<T>& b) { return Num<T>(a) / b; }

template <class T>
Num<T> sin(const Num<T>& a) {
  using std::sin;
  if (a.is_const()) return std::sin(a.constant());
  return Num<T>(sin(a.var()));
}

template <class T>
Num<T> cos(const Num<T>& a) {
  using std::cos;
  if (a.is_const()) return std::cos(a.constant());
  return Num<T>(cos(a.var()));
}

template <class T>
Num<T> sqrt(const Num<T>& a) {
  using std::sqrt;
  if (a.is_const()) return std::sqrt(a.constant());
  return Num<T>(sqrt(a.var()));
}

// ---- helpers shared by generic code ------------------------------------

inline double smallest_value(double x) { return x; }
inline double smallest_value(const Jet& x) { return x.a; }
inline double smallest_value(const ad::Var& x) { return x.value().minCoeff(); }
template <class T>
double smallest_value(const Num<T>& x) {
  return x.is_const() ? x.constant() : smallest_value(x.var());
}

/// Turns a folded value into a tape variable (constants become constant nodes).
inline ad::Var to_var(const Num<ad::Var>& x, ad::Tape& tape) {
  return x.is_const() ? tape.constant(x.constant()) : x.var();
}

inline Jet to_jet(const Num<Jet>& x) { return x.is_const() ? Jet(x.constant()) : x.var(); }

}  // namespace mmc
