#pragma once

// Named kinematic trajectories derived from fitted joint angles and markers:
// differentiation, zero-phase low-pass filtering and cubic resampling.

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mmcfit/errors.hpp"
#include "mmcfit/model.hpp"

namespace mmc {

enum class ChannelId {
  ShoulderFlexion,
  ShoulderAbduction,
  ElbowFlexion,
  ElbowAngularVelocity,
  EndEffectorVelocity,
  TrunkDisplacement
};

inline constexpr std::array<ChannelId, 6> kAllChannels{ChannelId::ShoulderFlexion,      ChannelId::ShoulderAbduction,
                                                       ChannelId::ElbowFlexion,         ChannelId::ElbowAngularVelocity,
                                                       ChannelId::EndEffectorVelocity, ChannelId::TrunkDisplacement};

inline std::string channel_name(ChannelId c) {
  switch (c) {
    case ChannelId::ShoulderFlexion: return "shoulder_flexion";
    case ChannelId::ShoulderAbduction: return "shoulder_abduction";
    case ChannelId::ElbowFlexion: return "elbow_flexion";
    case ChannelId::ElbowAngularVelocity: return "elbow_angular_velocity";
    case ChannelId::EndEffectorVelocity: return "end_effector_velocity";
    case ChannelId::TrunkDisplacement: return "trunk_displacement";
  }
  return "?";
}

inline std::string channel_unit(ChannelId c) {
  switch (c) {
    case ChannelId::ShoulderFlexion:
    case ChannelId::ShoulderAbduction:
    case ChannelId::ElbowFlexion: return "deg";
    case ChannelId::ElbowAngularVelocity: return "deg_s";
    case ChannelId::EndEffectorVelocity: return "m_s";
    case ChannelId::TrunkDisplacement: return "mm";
  }
  return "?";
}

inline ChannelId channel_from_name(const std::string& s) {
  for (ChannelId c : kAllChannels)
    if (channel_name(c) == s) return c;
  throw ContractError("unknown channel '" + s + "'");
}

struct TrajectorySeries {
  double rate = 60.0;
  double t0 = 0.0;
  std::map<ChannelId, Eigen::VectorXd> channels;

  Eigen::Index length() const { return channels.empty() ? 0 : channels.begin()->second.size(); }
  double time(Eigen::Index i) const { return t0 + static_cast<double>(i) / rate; }

  const Eigen::VectorXd& channel(ChannelId c) const {
    auto it = channels.find(c);
    if (it == channels.end()) throw ContractError("missing channel '" + channel_name(c) + "'");
    return it->second;
  }

  void validate() const {
    if (!(rate > 0.0)) throw ContractError("series rate must be positive");
    for (const auto& [c, v] : channels)
      if (v.size() != length()) throw ContractError("channel '" + channel_name(c) + "' length differs");
  }
};

// ---- filtering -------------------------------------------------------------

struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 3> a{};  // a[0] == 1
};

/// Second-order Butterworth low-pass via the bilinear transform.
inline Biquad butterworth_lowpass(double cutoff_hz, double rate_hz) {
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2.0))
    throw ContractError("low-pass cutoff must lie in (0, Nyquist)");
  const double k = std::tan(std::numbers::pi * cutoff_hz / rate_hz);
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k * k);
  Biquad f;
  f.b = {k * k * norm, 2.0 * k * k * norm, k * k * norm};
  f.a = {1.0, 2.0 * (k * k - 1.0) * norm, (1.0 - std::numbers::sqrt2 * k + k * k) * norm};
  return f;
}

namespace detail {

// Direct-form II transposed pass with initial state scaled to x[0]'s steady state.
inline Eigen::VectorXd lfilter_steady(const Biquad& f, const Eigen::VectorXd& x) {
  const double gain = (f.b[0] + f.b[1] + f.b[2]) / (f.a[0] + f.a[1] + f.a[2]);
  double z2 = (f.b[2] - f.a[2] * gain) * x[0];
  double z1 = (f.b[1] - f.a[1] * gain) * x[0] + z2;
  Eigen::VectorXd y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double yi = f.b[0] * x[i] + z1;
    z1 = f.b[1] * x[i] - f.a[1] * yi + z2;
    z2 = f.b[2] * x[i] - f.a[2] * yi;
    y[i] = yi;
  }
  return y;
}

}  // namespace detail

/// Zero-phase forward-backward filtering with odd-reflection padding of 9 samples.
inline Eigen::VectorXd filtfilt(const Biquad& f, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  if (n == 0) return x;
  const Eigen::Index pad = std::min<Eigen::Index>(9, n - 1);
  Eigen::VectorXd ext(n + 2 * pad);
  for (Eigen::Index i = 0; i < pad; ++i) {
    ext[i] = 2.0 * x[0] - x[pad - i];
    ext[n + pad + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  ext.segment(pad, n) = x;
  Eigen::VectorXd y = detail::lfilter_steady(f, ext);
  y.reverseInPlace();
  y = detail::lfilter_steady(f, y);
  y.reverseInPlace();
  return y.segment(pad, n);
}

/// Central differences, one-sided at the ends.
inline Eigen::VectorXd differentiate(const Eigen::VectorXd& x, double rate) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd d(n);
  if (n < 2) return Eigen::VectorXd::Zero(n);
  d[0] = (x[1] - x[0]) * rate;
  d[n - 1] = (x[n - 1] - x[n - 2]) * rate;
  for (Eigen::Index i = 1; i + 1 < n; ++i) d[i] = (x[i + 1] - x[i - 1]) * rate / 2.0;
  return d;
}

// ---- cubic spline ------------------------------------------------------------

/// Not-a-knot cubic spline through uniformly spaced samples.
class UniformCubicSpline {
 public:
  UniformCubicSpline(double t0, double step, Eigen::VectorXd y) : t0_(t0), h_(step), y_(std::move(y)) {
    const Eigen::Index n = y_.size();
    m_ = Eigen::VectorXd::Zero(n);
    if (n == 3) {
      m_.setConstant((y_[2] - 2.0 * y_[1] + y_[0]) / (h_ * h_));
    } else if (n >= 4) {
      // unknowns: second derivatives at the knots
      std::vector<Eigen::Triplet<double>> trip;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
      trip.emplace_back(0, 0, 1.0);
      trip.emplace_back(0, 1, -2.0);
      trip.emplace_back(0, 2, 1.0);
      for (Eigen::Index i = 1; i + 1 < n; ++i) {
        trip.emplace_back(i, i - 1, 1.0);
        trip.emplace_back(i, i, 4.0);
        trip.emplace_back(i, i + 1, 1.0);
        rhs[i] = 6.0 * (y_[i + 1] - 2.0 * y_[i] + y_[i - 1]) / (h_ * h_);
      }
      trip.emplace_back(n - 1, n - 3, 1.0);
      trip.emplace_back(n - 1, n - 2, -2.0);
      trip.emplace_back(n - 1, n - 1, 1.0);
      Eigen::SparseMatrix<double> a(n, n);
      a.setFromTriplets(trip.begin(), trip.end());
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(a);
      m_ = lu.solve(rhs);
    }
  }

  double operator()(double t) const {
    const Eigen::Index n = y_.size();
    if (n == 1) return y_[0];
    const double s = (t - t0_) / h_;
    Eigen::Index i = static_cast<Eigen::Index>(std::floor(s));
    i = std::clamp<Eigen::Index>(i, 0, n - 2);
    const double a = s - static_cast<double>(i);  // in [0,1] inside the span
    const double b = 1.0 - a;
    return b * y_[i] + a * y_[i + 1] + (h_ * h_ / 6.0) * ((b * b * b - b) * m_[i] + (a * a * a - a) * m_[i + 1]);
  }

 private:
  double t0_, h_;
  Eigen::VectorXd y_;
  Eigen::VectorXd m_;
};

/// Cubic resampling. Output times are t0 + k/target_rate, from t0 up to and
/// including the last input time (never beyond it).
inline TrajectorySeries resample(const TrajectorySeries& series, double target_rate) {
  if (!(target_rate > 0.0)) throw ContractError("target rate must be positive");
  series.validate();
  if (target_rate == series.rate) return series;
  const Eigen::Index n = series.length();
  TrajectorySeries out;
  out.rate = target_rate;
  out.t0 = series.t0;
  if (n == 0) {
    for (const auto& [c, v] : series.channels) out.channels[c] = Eigen::VectorXd();
    return out;
  }
  const double span = static_cast<double>(n - 1) / series.rate;
  const auto count = static_cast<Eigen::Index>(std::floor(span * target_rate + 1e-9)) + 1;
  for (const auto& [c, v] : series.channels) {
    const UniformCubicSpline spline(0.0, 1.0 / series.rate, v);
    Eigen::VectorXd r(count);
    for (Eigen::Index k = 0; k < count; ++k) r[k] = spline(static_cast<double>(k) / target_rate);
    out.channels[c] = std::move(r);
  }
  return out;
}

// ---- channel derivation --------------------------------------------------------

struct DeriveOptions {
  double cutoff_hz = 10.0;
  double baseline_s = 0.3;
  std::string arm_suffix = "r";  // which arm's DOFs / hand marker to read
  std::string hand_marker;       // default "hand_<suffix>"
  std::string trunk_marker = "sternum";
};

/// `theta` is DOF x frames, `markers` the per-frame FK marker positions.
inline TrajectorySeries derive_channels(const BodyModel& model, const Eigen::MatrixXd& theta,
                                        const std::vector<Eigen::Matrix3Xd>& markers, double rate,
                                        const DeriveOptions& opt = {}) {
  const Eigen::Index n = theta.cols();
  if (n < 5) throw ContractError("trajectory too short to derive channels (need at least 5 frames)");
  if (theta.rows() != model.dof_count()) throw ContractError("theta rows differ from model DOF count");
  if (static_cast<Eigen::Index>(markers.size()) != n) throw ContractError("marker frames differ from theta frames");
  if (!(rate > 0.0)) throw ContractError("rate must be positive");
  const std::string& s = opt.arm_suffix;
  const auto dof = [&](const std::string& name) {
    const auto i = model.find_dof(name);
    if (!i) throw ContractError("model has no DOF '" + name + "'");
    return *i;
  };
  const auto marker = [&](const std::string& name) {
    const auto i = model.find_marker(name);
    if (!i) throw ContractError("model has no marker '" + name + "'");
    return *i;
  };
  const double deg = 180.0 / std::numbers::pi;
  const Biquad lp = butterworth_lowpass(std::min(opt.cutoff_hz, 0.45 * rate), rate);

  TrajectorySeries out;
  out.rate = rate;
  out.channels[ChannelId::ShoulderFlexion] = theta.row(dof("shoulder_flexion_" + s)).transpose() * deg;
  out.channels[ChannelId::ShoulderAbduction] = theta.row(dof("shoulder_abduction_" + s)).transpose() * deg;
  const Eigen::VectorXd elbow = theta.row(dof("elbow_flexion_" + s)).transpose() * deg;
  out.channels[ChannelId::ElbowFlexion] = elbow;
  out.channels[ChannelId::ElbowAngularVelocity] = filtfilt(lp, differentiate(elbow, rate));

  const int hand = marker(opt.hand_marker.empty() ? "hand_" + s : opt.hand_marker);
  Eigen::MatrixXd vel(3, n);
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd p(n);
    for (Eigen::Index f = 0; f < n; ++f) p[f] = markers[f](k, hand);
    vel.row(k) = filtfilt(lp, differentiate(p, rate)).transpose();
  }
  out.channels[ChannelId::EndEffectorVelocity] = vel.colwise().norm().transpose();

  const int trunk = marker(opt.trunk_marker);
  const Eigen::Index nb = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::lround(opt.baseline_s * rate)), 1, n);
  Vec3 base = Vec3::Zero();
  for (Eigen::Index f = 0; f < nb; ++f) base += markers[f].col(trunk);
  base /= static_cast<double>(nb);
  Eigen::VectorXd disp(n);
  for (Eigen::Index f = 0; f < n; ++f) disp[f] = (markers[f].col(trunk) - base).norm() * 1000.0;
  out.channels[ChannelId::TrunkDisplacement] = disp;
  return out;
}

// ---- trajectory file --------------------------------------------------------------

inline constexpr const char* kTrajectorySchema = "mmcfit.trajectory/1";

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trajectory(std::ostream& os, const TrajectorySeries& s) {
  s.validate();
  os << "# schema: " << kTrajectorySchema << "\n";
  os << "# rate_hz: " << format_double(s.rate) << "\n";
  os << "# t0: " << format_double(s.t0) << "\n";
  os << "time_s";
  for (const auto& [c, v] : s.channels) os << ',' << channel_name(c) << '_' << channel_unit(c);
  os << "\n";
  for (Eigen::Index i = 0; i < s.length(); ++i) {
    os << format_double(s.time(i));
    for (const auto& [c, v] : s.channels) os << ',' << format_double(v[i]);
    os << "\n";
  }
}

}  // namespace mmc
