#pragma once

// Implicit trajectory network: normalized time -> joint angles.
//
// Input t in [0,1] is expanded to [t, sin(2^k pi t), cos(2^k pi t)] for
// k = 0..fourier_pairs-1, passed through fully connected layers, and the
// output z is squashed into each DOF's limit box: lo + (hi - lo) * sigmoid(z).
//
// Parameter layout, per layer: weights (out x in, column-major) then bias.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mmcfit/autodiff.hpp"
#include "mmcfit/errors.hpp"
#include "mmcfit/log.hpp"
#include "mmcfit/model.hpp"

namespace mmc {

enum class Activation { Tanh, Softplus, Silu };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
    case Activation::Silu: return "silu";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "softplus") return Activation::Softplus;
  if (s == "silu") return Activation::Silu;
  throw ContractError("unknown activation '" + s + "'");
}

struct MLPSpec {
  int input_dim = 1;
  std::vector<int> hidden{256, 256, 256};
  int output_dim = 0;
  Activation activation = Activation::Silu;
  int fourier_pairs = 8;

  int encoded_dim() const { return input_dim + 2 * fourier_pairs; }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    int in = encoded_dim();
    for (int w : hidden) {
      n += static_cast<Eigen::Index>(w) * in + w;
      in = w;
    }
    return n + static_cast<Eigen::Index>(output_dim) * in + output_dim;
  }
};

/// Time features for a batch of normalized times; one column per time.
inline Eigen::MatrixXd encode_time(const MLPSpec& spec, const Eigen::VectorXd& times) {
  Eigen::MatrixXd e(spec.encoded_dim(), times.size());
  bool clamped = false;
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    double t = times[i];
    if (t < 0.0 || t > 1.0) {
      clamped = true;
      t = std::clamp(t, 0.0, 1.0);
    }
    e(0, i) = t;
    double f = std::numbers::pi;
    for (int k = 0; k < spec.fourier_pairs; ++k) {
      e(1 + 2 * k, i) = std::sin(f * t);
      e(2 + 2 * k, i) = std::cos(f * t);
      f *= 2.0;
    }
  }
  if (clamped) log_warning("trajectory network: time outside [0,1] was clamped");
  return e;
}

namespace detail {
inline Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& x) {
  switch (a) {
    case Activation::Tanh: return x.array().tanh().matrix();
    case Activation::Softplus: return (x.array().max(0.0) + (-x.array().abs()).exp().log1p()).matrix();
    case Activation::Silu: return (x.array() / (1.0 + (-x.array()).exp())).matrix();
  }
  return x;
}
inline ad::Var activate(Activation a, const ad::Var& x) {
  switch (a) {
    case Activation::Tanh: return ad::tanh(x);
    case Activation::Softplus: return ad::softplus(x);
    case Activation::Silu: return ad::silu(x);
  }
  return x;
}
}  // namespace detail

class TrajectoryNetwork {
 public:
  TrajectoryNetwork(MLPSpec spec, const BodyModel& model)
      : spec_(std::move(spec)), lower_(model.lower_limits()), upper_(model.upper_limits()) {
    if (spec_.output_dim != model.dof_count())
      throw ContractError("MLP output_dim " + std::to_string(spec_.output_dim) + " differs from model DOF count " +
                          std::to_string(model.dof_count()));
    if (spec_.input_dim != 1) throw ContractError("trajectory network input must be scalar time");
    for (int w : spec_.hidden)
      if (w <= 0) throw ContractError("hidden layer widths must be positive");
    if (spec_.fourier_pairs < 0) throw ContractError("fourier_pairs must be non-negative");
  }

  const MLPSpec& spec() const { return spec_; }
  Eigen::Index parameter_count() const { return spec_.parameter_count(); }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }

  /// Glorot-uniform hidden weights, zero biases, zero output layer (θ starts at mid-range).
  Eigen::VectorXd initial_parameters(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(parameter_count());
    Eigen::Index at = 0;
    int in = spec_.encoded_dim();
    for (int w : spec_.hidden) {
      const double bound = std::sqrt(6.0 / static_cast<double>(in + w));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(w) * in; ++i) phi[at + i] = dist(rng);
      at += static_cast<Eigen::Index>(w) * in + w;
      in = w;
    }
    return phi;
  }

  /// θ for a batch of normalized times: DOF x times.
  Eigen::MatrixXd evaluate(const Eigen::Ref<const Eigen::VectorXd>& phi, const Eigen::VectorXd& times) const {
    check(phi.size());
    Eigen::MatrixXd h = encode_time(spec_, times);
    Eigen::Index at = 0;
    int in = spec_.encoded_dim();
    for (int w : spec_.hidden) {
      Eigen::Map<const Eigen::MatrixXd> wm(phi.data() + at, w, in);
      Eigen::Map<const Eigen::VectorXd> b(phi.data() + at + static_cast<Eigen::Index>(w) * in, w);
      Eigen::MatrixXd z = wm * h;
      z.colwise() += b;
      h = detail::activate(spec_.activation, z);
      at += static_cast<Eigen::Index>(w) * in + w;
      in = w;
    }
    Eigen::Map<const Eigen::MatrixXd> wm(phi.data() + at, spec_.output_dim, in);
    Eigen::Map<const Eigen::VectorXd> b(phi.data() + at + static_cast<Eigen::Index>(spec_.output_dim) * in,
                                        spec_.output_dim);
    Eigen::MatrixXd z = wm * h;
    z.colwise() += b;
    const Eigen::ArrayXXd s = 1.0 / (1.0 + (-z.array()).exp());
    return (s.colwise() * (upper_ - lower_).array()).colwise() + lower_.array();
  }

  JointAngles evaluate(const Eigen::Ref<const Eigen::VectorXd>& phi, double t) const {
    Eigen::VectorXd ts(1);
    ts[0] = t;
    return evaluate(phi, ts).col(0);
  }

  /// Tape version. `params` is a column leaf holding φ starting at `offset`;
  /// `encoded` comes from encode_time. Returns θ as DOF x frames.
  ad::Var forward(ad::Tape& tape, const ad::Var& params, Eigen::Index offset, const Eigen::MatrixXd& encoded) const {
    if (encoded.rows() != spec_.encoded_dim()) throw ContractError("encoded time has wrong feature count");
    ad::Var h = tape.constant(encoded);
    Eigen::Index at = offset;
    int in = spec_.encoded_dim();
    auto layer = [&](int out) {
      const ad::Var w = ad::reshape_slice(params, at, out, in);
      const ad::Var b = ad::reshape_slice(params, at + static_cast<Eigen::Index>(out) * in, out, 1);
      at += static_cast<Eigen::Index>(out) * in + out;
      in = out;
      return ad::matmul(w, h) + b;
    };
    for (int w : spec_.hidden) h = detail::activate(spec_.activation, layer(w));
    const ad::Var z = layer(spec_.output_dim);
    const ad::Var range = tape.constant(Eigen::MatrixXd(upper_ - lower_));
    const ad::Var lo = tape.constant(Eigen::MatrixXd(lower_));
    return ad::sigmoid(z) * range + lo;
  }

  /// Pre-squash output that maps to θ (inverse of the limit squashing), clipped
  /// `margin` (as a fraction of range) inside the box.
  Eigen::MatrixXd logits_for(const Eigen::MatrixXd& theta, double margin = 1e-4) const {
    Eigen::MatrixXd out(theta.rows(), theta.cols());
    for (Eigen::Index d = 0; d < theta.rows(); ++d)
      for (Eigen::Index f = 0; f < theta.cols(); ++f) {
        double s = (theta(d, f) - lower_[d]) / (upper_[d] - lower_[d]);
        s = std::clamp(s, margin, 1.0 - margin);
        out(d, f) = std::log(s / (1.0 - s));
      }
    return out;
  }

 private:
  void check(Eigen::Index n) const {
    if (n != parameter_count())
      throw ContractError("φ has " + std::to_string(n) + " entries, network needs " +
                          std::to_string(parameter_count()));
  }

  MLPSpec spec_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

/// Single-time convenience matching the network's contract.
inline JointAngles mlp_eval(const TrajectoryNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& phi, double t) {
  return net.evaluate(phi, t);
}

}  // namespace mmc
