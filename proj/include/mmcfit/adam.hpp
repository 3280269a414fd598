#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <utility>

#include "mmcfit/errors.hpp"

namespace mmc {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(Eigen::Index n, const AdamOptions& o = {}) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0, o.lr, o.beta1, o.beta2, o.eps};
  }
};

/// Bias-corrected Adam update applied in place. `lr` overrides state.lr when positive.
inline void adam_update(AdamState& s, Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad,
                        double lr = -1.0) {
  if (params.size() != grad.size() || s.m.size() != grad.size() || s.v.size() != grad.size())
    throw ContractError("adam: parameter, gradient and moment sizes differ");
  ++s.step;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  const double rate = lr > 0.0 ? lr : s.lr;
  params.array() -= rate * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

inline std::pair<Eigen::VectorXd, AdamState> adam_step(AdamState state, Eigen::VectorXd params,
                                                       const Eigen::VectorXd& grad) {
  adam_update(state, params, grad);
  return {std::move(params), std::move(state)};
}

/// Cosine decay from `base` at step 0 to `base * final_fraction` at `total`.
inline double cosine_lr(double base, long step, long total, double final_fraction = 0.01) {
  if (total <= 0) return base;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  const double lo = base * final_fraction;
  return lo + 0.5 * (base - lo) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace mmc
