#pragma once

// Marker-based baseline: scale the model from a static window, then solve
// joint angles frame by frame with damped least squares.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mmcfit/errors.hpp"
#include "mmcfit/jet.hpp"
#include "mmcfit/model.hpp"
#include "mmcfit/num.hpp"
#include "mmcfit/observations.hpp"

namespace mmc {

struct LMOptions {
  int max_iterations = 100;
  double tol = 1e-10;  // marker RMS (m) below which a solve is done
  double initial_lambda = 1e-3;
};

struct LMResult {
  Eigen::VectorXd x;
  double rms = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Box-constrained Levenberg-Marquardt on residuals r(x) with Jacobian J(x).
/// `eval(x)` returns {r, J}; `rms_of(r)` maps residuals to the reported RMS.
template <class Eval, class Rms>
LMResult levenberg_marquardt(Eval&& eval, Eigen::VectorXd x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             Rms&& rms_of, const LMOptions& opt) {
  x = x.cwiseMax(lo).cwiseMin(hi);
  auto [r, jac] = eval(x);
  double cost = r.squaredNorm();
  double lambda = opt.initial_lambda;
  LMResult res;
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it;
    if (rms_of(r) < opt.tol) {
      res.converged = true;
      break;
    }
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < 1e-15) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    bool stalled = false;
    while (!accepted) {
      Eigen::MatrixXd damped = a;
      for (Eigen::Index i = 0; i < a.rows(); ++i) damped(i, i) += lambda * (a(i, i) + 1e-9);
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      const Eigen::VectorXd xn = (x + step).cwiseMax(lo).cwiseMin(hi);
      const Eigen::VectorXd applied = xn - x;
      if (applied.norm() <= 1e-14 * (1.0 + x.norm())) {
        stalled = true;
        break;
      }
      auto [rn, jn] = eval(xn);
      const double cn = rn.squaredNorm();
      if (std::isfinite(cn) && cn < cost) {
        const double drop = cost - cn;
        x = xn;
        r = std::move(rn);
        jac = std::move(jn);
        cost = cn;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (drop <= 1e-14 * cost || applied.norm() <= 1e-12 * (1.0 + x.norm())) stalled = true;
      } else {
        lambda *= 4.0;
        if (lambda > 1e12) {
          stalled = true;
          break;
        }
      }
    }
    if (stalled) {
      res.converged = true;
      res.iterations = it + 1;
      break;
    }
    res.iterations = it + 1;
  }
  if (!res.converged && rms_of(r) < opt.tol) res.converged = true;
  res.x = x;
  res.rms = rms_of(r);
  return res;
}

struct TwoStageOptions {
  double static_window_s = 0.5;
  bool solve_offsets = false;
  LMOptions lm;
  double min_scale = 0.5;
  double max_scale = 2.0;
  double static_rms_limit = 0.02;  // m
  double offset_radius = 0.05;
};

struct StaticScaling {
  ScaleParams scale;
  MarkerOffsets offsets;
  JointAngles pose;
  double rms_m = 0.0;
  int iterations = 0;
};

struct TwoStageResult {
  ScaleParams scale;
  MarkerOffsets offsets;
  double rate = 0.0;
  std::vector<JointAngles> theta;
  Eigen::VectorXd marker_rmse_m;
  std::vector<bool> flagged;
  StaticScaling stage1;
};

namespace detail {

// Residuals FK(x) - target over markers with finite targets, Jacobian via jets.
// x = [θ (D) | log-scale of scalable segments | offsets (3M) if enabled]
struct MarkerProblem {
  const BodyModel& model;
  const Eigen::Matrix3Xd& target;
  bool with_theta = true;
  bool with_scale = false;
  bool with_offsets = false;
  JointAngles fixed_theta;
  ScaleParams fixed_scale;
  MarkerOffsets fixed_offsets;
  std::vector<int> scalable;

  Eigen::Index size() const {
    return (with_theta ? model.dof_count() : 0) + (with_scale ? static_cast<Eigen::Index>(scalable.size()) : 0) +
           (with_offsets ? 3 * model.marker_count() : 0);
  }

  std::pair<Eigen::VectorXd, Eigen::MatrixXd> operator()(const Eigen::VectorXd& x) const {
    using S = Num<Jet>;
    const Eigen::Index n = x.size();
    Eigen::Index at = 0;
    std::vector<S> theta(model.dof_count());
    for (int d = 0; d < model.dof_count(); ++d)
      theta[d] = with_theta ? S(Jet::variable(x[at + d], n, at + d)) : S(fixed_theta[d]);
    if (with_theta) at += model.dof_count();
    std::vector<S> scale(model.segment_count());
    for (int s = 0; s < model.segment_count(); ++s) scale[s] = S(fixed_scale.values[s]);
    if (with_scale) {
      for (std::size_t k = 0; k < scalable.size(); ++k) scale[scalable[k]] = S(exp(Jet::variable(x[at + k], n, at + k)));
      at += static_cast<Eigen::Index>(scalable.size());
    }
    std::vector<Vec3Of<S>> off(model.marker_count());
    for (int m = 0; m < model.marker_count(); ++m)
      for (int i = 0; i < 3; ++i)
        off[m][i] = with_offsets ? S(Jet::variable(x[at + 3 * m + i], n, at + 3 * m + i)) : S(fixed_offsets.values(i, m));
    const auto pts = forward_kinematics_generic<S>(model, scale, off, theta);

    std::vector<int> valid;
    for (int m = 0; m < model.marker_count(); ++m)
      if (target.col(m).allFinite()) valid.push_back(m);
    Eigen::VectorXd r(3 * valid.size());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * valid.size(), n);
    for (std::size_t k = 0; k < valid.size(); ++k) {
      const int m = valid[k];
      for (int i = 0; i < 3; ++i) {
        const Jet j = to_jet(pts[m][i]);
        r[3 * k + i] = j.a - target(i, m);
        if (j.v.size() == n) jac.row(3 * k + i) = j.v.transpose();
      }
    }
    return {r, jac};
  }
};

inline double marker_rms(const Eigen::VectorXd& r) {
  if (r.size() == 0) return 0.0;
  return std::sqrt(r.squaredNorm() / (static_cast<double>(r.size()) / 3.0));
}

inline Eigen::Matrix3Xd mean_markers(const Marker3DTrial& trial) {
  const Eigen::Index m = trial.frames.front().cols();
  Eigen::Matrix3Xd sum = Eigen::Matrix3Xd::Zero(3, m);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(m);
  for (const auto& f : trial.frames)
    for (Eigen::Index k = 0; k < m; ++k)
      if (f.col(k).allFinite()) {
        sum.col(k) += f.col(k);
        ++count[k];
      }
  for (Eigen::Index k = 0; k < m; ++k)
    sum.col(k) = count[k] > 0 ? Eigen::Vector3d(sum.col(k) / count[k])
                              : Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  return sum;
}

}  // namespace detail

/// Stage 1: scale (and optionally offsets) from the mean marker positions of a static window.
inline StaticScaling scale_from_static(const BodyModel& model, const Marker3DTrial& static_window,
                                       const TwoStageOptions& opt = {}) {
  if (static_window.frames.empty()) throw ContractError("static window is empty");
  if (static_window.duration() < opt.static_window_s - 0.5 / static_window.rate)
    throw ContractError("static window shorter than " + std::to_string(opt.static_window_s) + " s");
  for (const auto& f : static_window.frames)
    if (f.cols() != model.marker_count()) throw ContractError("static window marker count mismatch");
  const Eigen::Matrix3Xd target = detail::mean_markers(static_window);

  detail::MarkerProblem prob{model, target};
  prob.with_scale = true;
  prob.with_offsets = opt.solve_offsets;
  prob.fixed_scale = model.unit_scale();
  prob.fixed_offsets = model.zero_offsets(opt.offset_radius);
  for (int s = 0; s < model.segment_count(); ++s)
    if (model.segments()[s].scalable) prob.scalable.push_back(s);

  const Eigen::Index n = prob.size();
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd lo(n), hi(n);
  lo.head(model.dof_count()) = model.lower_limits();
  hi.head(model.dof_count()) = model.upper_limits();
  x0.head(model.dof_count()) = model.zero_pose().cwiseMax(model.lower_limits()).cwiseMin(model.upper_limits());
  const auto ns = static_cast<Eigen::Index>(prob.scalable.size());
  lo.segment(model.dof_count(), ns).setConstant(std::log(opt.min_scale));
  hi.segment(model.dof_count(), ns).setConstant(std::log(opt.max_scale));
  if (opt.solve_offsets) {
    lo.tail(3 * model.marker_count()).setConstant(-opt.offset_radius);
    hi.tail(3 * model.marker_count()).setConstant(opt.offset_radius);
  }
  LMOptions lm = opt.lm;
  lm.max_iterations = std::max(lm.max_iterations, 200);
  const LMResult res = levenberg_marquardt(prob, x0, lo, hi, detail::marker_rms, lm);
  if (!res.x.allFinite() || res.rms > opt.static_rms_limit)
    throw ScalingError("static scaling diverged (marker RMS " + std::to_string(res.rms) + " m)");

  StaticScaling out;
  out.pose = res.x.head(model.dof_count());
  out.scale = model.unit_scale();
  for (Eigen::Index k = 0; k < ns; ++k) out.scale.values[prob.scalable[k]] = std::exp(res.x[model.dof_count() + k]);
  for (Eigen::Index k = 0; k < ns; ++k) {
    const double s = out.scale.values[prob.scalable[k]];
    if (s <= opt.min_scale * 1.0001 || s >= opt.max_scale * 0.9999)
      throw ScalingError("static scaling hit the scale bound for segment '" + model.segments()[prob.scalable[k]].id + "'");
  }
  out.offsets = model.zero_offsets(opt.offset_radius);
  if (opt.solve_offsets)
    for (int m = 0; m < model.marker_count(); ++m)
      out.offsets.values.col(m) = res.x.segment(model.dof_count() + ns + 3 * m, 3);
  out.rms_m = res.rms;
  out.iterations = res.iterations;
  return out;
}

/// Stage 2 for one frame: θ minimizing marker error, within joint limits.
inline LMResult solve_frame(const BodyModel& model, const ScaleParams& scale, const MarkerOffsets& offsets,
                            const Eigen::Matrix3Xd& markers, const JointAngles& init, const LMOptions& opt = {}) {
  detail::MarkerProblem prob{model, markers};
  prob.fixed_scale = scale;
  prob.fixed_offsets = offsets;
  return levenberg_marquardt(prob, init, model.lower_limits(), model.upper_limits(), detail::marker_rms, opt);
}

/// Two-stage marker pipeline: static scaling, then warm-started per-frame IK.
inline TwoStageResult fit_two_stage(const BodyModel& model, const Marker3DTrial& static_window,
                                    const Marker3DTrial& motion, const TwoStageOptions& opt = {}) {
  if (motion.frames.empty()) throw ContractError("motion trial has no frames");
  TwoStageResult out;
  out.stage1 = scale_from_static(model, static_window, opt);
  out.scale = out.stage1.scale;
  out.offsets = out.stage1.offsets;
  out.rate = motion.rate;
  const int n = motion.frame_count();
  out.theta.resize(n);
  out.marker_rmse_m.resize(n);
  out.flagged.assign(n, false);
  JointAngles prev = out.stage1.pose;
  for (int f = 0; f < n; ++f) {
    if (motion.frames[f].cols() != model.marker_count()) throw ContractError("motion frame marker count mismatch");
    const LMResult r = solve_frame(model, out.scale, out.offsets, motion.frames[f], prev, opt.lm);
    out.theta[f] = r.x;
    out.marker_rmse_m[f] = r.rms;
    out.flagged[f] = !r.converged;
    prev = r.x;
  }
  return out;
}

}  // namespace mmc
