#pragma once

// End-to-end fitting: per-trial implicit trajectory networks plus shared body
// scale and marker offsets, optimized jointly against confidence-weighted
// robust reprojection error over batches of trials.
//
// Flat parameter layout (ParamVector blocks):
//   "log_scale"    one entry per segment (non-scalable entries are ignored)
//   "offset_raw"   3 per marker; offset = raw * R / sqrt(R^2 + |raw|^2), |offset| < R
//   "phi/<trial>"  network weights of each fitted trial

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmcfit/adam.hpp"
#include "mmcfit/autodiff.hpp"
#include "mmcfit/camera.hpp"
#include "mmcfit/errors.hpp"
#include "mmcfit/ik_two_stage.hpp"
#include "mmcfit/log.hpp"
#include "mmcfit/mlp.hpp"
#include "mmcfit/model.hpp"
#include "mmcfit/num.hpp"
#include "mmcfit/observations.hpp"
#include "mmcfit/params.hpp"

namespace mmc {

struct LossOptions {
  double huber_delta = 10.0;     // px
  double smooth_weight = 1e-6;   // on mean squared joint acceleration, (rad/s^2)^2
  double offset_weight = 1e4;    // on sum of squared offsets, m^2
  double offset_radius = 0.05;   // m
};

struct FitConfig {
  std::vector<int> hidden{256, 256, 256};
  Activation activation = Activation::Silu;
  int fourier_pairs = 8;

  double lr = 1e-3;
  double shared_lr = 1e-4;
  int epochs = 500;
  double final_lr_fraction = 0.01;
  int pretrain_steps = 400;
  double pretrain_lr = 1e-3;
  double ridge = 1e-6;
  std::uint64_t seed = 0;
  int eval_every = 10;

  LossOptions loss;
  bool fit_scale = true;
  bool fit_offsets = true;
  int batches = 8;
  double confidence_floor = 0.3;
  int min_cameras = 2;
  double failure_fraction = 0.5;
  double static_window_s = 0.5;

  MLPSpec mlp_spec(int dofs) const {
    MLPSpec s;
    s.hidden = hidden;
    s.output_dim = dofs;
    s.activation = activation;
    s.fourier_pairs = fourier_pairs;
    return s;
  }
};

inline nlohmann::json fit_config_to_json(const FitConfig& c) {
  return {{"mlp", {{"layers", c.hidden.size()}, {"width", c.hidden.empty() ? 0 : c.hidden.front()},
                   {"hidden", c.hidden}, {"activation", to_string(c.activation)}, {"fourier_pairs", c.fourier_pairs}}},
          {"optimizer", {{"lr", c.lr}, {"shared_lr", c.shared_lr}, {"steps", c.epochs}, {"seed", c.seed},
                         {"final_lr_fraction", c.final_lr_fraction}, {"pretrain_steps", c.pretrain_steps},
                         {"pretrain_lr", c.pretrain_lr}, {"eval_every", c.eval_every}}},
          {"loss", {{"huber_delta", c.loss.huber_delta}, {"smooth_weight", c.loss.smooth_weight},
                    {"offset_weight", c.loss.offset_weight}, {"offset_radius", c.loss.offset_radius}}},
          {"fit_scale", c.fit_scale},
          {"fit_offsets", c.fit_offsets},
          {"batches", c.batches},
          {"confidence_floor", c.confidence_floor},
          {"min_cameras", c.min_cameras},
          {"static_window_s", c.static_window_s}};
}

/// Reads any subset of the fields written by fit_config_to_json over `base`.
inline FitConfig fit_config_from_json(const nlohmann::json& j, FitConfig c = {}) {
  try {
    if (j.contains("mlp")) {
      const auto& m = j.at("mlp");
      if (m.contains("hidden")) {
        c.hidden = m.at("hidden").get<std::vector<int>>();
      } else if (m.contains("layers") || m.contains("width")) {
        const int layers = m.value("layers", static_cast<int>(c.hidden.size()));
        const int width = m.value("width", c.hidden.empty() ? 256 : c.hidden.front());
        c.hidden.assign(static_cast<std::size_t>(layers), width);
      }
      if (m.contains("activation")) c.activation = activation_from_string(m.at("activation").get<std::string>());
      c.fourier_pairs = m.value("fourier_pairs", c.fourier_pairs);
    }
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      c.lr = o.value("lr", c.lr);
      c.shared_lr = o.value("shared_lr", c.shared_lr);
      c.epochs = o.value("steps", c.epochs);
      c.seed = o.value("seed", c.seed);
      c.final_lr_fraction = o.value("final_lr_fraction", c.final_lr_fraction);
      c.pretrain_steps = o.value("pretrain_steps", c.pretrain_steps);
      c.pretrain_lr = o.value("pretrain_lr", c.pretrain_lr);
      c.eval_every = o.value("eval_every", c.eval_every);
    }
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      c.loss.huber_delta = l.value("huber_delta", c.loss.huber_delta);
      c.loss.smooth_weight = l.value("smooth_weight", c.loss.smooth_weight);
      c.loss.offset_weight = l.value("offset_weight", c.loss.offset_weight);
      c.loss.offset_radius = l.value("offset_radius", c.loss.offset_radius);
    }
    c.fit_scale = j.value("fit_scale", c.fit_scale);
    c.fit_offsets = j.value("fit_offsets", c.fit_offsets);
    c.batches = j.value("batches", c.batches);
    c.confidence_floor = j.value("confidence_floor", c.confidence_floor);
    c.min_cameras = j.value("min_cameras", c.min_cameras);
    c.static_window_s = j.value("static_window_s", c.static_window_s);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("invalid fit configuration: ") + e.what());
  }
  if (c.epochs < 0 || c.pretrain_steps < 0 || c.batches < 1 || !(c.lr > 0.0) || !(c.loss.huber_delta > 0.0))
    throw ContractError("invalid fit configuration: steps/batches/lr/huber_delta out of range");
  return c;
}

/// Squashes a raw offset into the open ball of radius R.
template <class S>
Vec3Of<S> squash_offset(const Vec3Of<S>& raw, double radius) {
  using std::sqrt;
  const S n2 = raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2];
  const S f = radius / sqrt(radius * radius + n2);
  return {raw[0] * f, raw[1] * f, raw[2] * f};
}

inline Vec3 unsquash_offset(const Vec3& off, double radius) {
  const double n = off.norm();
  if (n >= radius) throw ContractError("offset outside the squashing radius");
  return off * (radius / std::sqrt(radius * radius - n * n));
}

// ---- session problem --------------------------------------------------------------

/// Precomputed data and the differentiable loss for a set of trials sharing a body.
class SessionProblem {
 public:
  struct TrialData {
    const TrialObservations* obs = nullptr;
    Eigen::MatrixXd encoded;  // network input features per frame
    // per camera, per marker: 1 x F rows
    std::vector<std::vector<Eigen::RowVectorXd>> u, v, w;
    double weight_total = 0.0;
  };

  SessionProblem(const BodyModel& model, const CameraRig& rig, std::vector<const TrialObservations*> trials,
                 const FitConfig& cfg)
      : model_(model), rig_(rig), cfg_(cfg), net_(cfg.mlp_spec(model.dof_count()), model) {
    for (const TrialObservations* t : trials) {
      t->validate(model, rig);
      if (t->frames < 3) throw ContractError("trial '" + t->trial_id + "' needs at least 3 frames");
      TrialData d;
      d.obs = t;
      Eigen::VectorXd times(t->frames);
      for (int f = 0; f < t->frames; ++f) times[f] = static_cast<double>(f) / (t->frames - 1);
      d.encoded = encode_time(net_.spec(), times);
      d.u.resize(rig.size());
      d.v.resize(rig.size());
      d.w.resize(rig.size());
      for (std::size_t c = 0; c < rig.size(); ++c)
        for (int m = 0; m < model.marker_count(); ++m) {
          Eigen::RowVectorXd u(t->frames), v(t->frames), w(t->frames);
          for (int f = 0; f < t->frames; ++f) {
            const Observation2D o = t->at(c, m, f);
            const bool ok = !o.missing(0.0);
            u[f] = ok ? o.u : 0.0;
            v[f] = ok ? o.v : 0.0;
            w[f] = ok ? o.confidence : 0.0;
          }
          d.weight_total += w.sum();
          d.u[c].push_back(std::move(u));
          d.v[c].push_back(std::move(v));
          d.w[c].push_back(std::move(w));
        }
      data_.push_back(std::move(d));
    }
    params_.add_block("log_scale", Eigen::VectorXd::Zero(model.segment_count()));
    params_.add_block("offset_raw", Eigen::VectorXd::Zero(3 * model.marker_count()));
    for (const auto& d : data_) params_.add_block("phi/" + d.obs->trial_id, Eigen::VectorXd::Zero(net_.parameter_count()));
  }

  const BodyModel& model() const { return model_; }
  const CameraRig& rig() const { return rig_; }
  const FitConfig& config() const { return cfg_; }
  const TrajectoryNetwork& network() const { return net_; }
  const std::vector<TrialData>& trials() const { return data_; }
  std::size_t trial_count() const { return data_.size(); }

  /// Layout template; values are the problem's initial point.
  const ParamVector& layout() const { return params_; }
  Eigen::Index size() const { return params_.size(); }
  Eigen::Index shared_size() const { return model_.segment_count() + 3 * model_.marker_count(); }
  const BlockSlice& phi_block(std::size_t trial) const { return params_.block("phi/" + data_[trial].obs->trial_id); }

  ScaleParams scale_of(const Eigen::VectorXd& x) const {
    ScaleParams s = model_.unit_scale();
    for (int i = 0; i < model_.segment_count(); ++i)
      if (model_.segments()[i].scalable && cfg_.fit_scale) s.values[i] = std::exp(x[i]);
    return s;
  }

  MarkerOffsets offsets_of(const Eigen::VectorXd& x) const {
    MarkerOffsets o = model_.zero_offsets(cfg_.loss.offset_radius);
    if (!cfg_.fit_offsets) return o;
    const Eigen::Index at = model_.segment_count();
    for (int m = 0; m < model_.marker_count(); ++m) {
      const Vec3Of<double> raw{x[at + 3 * m], x[at + 3 * m + 1], x[at + 3 * m + 2]};
      const auto off = squash_offset<double>(raw, cfg_.loss.offset_radius);
      o.values.col(m) = Vec3(off[0], off[1], off[2]);
    }
    return o;
  }

  /// Writes scale and offsets into the shared block of x.
  void set_shared(Eigen::VectorXd& x, const ScaleParams& scale, const MarkerOffsets& offsets) const {
    for (int i = 0; i < model_.segment_count(); ++i) x[i] = std::log(scale.values[i]);
    const Eigen::Index at = model_.segment_count();
    for (int m = 0; m < model_.marker_count(); ++m)
      x.segment(at + 3 * m, 3) = unsquash_offset(offsets.values.col(m), cfg_.loss.offset_radius);
  }

  /// θ (DOF x frames) of one trial at its frame times.
  Eigen::MatrixXd theta(const Eigen::VectorXd& x, std::size_t trial) const {
    const BlockSlice& b = phi_block(trial);
    const int n = data_[trial].obs->frames;
    Eigen::VectorXd times(n);
    for (int f = 0; f < n; ++f) times[f] = static_cast<double>(f) / (n - 1);
    return net_.evaluate(x.segment(b.offset, b.size), times);
  }

  struct Terms {
    ad::Var loss;
    double data = 0.0;
    double smooth = 0.0;
    double offset_penalty = 0.0;
  };

  /// Builds the loss over `subset` (indices into trials()) on `tape` with params leaf `x`.
  Terms build(ad::Tape& tape, const ad::Var& x, const std::vector<std::size_t>& subset) const {
    using S = Num<ad::Var>;
    const int ns = model_.segment_count();
    const int nm = model_.marker_count();
    std::vector<S> scale(ns, S(1.0));
    if (cfg_.fit_scale)
      for (int s = 0; s < ns; ++s)
        if (model_.segments()[s].scalable) scale[s] = S(ad::exp(ad::block(x, s, 0, 1, 1)));
    std::vector<Vec3Of<S>> offsets(nm, Vec3Of<S>{S(0.0), S(0.0), S(0.0)});
    ad::Var penalty = tape.constant(0.0);
    if (cfg_.fit_offsets) {
      const ad::Var raw_all = ad::block(x, ns, 0, 3 * nm, 1);
      for (int m = 0; m < nm; ++m) {
        const Vec3Of<S> raw{S(ad::block(raw_all, 3 * m, 0, 1, 1)), S(ad::block(raw_all, 3 * m + 1, 0, 1, 1)),
                            S(ad::block(raw_all, 3 * m + 2, 0, 1, 1))};
        offsets[m] = squash_offset<S>(raw, cfg_.loss.offset_radius);
      }
      ad::Var acc = tape.constant(0.0);
      for (int m = 0; m < nm; ++m)
        for (int i = 0; i < 3; ++i) acc = acc + ad::square(to_var(offsets[m][i], tape));
      penalty = acc;
    }

    double weight_total = 0.0;
    for (std::size_t k : subset) weight_total += data_[k].weight_total;
    ad::Var data_sum = tape.constant(0.0);
    ad::Var smooth = tape.constant(0.0);
    for (std::size_t k : subset) {
      const TrialData& d = data_[k];
      const BlockSlice& b = phi_block(k);
      const ad::Var theta = net_.forward(tape, x, b.offset, d.encoded);  // DOF x F
      std::vector<S> q;
      q.reserve(model_.dof_count());
      for (int i = 0; i < model_.dof_count(); ++i) q.emplace_back(ad::row(theta, i));
      const auto pts = forward_kinematics_generic<S>(model_, scale, offsets, q);
      for (std::size_t c = 0; c < rig_.size(); ++c)
        for (int m = 0; m < nm; ++m) {
          if (d.w[c][m].sum() == 0.0) continue;
          const auto uv = project_generic<S>(rig_[c].intrinsics, rig_[c].extrinsics, pts[m]);
          const ad::Var du = to_var(uv[0], tape) - tape.constant(Eigen::MatrixXd(d.u[c][m]));
          const ad::Var dv = to_var(uv[1], tape) - tape.constant(Eigen::MatrixXd(d.v[c][m]));
          const ad::Var h = ad::huber_sq(ad::square(du) + ad::square(dv), cfg_.loss.huber_delta);
          data_sum = data_sum + ad::weighted_sum(h, Eigen::MatrixXd(d.w[c][m]));
        }
      if (cfg_.loss.smooth_weight > 0.0 && d.obs->frames >= 3) {
        const Eigen::Index f = d.obs->frames;
        const double r2 = d.obs->rate * d.obs->rate;
        const ad::Var acc = (ad::block(theta, 0, 2, theta.rows(), f - 2) - 2.0 * ad::block(theta, 0, 1, theta.rows(), f - 2) +
                             ad::block(theta, 0, 0, theta.rows(), f - 2)) *
                            r2;
        smooth = smooth + ad::mean(ad::square(acc)) * (1.0 / static_cast<double>(subset.size()));
      }
    }
    Terms t;
    const ad::Var data_term = weight_total > 0.0 ? data_sum * (1.0 / weight_total) : data_sum * 0.0;
    t.data = data_term.scalar();
    t.smooth = smooth.scalar();
    t.offset_penalty = penalty.scalar();
    t.loss = data_term + cfg_.loss.smooth_weight * smooth + cfg_.loss.offset_weight * penalty;
    return t;
  }

  std::vector<std::size_t> all_trials() const {
    std::vector<std::size_t> v(data_.size());
    std::iota(v.begin(), v.end(), 0);
    return v;
  }

  double loss(const Eigen::VectorXd& x, const std::vector<std::size_t>& subset) const {
    ad::Tape tape;
    const ad::Var xv = tape.constant(Eigen::MatrixXd(x));
    return build(tape, xv, subset).loss.scalar();
  }
  double loss(const Eigen::VectorXd& x) const { return loss(x, all_trials()); }

  ad::ValueAndGradient value_and_gradient(const Eigen::VectorXd& x, const std::vector<std::size_t>& subset) const {
    return ad::value_and_gradient([&](ad::Tape& tape, const ad::Var& xv) { return build(tape, xv, subset).loss; }, x);
  }
  ad::ValueAndGradient value_and_gradient(const Eigen::VectorXd& x) const { return value_and_gradient(x, all_trials()); }

  /// Unweighted RMS pixel error over all non-missing observations of one trial.
  double reprojection_rms(const Eigen::VectorXd& x, std::size_t trial) const {
    const TrialData& d = data_[trial];
    const Eigen::MatrixXd th = theta(x, trial);
    const ScaleParams s = scale_of(x);
    const MarkerOffsets o = offsets_of(x);
    double ss = 0.0;
    long n = 0;
    for (int f = 0; f < d.obs->frames; ++f) {
      const MarkerCloud cloud = forward_kinematics(model_, s, o, th.col(f));
      for (std::size_t c = 0; c < rig_.size(); ++c)
        for (int m = 0; m < model_.marker_count(); ++m) {
          if (!(d.w[c][m][f] > 0.0)) continue;
          const Eigen::Vector2d uv = project(rig_[c], cloud.positions.col(m));
          ss += (uv - Eigen::Vector2d(d.u[c][m][f], d.v[c][m][f])).squaredNorm();
          ++n;
        }
    }
    return n > 0 ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
  }

 private:
  const BodyModel& model_;
  const CameraRig& rig_;
  FitConfig cfg_;
  TrajectoryNetwork net_;
  std::vector<TrialData> data_;
  ParamVector params_;
};

/// Loss of a session at given scale, offsets and per-trial φ.
inline double reprojection_loss(const BodyModel& model, const CameraRig& rig, const ScaleParams& scale,
                                const MarkerOffsets& offsets, const std::vector<Eigen::VectorXd>& phis,
                                const std::vector<const TrialObservations*>& trials, const FitConfig& cfg) {
  if (phis.size() != trials.size()) throw ContractError("reprojection_loss: one φ block per trial required");
  SessionProblem prob(model, rig, trials, cfg);
  Eigen::VectorXd x = prob.layout().values();
  prob.set_shared(x, scale, offsets);
  for (std::size_t k = 0; k < trials.size(); ++k) {
    const BlockSlice& b = prob.phi_block(k);
    if (phis[k].size() != b.size) throw ContractError("reprojection_loss: φ block has the wrong size");
    x.segment(b.offset, b.size) = phis[k];
  }
  return prob.loss(x);
}

// ---- fitting ------------------------------------------------------------------------

struct TrialFit {
  std::string trial_id;
  std::string participant;
  std::string arm;
  double rate = 60.0;
  Eigen::VectorXd phi;
  Eigen::MatrixXd theta;  // DOF x frames at the video rate
  double final_loss = 0.0;
  double reprojection_rms_px = 0.0;
};

struct FailedTrial {
  std::string trial_id;
  std::string participant;
  std::string arm;
  std::string reason;
};

struct SessionFit {
  ScaleParams scale;
  MarkerOffsets offsets;
  std::vector<TrialFit> trials;
  std::vector<FailedTrial> failed;
  double loss = 0.0;
  std::vector<double> best_loss_history;  // best-so-far full loss at each evaluation
  MLPSpec spec;
};

/// Reason a trial cannot be fitted, or nullopt. A marker seen by fewer than
/// `min_cameras` confident views in more than `failure_fraction` of frames fails the trial.
inline std::optional<std::string> trial_failure(const BodyModel& model, const TrialObservations& t, const FitConfig& cfg) {
  for (int m = 0; m < model.marker_count(); ++m) {
    int bad = 0;
    for (int f = 0; f < t.frames; ++f) {
      int seen = 0;
      for (std::size_t c = 0; c < t.cameras.size(); ++c)
        if (!t.at(c, m, f).missing(cfg.confidence_floor)) ++seen;
      if (seen < std::max(2, cfg.min_cameras)) ++bad;
    }
    if (bad > cfg.failure_fraction * t.frames)
      return "marker '" + model.markers()[m].id + "' has fewer than " + std::to_string(std::max(2, cfg.min_cameras)) +
             " usable views in " + std::to_string(bad) + " of " + std::to_string(t.frames) + " frames";
  }
  return std::nullopt;
}

/// Per-frame triangulation of every marker (NaN where under-determined).
inline Marker3DTrial triangulate_trial(const BodyModel& model, const CameraRig& rig, const TrialObservations& t,
                                       const TriangulationOptions& opt) {
  Marker3DTrial out;
  out.trial_id = t.trial_id;
  out.participant = t.participant;
  out.arm = t.arm;
  out.rate = t.rate;
  std::vector<Observation2D> views(rig.size());
  for (int f = 0; f < t.frames; ++f) {
    Eigen::Matrix3Xd pts(3, model.marker_count());
    for (int m = 0; m < model.marker_count(); ++m) {
      for (std::size_t c = 0; c < rig.size(); ++c) views[c] = t.at(c, m, f);
      try {
        pts.col(m) = triangulate(rig, views, opt).point;
      } catch (const UnderdeterminedError&) {
        pts.col(m).setConstant(std::numeric_limits<double>::quiet_NaN());
      }
    }
    out.frames.push_back(std::move(pts));
  }
  return out;
}

namespace detail {

// Output layer by ridge regression onto target logits, then Adam on the
// normalized angle error.
inline Eigen::VectorXd pretrain_network(const TrajectoryNetwork& net, const Eigen::MatrixXd& theta_target,
                                        const FitConfig& cfg, std::uint64_t seed) {
  Eigen::VectorXd phi = net.initial_parameters(seed);
  const Eigen::Index n = theta_target.cols();
  Eigen::VectorXd times(n);
  for (Eigen::Index f = 0; f < n; ++f) times[f] = static_cast<double>(f) / (n - 1);
  const Eigen::MatrixXd enc = encode_time(net.spec(), times);

  // hidden features with the initial weights
  Eigen::MatrixXd h = enc;
  Eigen::Index at = 0;
  int in = net.spec().encoded_dim();
  for (int w : net.spec().hidden) {
    Eigen::Map<const Eigen::MatrixXd> wm(phi.data() + at, w, in);
    Eigen::Map<const Eigen::VectorXd> b(phi.data() + at + static_cast<Eigen::Index>(w) * in, w);
    Eigen::MatrixXd z = wm * h;
    z.colwise() += b;
    h = activate(net.spec().activation, z);
    at += static_cast<Eigen::Index>(w) * in + w;
    in = w;
  }
  const Eigen::MatrixXd target = net.logits_for(theta_target, 1e-3);
  Eigen::MatrixXd ha(in + 1, n);
  ha.topRows(in) = h;
  ha.row(in).setOnes();
  Eigen::MatrixXd gram = ha * ha.transpose();
  gram.diagonal().array() += cfg.ridge * std::max(1.0, gram.diagonal().mean());
  const Eigen::MatrixXd beta = gram.ldlt().solve(ha * target.transpose());  // (in+1) x D
  const int d = net.spec().output_dim;
  Eigen::Map<Eigen::MatrixXd>(phi.data() + at, d, in) = beta.topRows(in).transpose();
  phi.segment(at + static_cast<Eigen::Index>(d) * in, d) = beta.row(in).transpose();

  if (cfg.pretrain_steps > 0) {
    const Eigen::VectorXd range = net.upper() - net.lower();
    Eigen::MatrixXd scaled_target = theta_target.array().colwise() / range.array();
    AdamState st = AdamState::init(phi.size(), {cfg.pretrain_lr});
    const Eigen::MatrixXd inv_range = range.cwiseInverse();
    for (int s = 0; s < cfg.pretrain_steps; ++s) {
      const auto vg = ad::value_and_gradient(
          [&](ad::Tape& tape, const ad::Var& p) {
            const ad::Var th = net.forward(tape, p, 0, enc) * tape.constant(inv_range);
            return ad::mean(ad::square(th - tape.constant(scaled_target)));
          },
          phi);
      adam_update(st, phi, vg.gradient, cosine_lr(cfg.pretrain_lr, s, cfg.pretrain_steps, cfg.final_lr_fraction));
    }
  }
  return phi;
}

}  // namespace detail

/// Round-robin assignment of trials to min(batches, trials) batches.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t trials, int batches) {
  const std::size_t nb = std::min<std::size_t>(trials, static_cast<std::size_t>(std::max(1, batches)));
  std::vector<std::vector<std::size_t>> out(nb);
  for (std::size_t k = 0; k < trials; ++k) out[k % nb].push_back(k);
  return out;
}

/// Initialization from triangulation and per-frame IK, then joint Adam
/// optimization of shared scale/offsets and every trial's φ over batches.
inline SessionFit fit_end_to_end(const BodyModel& model, const CameraRig& rig,
                                 const std::vector<TrialObservations>& trials, const FitConfig& cfg = {}) {
  if (trials.empty()) throw ContractError("fit_end_to_end: no trials");
  if (rig.size() < 2) log_warning("fit_end_to_end: rig has fewer than 2 cameras");
  SessionFit out;
  out.spec = cfg.mlp_spec(model.dof_count());
  out.scale = model.unit_scale();
  out.offsets = model.zero_offsets(cfg.loss.offset_radius);

  std::vector<const TrialObservations*> ok;
  for (const auto& t : trials) {
    t.validate(model, rig);
    if (auto why = trial_failure(model, t, cfg)) {
      log_warning("trial '" + t.trial_id + "' failed: " + *why);
      out.failed.push_back({t.trial_id, t.participant, t.arm, *why});
    } else {
      ok.push_back(&t);
    }
  }
  if (ok.empty()) return out;

  const TriangulationOptions topt{cfg.min_cameras, cfg.confidence_floor};
  std::vector<Marker3DTrial> tri;
  for (const auto* t : ok) tri.push_back(triangulate_trial(model, rig, *t, topt));

  // body scale from the static lead-in of the first trial
  TwoStageOptions tso;
  tso.static_window_s = cfg.static_window_s;
  ScaleParams scale0 = model.unit_scale();
  {
    const int nwin = std::max(1, static_cast<int>(std::lround(cfg.static_window_s * tri.front().rate)));
    try {
      if (cfg.fit_scale) scale0 = scale_from_static(model, tri.front().window(0, std::min(nwin, tri.front().frame_count())), tso).scale;
    } catch (const std::exception& e) {
      log_warning(std::string("static scaling for initialization failed, using unit scale: ") + e.what());
    }
  }

  SessionProblem prob(model, rig, ok, cfg);
  Eigen::VectorXd x = prob.layout().values();
  prob.set_shared(x, scale0, model.zero_offsets(cfg.loss.offset_radius));

  for (std::size_t k = 0; k < ok.size(); ++k) {
    // per-frame IK on triangulated markers, warm-started
    const Marker3DTrial& m = tri[k];
    Eigen::MatrixXd theta(model.dof_count(), m.frame_count());
    JointAngles prev = model.clamp(model.zero_pose());
    for (int f = 0; f < m.frame_count(); ++f) {
      const LMResult r = solve_frame(model, scale0, model.zero_offsets(), m.frames[f], prev, tso.lm);
      theta.col(f) = r.x;
      prev = r.x;
    }
    const BlockSlice& b = prob.phi_block(k);
    x.segment(b.offset, b.size) = detail::pretrain_network(prob.network(), theta, cfg, cfg.seed * 7919 + k);
  }

  const auto batches = make_batches(ok.size(), cfg.batches);
  const Eigen::Index nshared = prob.shared_size();
  AdamState shared_state = AdamState::init(nshared, {cfg.shared_lr});
  std::vector<AdamState> phi_state;
  for (std::size_t k = 0; k < ok.size(); ++k) phi_state.push_back(AdamState::init(prob.phi_block(k).size, {cfg.lr}));

  Eigen::VectorXd best_x = x;
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](double value, const Eigen::VectorXd& at) {
    if (value < best) {
      best = value;
      best_x = at;
    }
    out.best_loss_history.push_back(best);
  };
  const long total = static_cast<long>(cfg.epochs);
  const int eval_every = std::max(1, cfg.eval_every);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batches.size() > 1 && epoch % eval_every == 0) consider(prob.loss(x), x);
    const double lr = cosine_lr(cfg.lr, epoch, total, cfg.final_lr_fraction);
    const double slr = cosine_lr(cfg.shared_lr, epoch, total, cfg.final_lr_fraction);
    for (const auto& batch : batches) {
      const auto vg = prob.value_and_gradient(x, batch);
      if (batches.size() == 1) consider(vg.value, x);
      adam_update(shared_state, x.head(nshared), vg.gradient.head(nshared), slr);
      for (std::size_t k : batch) {
        const BlockSlice& b = prob.phi_block(k);
        adam_update(phi_state[k], x.segment(b.offset, b.size), vg.gradient.segment(b.offset, b.size), lr);
      }
    }
  }
  consider(prob.loss(x), x);
  x = best_x;

  out.loss = best;
  out.scale = prob.scale_of(x);
  out.offsets = prob.offsets_of(x);
  for (std::size_t k = 0; k < ok.size(); ++k) {
    TrialFit tf;
    tf.trial_id = ok[k]->trial_id;
    tf.participant = ok[k]->participant;
    tf.arm = ok[k]->arm;
    tf.rate = ok[k]->rate;
    const BlockSlice& b = prob.phi_block(k);
    tf.phi = x.segment(b.offset, b.size);
    tf.theta = prob.theta(x, k);
    tf.final_loss = prob.loss(x, {k});
    tf.reprojection_rms_px = prob.reprojection_rms(x, k);
    out.trials.push_back(std::move(tf));
  }
  return out;
}

}  // namespace mmc
