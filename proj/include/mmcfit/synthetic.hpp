#pragma once

// Ground-truth scenario generator: drinking-like joint trajectories built from
// minimum-jerk segments, a half-circle camera rig, keypoint and marker
// rendering with noise, and series corruption for agreement tests.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mmcfit/camera.hpp"
#include "mmcfit/errors.hpp"
#include "mmcfit/kinematics.hpp"
#include "mmcfit/measures.hpp"
#include "mmcfit/model.hpp"
#include "mmcfit/observations.hpp"

namespace mmc {

struct RigSpec {
  int n_cameras = 5;
  double radius = 2.5;  // m
  double arc_deg = 180.0;
  int width = 1920;
  int height = 1080;
  double focal = 1400.0;  // px
  double camera_height = 1.3;
  Vec3 target = Vec3(0.25, -0.1, 0.95);
  std::array<double, 5> dist{-0.02, 0.005, 0.0, 0.0, 0.0};
};

struct NoiseSpec {
  double pixel_sigma = 0.0;
  double dropout = 0.0;
  std::vector<double> camera_dropout;  // per-camera override in rig order; missing entries use `dropout`
  double confidence_lo = 0.7;  // confidences uniform in [lo, hi]
  double confidence_hi = 1.0;
  double marker_sigma = 0.0;  // m
};

struct SyntheticScenario {
  std::uint64_t seed = 0;
  Side side = Side::Right;
  std::string task_arm = "r";
  double video_rate = 60.0;
  double marker_rate = 100.0;
  RigSpec rig;
  NoiseSpec noise;
  double scale_jitter = 0.05;   // relative, per segment, per participant
  double pose_jitter = 0.06;    // rad, per keyframe DOF, per trial
  double timing_jitter = 0.1;   // relative, per segment
  double lead_in_s = 0.6;
  double tail_s = 0.7;

  void validate() const {
    if (!(video_rate > 0.0) || !(marker_rate > 0.0)) throw ContractError("scenario rates must be positive");
    if (rig.n_cameras < 1) throw ContractError("scenario needs at least one camera");
    std::vector<double> probs{noise.dropout, noise.confidence_lo, noise.confidence_hi};
    probs.insert(probs.end(), noise.camera_dropout.begin(), noise.camera_dropout.end());
    for (double p : probs)
      if (!(p >= 0.0 && p <= 1.0)) throw ContractError("scenario probabilities must lie in [0,1]");
    if (noise.confidence_lo > noise.confidence_hi) throw ContractError("confidence range is inverted");
    if (noise.pixel_sigma < 0.0 || noise.marker_sigma < 0.0) throw ContractError("noise sigma must be non-negative");
    if (!(lead_in_s > 0.0) || !(tail_s >= 0.0)) throw ContractError("scenario durations must be positive");
  }
};

/// Rig on a horizontal arc centred on the target, cameras looking at it.
inline CameraRig make_rig(const RigSpec& spec) {
  if (spec.n_cameras < 1) throw ContractError("rig needs at least one camera");
  std::vector<Camera> cams;
  for (int i = 0; i < spec.n_cameras; ++i) {
    const double frac = spec.n_cameras == 1 ? 0.5 : static_cast<double>(i) / (spec.n_cameras - 1);
    const double ang = (-0.5 + frac) * spec.arc_deg * std::numbers::pi / 180.0;
    const Vec3 center(spec.target.x() + spec.radius * std::cos(ang), spec.target.y() + spec.radius * std::sin(ang),
                      spec.camera_height);
    Camera c;
    c.id = "cam" + std::to_string(i);
    c.width = spec.width;
    c.height = spec.height;
    c.intrinsics.fx = c.intrinsics.fy = spec.focal;
    c.intrinsics.cx = spec.width / 2.0;
    c.intrinsics.cy = spec.height / 2.0;
    c.intrinsics.dist = spec.dist;
    c.extrinsics = look_at(center, spec.target);
    cams.push_back(std::move(c));
  }
  return CameraRig(std::move(cams));
}

// ---- trajectories ---------------------------------------------------------------

/// 10s^3 - 15s^4 + 6s^5: zero velocity and acceleration at both ends.
inline double minimum_jerk(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

struct TrajectorySegment {
  double t_begin = 0.0;
  double t_end = 0.0;
  JointAngles from;
  JointAngles to;
};

struct GroundTruth {
  ScaleParams scale;
  MarkerOffsets offsets;
  std::vector<TrajectorySegment> segments;  // contiguous, in time order
  double duration = 0.0;
  // nominal movement intervals [begin, end) in seconds: reach, forward, back, return
  std::array<std::pair<double, double>, 4> movements{};

  JointAngles pose_at(double t) const {
    for (const auto& s : segments)
      if (t < s.t_end) {
        const double u = minimum_jerk((t - s.t_begin) / (s.t_end - s.t_begin));
        return s.from + u * (s.to - s.from);
      }
    return segments.back().to;
  }

  int frame_count(double rate) const { return static_cast<int>(std::floor(duration * rate + 1e-9)) + 1; }

  /// DOF x frames, sampled at k / rate.
  Eigen::MatrixXd theta_at(double rate) const {
    const int n = frame_count(rate);
    Eigen::MatrixXd out(segments.front().from.size(), n);
    for (int k = 0; k < n; ++k) out.col(k) = pose_at(k / rate);
    return out;
  }
};

namespace detail {

inline std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(c)};
  return std::mt19937_64(seq);
}

// Keyframes of the task arm in its own DOF names; trunk values in world DOFs.
struct Keyframe {
  std::map<std::string, double> arm;
  std::map<std::string, double> trunk;
};

inline std::vector<Keyframe> drinking_keyframes() {
  const Keyframe rest{{{"shoulder_flexion", 0.15}, {"shoulder_abduction", 0.20}, {"shoulder_rotation", 0.25},
                       {"elbow_flexion", 1.45}, {"pronation", 0.10}, {"wrist_flexion", 0.05}, {"wrist_deviation", 0.0}},
                      {{"trunk_tx", 0.0}, {"trunk_flexion", 0.0}, {"trunk_rotation", 0.0}}};
  const Keyframe grasp{{{"shoulder_flexion", 0.75}, {"shoulder_abduction", 0.30}, {"shoulder_rotation", 0.05},
                        {"elbow_flexion", 0.75}, {"pronation", 0.45}, {"wrist_flexion", -0.20}, {"wrist_deviation", 0.10}},
                       {{"trunk_tx", 0.025}, {"trunk_flexion", 0.10}, {"trunk_rotation", -0.06}}};
  const Keyframe mouth{{{"shoulder_flexion", 0.65}, {"shoulder_abduction", 0.55}, {"shoulder_rotation", 0.35},
                        {"elbow_flexion", 2.25}, {"pronation", 0.60}, {"wrist_flexion", 0.25}, {"wrist_deviation", -0.10}},
                       {{"trunk_tx", 0.01}, {"trunk_flexion", 0.04}, {"trunk_rotation", -0.03}}};
  Keyframe sip = mouth;  // small cup tilt while drinking
  sip.arm["pronation"] += 0.03;
  sip.arm["wrist_flexion"] += 0.02;
  Keyframe put = grasp;
  put.arm["shoulder_flexion"] -= 0.02;
  Keyframe release = put;
  release.arm["wrist_flexion"] += 0.01;
  // rest, grasp, mouth, sip, put, release, rest
  return {rest, grasp, mouth, sip, put, release, rest};
}

}  // namespace detail

/// Per-participant true scale, jittered around 1.
inline ScaleParams participant_scale(const BodyModel& model, std::uint64_t seed, int participant, double jitter) {
  auto rng = detail::seeded(seed, 0x5ca1e, static_cast<std::uint64_t>(participant));
  std::uniform_real_distribution<double> u(-jitter, jitter);
  ScaleParams s = model.unit_scale();
  for (int i = 0; i < model.segment_count(); ++i)
    if (model.segments()[i].scalable) s.values[i] = 1.0 + u(rng);
  return s;
}

/// Minimum-jerk drinking cycle: rest, reach, grasp hold, forward to mouth,
/// drink, back, release hold, return, rest. Deterministic per (seed, participant, trial).
inline GroundTruth generate_trajectory(const BodyModel& model, const SyntheticScenario& sc, int participant = 0,
                                       int trial = 0) {
  sc.validate();
  GroundTruth gt;
  gt.scale = participant_scale(model, sc.seed, participant, sc.scale_jitter);
  gt.offsets = model.zero_offsets();
  auto rng = detail::seeded(sc.seed, 0x7a1, static_cast<std::uint64_t>(participant), static_cast<std::uint64_t>(trial));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  const auto keys = detail::drinking_keyframes();
  std::vector<JointAngles> poses;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    JointAngles q = model.zero_pose();
    for (const auto& side : {std::string("r"), std::string("l")})
      for (const auto& [name, v] : keys.front().arm)
        if (auto i = model.find_dof(name + "_" + side)) q[*i] = v;  // both arms start at rest
    for (const auto& [name, v] : keys[k].arm) {
      const auto i = model.find_dof(name + "_" + sc.task_arm);
      if (!i) throw ContractError("scenario task arm '" + sc.task_arm + "' is not in the model");
      q[*i] = v;
    }
    for (const auto& [name, v] : keys[k].trunk) q[model.dof_index(name)] = v;
    poses.push_back(q);
  }
  // jitter the movement keyframes; hold poses keep their small offset from the pose they follow
  const JointAngles sip_delta = poses[3] - poses[2];
  const JointAngles release_delta = poses[5] - poses[4];
  for (std::size_t k = 1; k < poses.size(); ++k)
    for (int i = 0; i < model.dof_count(); ++i)
      poses[k][i] += sc.pose_jitter * unit(rng) * (model.dofs()[i].kind == DofKind::Translation ? 0.1 : 1.0);
  poses[3] = poses[2] + sip_delta;
  poses[5] = poses[4] + release_delta;
  for (auto& q : poses) q = model.clamp(q);

  const std::vector<double> nominal{1.0, 0.35, 0.9, 1.2, 0.9, 0.35, 1.0};
  // rest -> grasp (reach), grasp hold, grasp -> mouth (forward), mouth -> sip (drink),
  // sip -> put (back), put -> release (hold), release -> rest (return)
  const std::vector<std::pair<int, int>> legs{{0, 1}, {1, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}};
  double t = sc.lead_in_s;
  gt.segments.push_back({0.0, t, poses[0], poses[0]});
  for (std::size_t k = 0; k < legs.size(); ++k) {
    const double dur = nominal[k] * (1.0 + sc.timing_jitter * unit(rng));
    gt.segments.push_back({t, t + dur, poses[legs[k].first], poses[legs[k].second]});
    t += dur;
  }
  gt.segments.push_back({t, t + sc.tail_s, poses.back(), poses.back()});
  gt.duration = t + sc.tail_s;
  gt.movements = {std::pair{gt.segments[1].t_begin, gt.segments[1].t_end},
                  std::pair{gt.segments[3].t_begin, gt.segments[3].t_end},
                  std::pair{gt.segments[5].t_begin, gt.segments[5].t_end},
                  std::pair{gt.segments[7].t_begin, gt.segments[7].t_end}};
  return gt;
}

/// Noise-free FK markers per frame at `rate`.
inline std::vector<Eigen::Matrix3Xd> truth_markers(const BodyModel& model, const GroundTruth& gt, double rate) {
  const Eigen::MatrixXd theta = gt.theta_at(rate);
  std::vector<Eigen::Matrix3Xd> out;
  out.reserve(theta.cols());
  for (Eigen::Index k = 0; k < theta.cols(); ++k)
    out.push_back(forward_kinematics(model, gt.scale, gt.offsets, theta.col(k)).positions);
  return out;
}

/// Derived trajectories of the ground truth at `rate`.
inline TrajectorySeries truth_series(const BodyModel& model, const GroundTruth& gt, double rate,
                                     const DeriveOptions& opt = {}) {
  return derive_channels(model, gt.theta_at(rate), truth_markers(model, gt, rate), rate, opt);
}

/// Projects FK markers into every camera, then adds pixel noise, dropout and
/// confidences. Points outside the image are reported missing.
inline TrialObservations render_observations(const BodyModel& model, const GroundTruth& gt, const CameraRig& rig,
                                             const NoiseSpec& noise, double rate, std::uint64_t seed,
                                             const std::string& trial_id = "trial") {
  TrialObservations obs;
  obs.trial_id = trial_id;
  obs.rate = rate;
  const std::vector<Eigen::Matrix3Xd> pts = truth_markers(model, gt, rate);
  obs.frames = static_cast<int>(pts.size());
  auto rng = detail::seeded(seed, 0x0b5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t c = 0; c < rig.size(); ++c) {
    const double dropout = c < noise.camera_dropout.size() ? noise.camera_dropout[c] : noise.dropout;
    CameraTrack tr = CameraTrack::empty(model.marker_count(), obs.frames);
    for (int f = 0; f < obs.frames; ++f)
      for (int m = 0; m < model.marker_count(); ++m) {
        // draw every random number unconditionally so streams do not depend on visibility
        const double nu = gauss(rng), nv = gauss(rng), drop = u01(rng), conf = u01(rng);
        const Vec3 p = pts[f].col(m);
        const Vec3 pc = rig[c].extrinsics.rotation * p + rig[c].extrinsics.translation;
        if (pc.z() <= 0.0 || drop < dropout) continue;
        const Eigen::Vector2d uv = project(rig[c], p);
        if (uv.x() < 0.0 || uv.y() < 0.0 || uv.x() > rig[c].width || uv.y() > rig[c].height) continue;
        tr.u(m, f) = uv.x() + noise.pixel_sigma * nu;
        tr.v(m, f) = uv.y() + noise.pixel_sigma * nv;
        tr.confidence(m, f) = noise.confidence_lo + (noise.confidence_hi - noise.confidence_lo) * conf;
      }
    obs.cameras.push_back(std::move(tr));
  }
  return obs;
}

/// OMC-style 3D marker track with Gaussian noise.
inline Marker3DTrial render_markers(const BodyModel& model, const GroundTruth& gt, const NoiseSpec& noise, double rate,
                                    std::uint64_t seed, const std::string& trial_id = "trial") {
  Marker3DTrial out;
  out.trial_id = trial_id;
  out.rate = rate;
  out.frames = truth_markers(model, gt, rate);
  auto rng = detail::seeded(seed, 0x3d);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& f : out.frames)
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] += noise.marker_sigma * gauss(rng);
  return out;
}

/// y[i] = x[i + lag] + bias + noise, holding the edge sample where i + lag
/// falls outside the series. With this convention comparing y against x
/// reports bias `bias` and lag `lag` samples.
inline Eigen::VectorXd corrupt(const Eigen::VectorXd& x, double bias, int lag_samples, double noise_sigma,
                               std::uint64_t seed, double rate, double max_lag_s = 0.25) {
  if (!(rate > 0.0)) throw ContractError("corrupt: rate must be positive");
  if (std::abs(lag_samples) / rate > max_lag_s + 1e-12)
    throw ContractError("corrupt: |lag| exceeds " + std::to_string(max_lag_s) + " s");
  const Eigen::Index n = x.size();
  Eigen::VectorXd y(n);
  auto rng = detail::seeded(seed, 0xc0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = std::clamp<Eigen::Index>(i + lag_samples, 0, n - 1);
    y[i] = x[j] + bias;
    if (noise_sigma > 0.0) y[i] += noise_sigma * gauss(rng);
  }
  return y;
}

}  // namespace mmc
