#pragma once

// Parametric upper-body kinematic tree and forward kinematics.
//
// Frame conventions (world and every segment frame at zero pose):
//   +x forward (towards the table), +y to the participant's left, +z up.
// Each joint is an ordered list of single-axis DOFs applied intrinsically:
// a rotation DOF post-multiplies the running rotation, a translation DOF
// moves the joint origin along the axis expressed in the running frame.
//
// Scale of segment k multiplies every length that lives in k's frame: the
// offsets of k's child joints and the local offsets of k's markers.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmcfit/errors.hpp"
#include "mmcfit/num.hpp"

namespace mmc {

using Vec3 = Eigen::Vector3d;
using JointAngles = Eigen::VectorXd;

enum class DofKind { Rotation, Translation };
enum class Side { Left, Right, Bilateral };

struct Dof {
  std::string name;
  Vec3 axis = Vec3::UnitZ();
  DofKind kind = DofKind::Rotation;
  double min = -1.0;
  double max = 1.0;
};

struct SegmentSpec {
  std::string id;
  std::string parent;  // empty for the root
  Vec3 neutral_offset = Vec3::Zero();
  bool scalable = true;
};

struct JointSpec {
  std::string segment;
  std::vector<Dof> dofs;
};

struct MarkerSpec {
  std::string id;
  std::string segment;
  Vec3 local_offset = Vec3::Zero();
};

/// Per-segment scale factors, indexed like BodyModel::segments().
struct ScaleParams {
  Eigen::VectorXd values;
};

/// Per-marker local corrections (meters), one column per model marker.
struct MarkerOffsets {
  Eigen::Matrix3Xd values;
  double radius = 0.05;

  bool within_bound() const {
    for (Eigen::Index i = 0; i < values.cols(); ++i)
      if (values.col(i).norm() > radius + 1e-12) return false;
    return true;
  }
};

/// World-frame marker positions, one column per model marker.
struct MarkerCloud {
  Eigen::Matrix3Xd positions;
};

class BodyModel {
 public:
  BodyModel() = default;

  BodyModel(std::vector<SegmentSpec> segments, std::vector<JointSpec> joints, std::vector<MarkerSpec> markers)
      : segments_(std::move(segments)), joints_(std::move(joints)), markers_(std::move(markers)) {
    index();
  }

  const std::vector<SegmentSpec>& segments() const { return segments_; }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const std::vector<MarkerSpec>& markers() const { return markers_; }

  int dof_count() const { return static_cast<int>(dofs_.size()); }
  int segment_count() const { return static_cast<int>(segments_.size()); }
  int marker_count() const { return static_cast<int>(markers_.size()); }

  /// DOFs in the order used by JointAngles: segments in declaration order,
  /// each joint's DOFs in their listed order.
  const std::vector<Dof>& dofs() const { return dofs_; }
  std::vector<std::string> dof_names() const {
    std::vector<std::string> out;
    for (const auto& d : dofs_) out.push_back(d.name);
    return out;
  }

  Eigen::VectorXd lower_limits() const {
    Eigen::VectorXd v(dof_count());
    for (int i = 0; i < dof_count(); ++i) v[i] = dofs_[i].min;
    return v;
  }
  Eigen::VectorXd upper_limits() const {
    Eigen::VectorXd v(dof_count());
    for (int i = 0; i < dof_count(); ++i) v[i] = dofs_[i].max;
    return v;
  }

  std::optional<int> find_dof(const std::string& name) const { return find(dof_lookup_, name); }
  std::optional<int> find_marker(const std::string& id) const { return find(marker_lookup_, id); }
  std::optional<int> find_segment(const std::string& id) const { return find(segment_lookup_, id); }

  int dof_index(const std::string& name) const { return require(dof_lookup_, name, "DOF"); }
  int marker_index(const std::string& id) const { return require(marker_lookup_, id, "marker"); }
  int segment_index(const std::string& id) const { return require(segment_lookup_, id, "segment"); }

  int parent_of(int segment) const { return parent_[segment]; }
  /// Segments sorted so that parents precede children.
  const std::vector<int>& topological_order() const { return order_; }
  /// First DOF index and DOF count of the joint driving `segment` (0 count when none).
  std::pair<int, int> dof_range(int segment) const { return dof_range_[segment]; }
  int marker_segment(int marker) const { return marker_segment_[marker]; }

  ScaleParams unit_scale() const { return {Eigen::VectorXd::Ones(segment_count())}; }
  MarkerOffsets zero_offsets(double radius = 0.05) const { return {Eigen::Matrix3Xd::Zero(3, marker_count()), radius}; }
  JointAngles zero_pose() const { return JointAngles::Zero(dof_count()); }

  /// Projects θ into the box of joint limits.
  JointAngles clamp(const JointAngles& theta) const {
    check_theta(theta);
    return theta.cwiseMax(lower_limits()).cwiseMin(upper_limits());
  }

  void check_theta(const JointAngles& theta) const {
    if (theta.size() != dof_count())
      throw ContractError("joint angle vector has " + std::to_string(theta.size()) + " entries, model has " +
                          std::to_string(dof_count()) + " DOFs");
  }

 private:
  template <class Map>
  static std::optional<int> find(const Map& m, const std::string& key) {
    auto it = m.find(key);
    if (it == m.end()) return std::nullopt;
    return it->second;
  }
  template <class Map>
  static int require(const Map& m, const std::string& key, const char* what) {
    auto it = m.find(key);
    if (it == m.end()) throw ContractError(std::string("unknown ") + what + " '" + key + "'");
    return it->second;
  }

  void index() {
    for (int i = 0; i < segment_count(); ++i) {
      if (!segment_lookup_.emplace(segments_[i].id, i).second)
        throw ContractError("duplicate segment id '" + segments_[i].id + "'");
      if (!segments_[i].neutral_offset.allFinite())
        throw ContractError("segment '" + segments_[i].id + "' has a non-finite neutral offset");
    }
    parent_.assign(segment_count(), -1);
    int roots = 0;
    for (int i = 0; i < segment_count(); ++i) {
      if (segments_[i].parent.empty()) {
        ++roots;
        continue;
      }
      auto it = segment_lookup_.find(segments_[i].parent);
      if (it == segment_lookup_.end())
        throw ContractError("segment '" + segments_[i].id + "' references unknown parent '" + segments_[i].parent + "'");
      parent_[i] = it->second;
    }
    if (segment_count() > 0 && roots != 1) throw ContractError("segment graph must have exactly one root");

    // Kahn-style ordering also detects cycles.
    std::vector<int> depth(segment_count(), -1);
    for (int i = 0; i < segment_count(); ++i) {
      int d = 0;
      int cur = i;
      while (parent_[cur] >= 0) {
        cur = parent_[cur];
        if (++d > segment_count()) throw ContractError("segment graph contains a cycle");
      }
      depth[i] = d;
    }
    order_.resize(segment_count());
    for (int i = 0; i < segment_count(); ++i) order_[i] = i;
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) { return depth[a] < depth[b]; });

    std::vector<int> joint_of(segment_count(), -1);
    for (int j = 0; j < static_cast<int>(joints_.size()); ++j) {
      const int s = require(segment_lookup_, joints_[j].segment, "segment");
      if (joint_of[s] >= 0) throw ContractError("segment '" + joints_[j].segment + "' has two joints");
      joint_of[s] = j;
      for (const auto& d : joints_[j].dofs) {
        if (std::abs(d.axis.norm() - 1.0) > 1e-9) throw ContractError("DOF '" + d.name + "' axis is not unit length");
        if (!(d.min < d.max)) throw ContractError("DOF '" + d.name + "' has min >= max");
      }
    }
    dof_range_.assign(segment_count(), {0, 0});
    for (int s = 0; s < segment_count(); ++s) {
      const int start = static_cast<int>(dofs_.size());
      if (joint_of[s] >= 0) {
        for (const auto& d : joints_[joint_of[s]].dofs) {
          if (!dof_lookup_.emplace(d.name, static_cast<int>(dofs_.size())).second)
            throw ContractError("duplicate DOF name '" + d.name + "'");
          dofs_.push_back(d);
        }
      }
      dof_range_[s] = {start, static_cast<int>(dofs_.size()) - start};
    }
    for (int m = 0; m < marker_count(); ++m) {
      if (!marker_lookup_.emplace(markers_[m].id, m).second)
        throw ContractError("duplicate marker id '" + markers_[m].id + "'");
      marker_segment_.push_back(require(segment_lookup_, markers_[m].segment, "segment"));
    }
  }

  std::vector<SegmentSpec> segments_;
  std::vector<JointSpec> joints_;
  std::vector<MarkerSpec> markers_;
  std::vector<Dof> dofs_;
  std::vector<int> parent_;
  std::vector<int> order_;
  std::vector<std::pair<int, int>> dof_range_;
  std::vector<int> marker_segment_;
  std::map<std::string, int> segment_lookup_;
  std::map<std::string, int> dof_lookup_;
  std::map<std::string, int> marker_lookup_;
};

// ---- default upper-body chain ------------------------------------------

/// Seated upper body: 6-DOF trunk root plus, per arm, a 3-DOF shoulder
/// (flexion, abduction, internal rotation), 2-DOF elbow (flexion, pronation)
/// and 2-DOF wrist (flexion, deviation).
///
/// DOF order: trunk_tx, trunk_ty, trunk_tz, trunk_flexion, trunk_lateral,
/// trunk_rotation, then for each arm (right before left) shoulder_flexion_s,
/// shoulder_abduction_s, shoulder_rotation_s, elbow_flexion_s, pronation_s,
/// wrist_flexion_s, wrist_deviation_s with s in {r, l}.
inline BodyModel build_default_upper_body(Side side = Side::Right) {
  std::vector<SegmentSpec> segments;
  std::vector<JointSpec> joints;
  std::vector<MarkerSpec> markers;

  segments.push_back({"trunk", "", Vec3(0.0, 0.0, 0.60), true});
  joints.push_back({"trunk",
                    {{"trunk_tx", Vec3::UnitX(), DofKind::Translation, -0.3, 0.3},
                     {"trunk_ty", Vec3::UnitY(), DofKind::Translation, -0.3, 0.3},
                     {"trunk_tz", Vec3::UnitZ(), DofKind::Translation, -0.3, 0.3},
                     {"trunk_flexion", Vec3::UnitY(), DofKind::Rotation, -0.6, 0.8},
                     {"trunk_lateral", Vec3::UnitX(), DofKind::Rotation, -0.6, 0.6},
                     {"trunk_rotation", Vec3::UnitZ(), DofKind::Rotation, -0.8, 0.8}}});
  markers.push_back({"sternum", "trunk", Vec3(0.12, 0.0, 0.38)});
  markers.push_back({"c7", "trunk", Vec3(-0.08, 0.0, 0.52)});
  markers.push_back({"acromion_r", "trunk", Vec3(0.0, -0.19, 0.48)});
  markers.push_back({"acromion_l", "trunk", Vec3(0.0, 0.19, 0.48)});

  auto add_arm = [&](const std::string& s, double mirror) {
    // mirror = +1 for the right arm, -1 for the left (flips y and the
    // sense of abduction / rotation / pronation / deviation).
    const std::string humerus = "humerus_" + s;
    const std::string radius = "radius_" + s;
    const std::string hand = "hand_" + s;
    segments.push_back({humerus, "trunk", Vec3(0.0, -0.18 * mirror, 0.45), true});
    segments.push_back({radius, humerus, Vec3(0.0, 0.0, -0.30), true});
    segments.push_back({hand, radius, Vec3(0.0, 0.0, -0.26), true});
    joints.push_back({humerus,
                      {{"shoulder_flexion_" + s, Vec3(0, -1, 0), DofKind::Rotation, -0.8, 2.8},
                       {"shoulder_abduction_" + s, Vec3(-mirror, 0, 0), DofKind::Rotation, -0.5, 2.0},
                       {"shoulder_rotation_" + s, Vec3(0, 0, mirror), DofKind::Rotation, -1.2, 1.4}}});
    joints.push_back({radius,
                      {{"elbow_flexion_" + s, Vec3(0, -1, 0), DofKind::Rotation, -0.2, 2.7},
                       {"pronation_" + s, Vec3(0, 0, mirror), DofKind::Rotation, -1.6, 1.6}}});
    joints.push_back({hand,
                      {{"wrist_flexion_" + s, Vec3(0, -1, 0), DofKind::Rotation, -1.2, 1.2},
                       {"wrist_deviation_" + s, Vec3(-mirror, 0, 0), DofKind::Rotation, -0.6, 0.6}}});
    markers.push_back({"elbow_lat_" + s, humerus, Vec3(0.0, -0.045 * mirror, -0.29)});
    markers.push_back({"elbow_med_" + s, humerus, Vec3(0.0, 0.045 * mirror, -0.29)});
    markers.push_back({"wrist_rad_" + s, radius, Vec3(0.0, -0.035 * mirror, -0.25)});
    markers.push_back({"wrist_uln_" + s, radius, Vec3(0.0, 0.035 * mirror, -0.25)});
    markers.push_back({"hand_" + s, hand, Vec3(0.01, 0.0, -0.08)});
    markers.push_back({"mcp2_" + s, hand, Vec3(0.015, -0.035 * mirror, -0.085)});
    markers.push_back({"mcp5_" + s, hand, Vec3(0.01, 0.035 * mirror, -0.075)});
  };
  if (side == Side::Right || side == Side::Bilateral) add_arm("r", 1.0);
  if (side == Side::Left || side == Side::Bilateral) add_arm("l", -1.0);
  return BodyModel(std::move(segments), std::move(joints), std::move(markers));
}

// ---- forward kinematics --------------------------------------------------

template <class T>
using Vec3Of = std::array<T, 3>;

namespace detail {

// Row-major 3x3 rotation.
template <class S>
using Rot3 = std::array<S, 9>;

template <class S>
Rot3<S> identity_rotation() {
  return {S(1.0), S(0.0), S(0.0), S(0.0), S(1.0), S(0.0), S(0.0), S(0.0), S(1.0)};
}

template <class S>
Vec3Of<S> rotate(const Rot3<S>& r, const Vec3Of<S>& v) {
  return {r[0] * v[0] + r[1] * v[1] + r[2] * v[2], r[3] * v[0] + r[4] * v[1] + r[5] * v[2],
          r[6] * v[0] + r[7] * v[1] + r[8] * v[2]};
}

inline int principal_axis(const Vec3& axis, double& sign) {
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    if (axis[j] == 0.0 && axis[k] == 0.0) {
      sign = axis[i] > 0 ? 1.0 : -1.0;
      return i;
    }
  }
  return -1;
}

/// r <- r * Rot(axis, q), intrinsic.
template <class S>
void post_rotate(Rot3<S>& r, const Vec3& axis, const S& q) {
  using std::cos;
  using std::sin;
  const S c = cos(q);
  double sign = 1.0;
  const int p = principal_axis(axis, sign);
  const S s = sin(q) * sign;
  if (p >= 0) {
    // columns (a, b) mix; the axis column is unchanged
    static constexpr int pairs[3][2] = {{1, 2}, {2, 0}, {0, 1}};
    const int a = pairs[p][0], b = pairs[p][1];
    for (int row = 0; row < 3; ++row) {
      const S ra = r[row * 3 + a];
      const S rb = r[row * 3 + b];
      r[row * 3 + a] = c * ra + s * rb;
      r[row * 3 + b] = c * rb - s * ra;
    }
    return;
  }
  // Rodrigues: Rot = c I + s [k]x + (1 - c) k k^T
  const double kx = axis[0], ky = axis[1], kz = axis[2];
  const std::array<double, 9> kk = {kx * kx, kx * ky, kx * kz, ky * kx, ky * ky, ky * kz, kz * kx, kz * ky, kz * kz};
  const std::array<double, 9> kc = {0, -kz, ky, kz, 0, -kx, -ky, kx, 0};
  const S omc = 1.0 - c;
  Rot3<S> m;
  for (int i = 0; i < 9; ++i) m[i] = (i % 4 == 0 ? c : S(0.0)) + s * kc[i] + omc * kk[i];
  Rot3<S> out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i * 3 + j] = r[i * 3] * m[j] + r[i * 3 + 1] * m[3 + j] + r[i * 3 + 2] * m[6 + j];
  r = out;
}

}  // namespace detail

/// Generic forward kinematics.
///
/// `scale` has one entry per segment, `offsets` one entry per marker and
/// `theta` one entry per DOF. Returns world marker positions in model order.
/// S is double, or a folded autodiff/jet scalar (see num.hpp).
template <class S>
std::vector<Vec3Of<S>> forward_kinematics_generic(const BodyModel& model, std::span<const S> scale,
                                                  std::span<const Vec3Of<S>> offsets, std::span<const S> theta) {
  if (static_cast<int>(theta.size()) != model.dof_count()) throw ContractError("forward_kinematics: θ size mismatch");
  if (static_cast<int>(scale.size()) != model.segment_count())
    throw ContractError("forward_kinematics: scale size mismatch");
  if (static_cast<int>(offsets.size()) != model.marker_count())
    throw ContractError("forward_kinematics: offset count mismatch");

  const int ns = model.segment_count();
  std::vector<detail::Rot3<S>> rot(ns);
  std::vector<Vec3Of<S>> pos(ns);
  for (int seg : model.topological_order()) {
    const auto& spec = model.segments()[seg];
    const int parent = model.parent_of(seg);
    detail::Rot3<S> r;
    Vec3Of<S> p;
    if (parent < 0) {
      r = detail::identity_rotation<S>();
      p = {S(spec.neutral_offset[0]), S(spec.neutral_offset[1]), S(spec.neutral_offset[2])};
    } else {
      r = rot[parent];
      const Vec3Of<S> local = {scale[parent] * spec.neutral_offset[0], scale[parent] * spec.neutral_offset[1],
                               scale[parent] * spec.neutral_offset[2]};
      const Vec3Of<S> w = detail::rotate(r, local);
      p = {pos[parent][0] + w[0], pos[parent][1] + w[1], pos[parent][2] + w[2]};
    }
    const auto [first, count] = model.dof_range(seg);
    for (int k = 0; k < count; ++k) {
      const Dof& dof = model.dofs()[first + k];
      const S& q = theta[first + k];
      if (dof.kind == DofKind::Translation) {
        const Vec3Of<S> ax = {S(dof.axis[0]), S(dof.axis[1]), S(dof.axis[2])};
        const Vec3Of<S> w = detail::rotate(r, ax);
        for (int i = 0; i < 3; ++i) p[i] = p[i] + w[i] * q;
      } else {
        detail::post_rotate(r, dof.axis, q);
      }
    }
    rot[seg] = r;
    pos[seg] = p;
  }

  std::vector<Vec3Of<S>> out(model.marker_count());
  for (int m = 0; m < model.marker_count(); ++m) {
    const int seg = model.marker_segment(m);
    const Vec3& lo = model.markers()[m].local_offset;
    const Vec3Of<S> local = {(offsets[m][0] + lo[0]) * scale[seg], (offsets[m][1] + lo[1]) * scale[seg],
                             (offsets[m][2] + lo[2]) * scale[seg]};
    const Vec3Of<S> w = detail::rotate(rot[seg], local);
    out[m] = {pos[seg][0] + w[0], pos[seg][1] + w[1], pos[seg][2] + w[2]};
  }
  return out;
}

/// Marker positions for a single pose.
inline MarkerCloud forward_kinematics(const BodyModel& model, const ScaleParams& scale, const MarkerOffsets& offsets,
                                      const JointAngles& theta) {
  model.check_theta(theta);
  if (scale.values.size() != model.segment_count()) throw ContractError("scale vector size mismatch");
  if (offsets.values.cols() != model.marker_count()) throw ContractError("marker offset count mismatch");
  for (Eigen::Index i = 0; i < scale.values.size(); ++i)
    if (!(scale.values[i] > 0.0)) throw ContractError("scale factors must be strictly positive");
  std::vector<double> s(scale.values.data(), scale.values.data() + scale.values.size());
  std::vector<double> q(theta.data(), theta.data() + theta.size());
  std::vector<Vec3Of<double>> off(model.marker_count());
  for (int m = 0; m < model.marker_count(); ++m)
    off[m] = {offsets.values(0, m), offsets.values(1, m), offsets.values(2, m)};
  const auto pts = forward_kinematics_generic<double>(model, s, off, q);
  MarkerCloud cloud{Eigen::Matrix3Xd(3, model.marker_count())};
  for (int m = 0; m < model.marker_count(); ++m) cloud.positions.col(m) = Vec3(pts[m][0], pts[m][1], pts[m][2]);
  return cloud;
}

// ---- serialization -------------------------------------------------------

namespace detail {
inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v[0], v[1], v[2]}); }
inline Vec3 json_vec(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ContractError(what + " must be an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}
}  // namespace detail

inline constexpr const char* kModelSchema = "mmcfit.model/1";

inline nlohmann::json model_to_json(const BodyModel& model) {
  using nlohmann::json;
  json j;
  j["schema"] = kModelSchema;
  j["segments"] = json::array();
  for (const auto& s : model.segments()) {
    j["segments"].push_back({{"id", s.id},
                             {"parent", s.parent.empty() ? json(nullptr) : json(s.parent)},
                             {"neutral_offset", detail::vec_json(s.neutral_offset)},
                             {"scalable", s.scalable}});
  }
  j["joints"] = json::array();
  for (const auto& jt : model.joints()) {
    json dofs = json::array();
    for (const auto& d : jt.dofs) {
      dofs.push_back({{"name", d.name},
                      {"axis", detail::vec_json(d.axis)},
                      {"kind", d.kind == DofKind::Rotation ? "rotation" : "translation"},
                      {"limits", json::array({d.min, d.max})}});
    }
    j["joints"].push_back({{"segment", jt.segment}, {"dofs", dofs}});
  }
  j["markers"] = json::array();
  for (const auto& m : model.markers())
    j["markers"].push_back({{"id", m.id}, {"segment", m.segment}, {"local_offset", detail::vec_json(m.local_offset)}});
  j["dof_order"] = model.dof_names();
  return j;
}

inline BodyModel model_from_json(const nlohmann::json& j) {
  try {
    std::vector<SegmentSpec> segments;
    for (const auto& s : j.at("segments")) {
      SegmentSpec spec;
      spec.id = s.at("id").get<std::string>();
      spec.parent = s.at("parent").is_null() ? std::string() : s.at("parent").get<std::string>();
      spec.neutral_offset = detail::json_vec(s.at("neutral_offset"), "neutral_offset");
      spec.scalable = s.value("scalable", true);
      segments.push_back(std::move(spec));
    }
    std::vector<JointSpec> joints;
    for (const auto& jt : j.at("joints")) {
      JointSpec spec;
      spec.segment = jt.at("segment").get<std::string>();
      for (const auto& d : jt.at("dofs")) {
        Dof dof;
        dof.name = d.at("name").get<std::string>();
        dof.axis = detail::json_vec(d.at("axis"), "axis");
        const std::string kind = d.at("kind").get<std::string>();
        if (kind == "rotation") {
          dof.kind = DofKind::Rotation;
        } else if (kind == "translation") {
          dof.kind = DofKind::Translation;
        } else {
          throw ContractError("unknown DOF kind '" + kind + "'");
        }
        dof.min = d.at("limits").at(0).get<double>();
        dof.max = d.at("limits").at(1).get<double>();
        spec.dofs.push_back(std::move(dof));
      }
      joints.push_back(std::move(spec));
    }
    std::vector<MarkerSpec> markers;
    for (const auto& m : j.at("markers"))
      markers.push_back({m.at("id").get<std::string>(), m.at("segment").get<std::string>(),
                         detail::json_vec(m.at("local_offset"), "local_offset")});
    BodyModel model(std::move(segments), std::move(joints), std::move(markers));
    if (j.contains("dof_order") && j.at("dof_order").get<std::vector<std::string>>() != model.dof_names())
      throw ContractError("dof_order does not match the DOFs implied by joints");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("invalid model document: ") + e.what());
  }
}

}  // namespace mmc
