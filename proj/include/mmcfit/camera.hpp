#pragma once

// Calibrated pinhole cameras with Brown-Conrady distortion, projection and
// confidence-weighted linear triangulation.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmcfit/errors.hpp"
#include "mmcfit/model.hpp"
#include "mmcfit/num.hpp"

namespace mmc {

struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  // k1, k2, p1, p2, k3
  std::array<double, 5> dist{0, 0, 0, 0, 0};
};

/// World -> camera transform: x_cam = rotation * x_world + translation.
struct CameraExtrinsics {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 center() const { return -rotation.transpose() * translation; }
};

struct Camera {
  std::string id;
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
  int width = 1920;
  int height = 1080;
};

struct Observation2D {
  double u = std::numeric_limits<double>::quiet_NaN();
  double v = std::numeric_limits<double>::quiet_NaN();
  double confidence = 0.0;

  bool missing(double floor = 0.0) const { return !(confidence > 0.0) || confidence < floor || !std::isfinite(u) || !std::isfinite(v); }
};

inline void validate_camera(const Camera& cam) {
  const auto& k = cam.intrinsics;
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw ContractError("camera '" + cam.id + "': focal lengths must be positive");
  if (cam.width <= 0 || cam.height <= 0) throw ContractError("camera '" + cam.id + "': image size must be positive");
  const Eigen::Matrix3d& r = cam.extrinsics.rotation;
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() >= 1e-9 || r.determinant() <= 0.0)
    throw ContractError("camera '" + cam.id + "': rotation is not a proper orthonormal matrix");
}

class CameraRig {
 public:
  CameraRig() = default;
  explicit CameraRig(std::vector<Camera> cameras) : cameras_(std::move(cameras)) {
    std::set<std::string> ids;
    for (const auto& c : cameras_) {
      validate_camera(c);
      if (!ids.insert(c.id).second) throw ContractError("duplicate camera id '" + c.id + "'");
    }
  }
  const std::vector<Camera>& cameras() const { return cameras_; }
  std::size_t size() const { return cameras_.size(); }
  const Camera& operator[](std::size_t i) const { return cameras_[i]; }

 private:
  std::vector<Camera> cameras_;
};

// ---- distortion ----------------------------------------------------------

/// Applies radial-tangential distortion to normalized image coordinates.
template <class S>
std::array<S, 2> distort(const std::array<double, 5>& d, const S& x, const S& y) {
  const S r2 = x * x + y * y;
  const S r4 = r2 * r2;
  const S r6 = r4 * r2;
  const S radial = 1.0 + d[0] * r2 + d[1] * r4 + d[4] * r6;
  const S xy = x * y;
  const S xd = x * radial + 2.0 * d[2] * xy + d[3] * (r2 + 2.0 * x * x);
  const S yd = y * radial + d[2] * (r2 + 2.0 * y * y) + 2.0 * d[3] * xy;
  return {xd, yd};
}

/// Inverts `distort` by fixed-point iteration (at most 20 iterations, tol 1e-12).
inline Eigen::Vector2d undistort(const std::array<double, 5>& d, double xd, double yd) {
  double x = xd, y = yd;
  for (int it = 0; it < 20; ++it) {
    const double r2 = x * x + y * y;
    const double radial = 1.0 + d[0] * r2 + d[1] * r2 * r2 + d[4] * r2 * r2 * r2;
    const double dx = 2.0 * d[2] * x * y + d[3] * (r2 + 2.0 * x * x);
    const double dy = d[2] * (r2 + 2.0 * y * y) + 2.0 * d[3] * x * y;
    const double nx = (xd - dx) / radial;
    const double ny = (yd - dy) / radial;
    const double step = std::hypot(nx - x, ny - y);
    x = nx;
    y = ny;
    if (step < 1e-12) break;
  }
  return {x, y};
}

/// Pixel -> undistorted normalized coordinates.
inline Eigen::Vector2d pixel_to_normalized(const CameraIntrinsics& k, double u, double v) {
  return undistort(k.dist, (u - k.cx) / k.fx, (v - k.cy) / k.fy);
}

// ---- projection ----------------------------------------------------------

/// Generic projection of a world point; S is double or a folded AD scalar.
template <class S>
std::array<S, 2> project_generic(const CameraIntrinsics& k, const CameraExtrinsics& e, const Vec3Of<S>& p) {
  const Eigen::Matrix3d& r = e.rotation;
  const S xc = r(0, 0) * p[0] + r(0, 1) * p[1] + r(0, 2) * p[2] + e.translation[0];
  const S yc = r(1, 0) * p[0] + r(1, 1) * p[1] + r(1, 2) * p[2] + e.translation[1];
  const S zc = r(2, 0) * p[0] + r(2, 1) * p[1] + r(2, 2) * p[2] + e.translation[2];
  if (!(smallest_value(zc) > 0.0)) throw BehindCameraError("point has non-positive depth in camera frame");
  const S x = xc / zc;
  const S y = yc / zc;
  const auto [xd, yd] = distort<S>(k.dist, x, y);
  return {k.fx * xd + k.cx, k.fy * yd + k.cy};
}

inline Eigen::Vector2d project(const CameraIntrinsics& k, const CameraExtrinsics& e, const Vec3& point) {
  const auto uv = project_generic<double>(k, e, {point[0], point[1], point[2]});
  return {uv[0], uv[1]};
}

inline Eigen::Vector2d project(const Camera& cam, const Vec3& point) {
  return project(cam.intrinsics, cam.extrinsics, point);
}

// ---- triangulation -------------------------------------------------------

struct TriangulationOptions {
  int min_cameras = 2;
  double confidence_floor = 0.3;
};

struct Triangulated {
  Vec3 point = Vec3::Zero();
  double residual_rms_px = 0.0;
  int cameras_used = 0;
};

/// Confidence-weighted linear least squares on undistorted normalized rays.
/// Each usable view contributes two rows (x r3 - r1) X = x t3 - t1 and
/// (y r3 - r2) X = y t3 - t2, weighted by confidence^2.
inline Triangulated triangulate(const CameraRig& rig, const std::vector<Observation2D>& obs,
                                const TriangulationOptions& opt = {}) {
  if (obs.size() != rig.size()) throw ContractError("triangulate: one observation per camera required");
  std::vector<int> used;
  for (std::size_t c = 0; c < obs.size(); ++c)
    if (!obs[c].missing(opt.confidence_floor)) used.push_back(static_cast<int>(c));
  const int need = std::max(opt.min_cameras, 2);
  if (static_cast<int>(used.size()) < need)
    throw UnderdeterminedError("triangulate: " + std::to_string(used.size()) + " usable views, need " +
                               std::to_string(need));

  double wmax = 0.0;
  for (int c : used) wmax = std::max(wmax, obs[c].confidence * obs[c].confidence);
  Eigen::MatrixXd a(2 * used.size(), 3);
  Eigen::VectorXd b(2 * used.size());
  for (std::size_t i = 0; i < used.size(); ++i) {
    const Camera& cam = rig[used[i]];
    const Eigen::Vector2d n = pixel_to_normalized(cam.intrinsics, obs[used[i]].u, obs[used[i]].v);
    const Eigen::Matrix3d& r = cam.extrinsics.rotation;
    const Vec3& t = cam.extrinsics.translation;
    // normalise weights so the result does not depend on their absolute level
    const double w = obs[used[i]].confidence * obs[used[i]].confidence / wmax;
    a.row(2 * i) = w * (n.x() * r.row(2) - r.row(0));
    b[2 * i] = w * (t.x() - n.x() * t.z());
    a.row(2 * i + 1) = w * (n.y() * r.row(2) - r.row(1));
    b[2 * i + 1] = w * (t.y() - n.y() * t.z());
  }
  Triangulated out;
  out.point = a.colPivHouseholderQr().solve(b);
  out.cameras_used = static_cast<int>(used.size());
  double ss = 0.0;
  for (int c : used) {
    const Vec3 pc = rig[c].extrinsics.rotation * out.point + rig[c].extrinsics.translation;
    if (pc.z() <= 0.0) {
      ss = std::numeric_limits<double>::infinity();
      break;
    }
    const Eigen::Vector2d uv = project(rig[c], out.point);
    ss += (uv - Eigen::Vector2d(obs[c].u, obs[c].v)).squaredNorm();
  }
  out.residual_rms_px = std::sqrt(ss / static_cast<double>(used.size()));
  return out;
}

// ---- calibration file -----------------------------------------------------

inline constexpr const char* kCalibrationSchema = "mmcfit.calibration/1";

inline nlohmann::json rig_to_json(const CameraRig& rig) {
  using nlohmann::json;
  json j;
  j["schema"] = kCalibrationSchema;
  j["units"] = "meters";
  j["cameras"] = json::array();
  for (const auto& c : rig.cameras()) {
    json r = json::array();
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) r.push_back(c.extrinsics.rotation(i, k));
    j["cameras"].push_back({{"id", c.id},
                            {"image_size", {c.width, c.height}},
                            {"K", {c.intrinsics.fx, c.intrinsics.fy, c.intrinsics.cx, c.intrinsics.cy}},
                            {"dist", c.intrinsics.dist},
                            {"R", r},
                            {"t", {c.extrinsics.translation[0], c.extrinsics.translation[1], c.extrinsics.translation[2]}}});
  }
  return j;
}

inline CameraRig rig_from_json(const nlohmann::json& j) {
  try {
    std::vector<Camera> cams;
    for (const auto& c : j.at("cameras")) {
      Camera cam;
      cam.id = c.at("id").get<std::string>();
      const auto size = c.at("image_size").get<std::vector<int>>();
      if (size.size() != 2) throw ContractError("image_size must be [w, h]");
      cam.width = size[0];
      cam.height = size[1];
      const auto k = c.at("K").get<std::vector<double>>();
      if (k.size() != 4) throw ContractError("K must be [fx, fy, cx, cy]");
      cam.intrinsics.fx = k[0];
      cam.intrinsics.fy = k[1];
      cam.intrinsics.cx = k[2];
      cam.intrinsics.cy = k[3];
      const auto d = c.at("dist").get<std::vector<double>>();
      if (d.size() != 5) throw ContractError("dist must have 5 coefficients");
      std::copy(d.begin(), d.end(), cam.intrinsics.dist.begin());
      const auto r = c.at("R").get<std::vector<double>>();
      if (r.size() != 9) throw ContractError("R must have 9 entries (row-major)");
      for (int i = 0; i < 3; ++i)
        for (int m = 0; m < 3; ++m) cam.extrinsics.rotation(i, m) = r[i * 3 + m];
      const auto t = c.at("t").get<std::vector<double>>();
      if (t.size() != 3) throw ContractError("t must have 3 entries");
      cam.extrinsics.translation = Vec3(t[0], t[1], t[2]);
      cams.push_back(std::move(cam));
    }
    return CameraRig(std::move(cams));
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("invalid calibration document: ") + e.what());
  }
}

/// Camera at `center` looking at `target` with the image y axis pointing down.
inline CameraExtrinsics look_at(const Vec3& center, const Vec3& target, const Vec3& up = Vec3::UnitZ()) {
  const Vec3 z = (target - center).normalized();
  const Vec3 x = z.cross(up).normalized();
  const Vec3 y = z.cross(x);
  CameraExtrinsics e;
  e.rotation.row(0) = x.transpose();
  e.rotation.row(1) = y.transpose();
  e.rotation.row(2) = z.transpose();
  e.translation = -e.rotation * center;
  return e;
}

}  // namespace mmc
