#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mmcfit/camera.hpp"
#include "mmcfit/errors.hpp"
#include "mmcfit/model.hpp"

namespace mmc {

/// One camera's 2D keypoints for a trial. Rows are model markers, columns frames.
/// Missing entries hold NaN pixels and zero confidence.
struct CameraTrack {
  Eigen::MatrixXd u;
  Eigen::MatrixXd v;
  Eigen::MatrixXd confidence;

  static CameraTrack empty(int markers, int frames) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {Eigen::MatrixXd::Constant(markers, frames, nan), Eigen::MatrixXd::Constant(markers, frames, nan),
            Eigen::MatrixXd::Zero(markers, frames)};
  }
};

struct TrialObservations {
  std::string trial_id;
  std::string participant = "p00";
  std::string arm = "affected";
  double rate = 60.0;
  int frames = 0;
  std::vector<CameraTrack> cameras;  // rig order

  double duration() const { return frames / rate; }

  Observation2D at(std::size_t camera, int marker, int frame) const {
    const CameraTrack& c = cameras[camera];
    return {c.u(marker, frame), c.v(marker, frame), c.confidence(marker, frame)};
  }

  void validate(const BodyModel& model, const CameraRig& rig) const {
    if (!(rate > 0.0)) throw ContractError("trial '" + trial_id + "': rate must be positive");
    if (cameras.size() != rig.size())
      throw ContractError("trial '" + trial_id + "': has " + std::to_string(cameras.size()) + " camera tracks, rig has " +
                          std::to_string(rig.size()));
    for (const auto& c : cameras) {
      for (const Eigen::MatrixXd* m : {&c.u, &c.v, &c.confidence})
        if (m->rows() != model.marker_count() || m->cols() != frames)
          throw ContractError("trial '" + trial_id + "': camera track shape does not match markers x frames");
      if ((c.confidence.array() < 0.0).any() || (c.confidence.array() > 1.0).any())
        throw ContractError("trial '" + trial_id + "': confidence outside [0,1]");
    }
  }
};

/// Per-frame 3D marker positions (columns in model marker order, NaN = missing).
struct Marker3DTrial {
  std::string trial_id;
  std::string participant = "p00";
  std::string arm = "affected";
  double rate = 100.0;
  std::vector<Eigen::Matrix3Xd> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  double duration() const { return frame_count() / rate; }

  Marker3DTrial window(int first, int count) const {
    if (first < 0 || count < 0 || first + count > frame_count()) throw ContractError("marker window out of range");
    Marker3DTrial out{trial_id, participant, arm, rate, {}};
    out.frames.assign(frames.begin() + first, frames.begin() + first + count);
    return out;
  }

  bool complete() const {
    for (const auto& f : frames)
      if (!f.allFinite()) return false;
    return true;
  }
};

}  // namespace mmc
