#pragma once

// Drinking-task phase segmentation, movement units and the movement-quality
// measure set.
//
// Phases tile [0, N): Reaching starts at frame 0 so the quiet lead-in before
// movement onset is covered, but every timing measure starts at the detected
// onset (`PhaseSegmentation::onset`).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mmcfit/errors.hpp"
#include "mmcfit/kinematics.hpp"

namespace mmc {

enum class Phase { Reaching, Forward, Drinking, Back, Returning, Rest };

inline constexpr std::array<Phase, 6> kPhases{Phase::Reaching, Phase::Forward,   Phase::Drinking,
                                              Phase::Back,     Phase::Returning, Phase::Rest};

inline std::string phase_name(Phase p) {
  switch (p) {
    case Phase::Reaching: return "Reaching";
    case Phase::Forward: return "Forward";
    case Phase::Drinking: return "Drinking";
    case Phase::Back: return "Back";
    case Phase::Returning: return "Returning";
    case Phase::Rest: return "Rest";
  }
  return "?";
}

struct PhaseInterval {
  Phase phase;
  Eigen::Index start;
  Eigen::Index end;  // exclusive
};

struct PhaseSegmentation {
  std::array<PhaseInterval, 6> phases{};
  Eigen::Index onset = 0;  // first frame of the reach movement
  double rate = 60.0;

  const PhaseInterval& operator[](Phase p) const { return phases[static_cast<std::size_t>(p)]; }
  Eigen::Index frames() const { return phases.back().end; }
  Eigen::Index movement_end() const { return (*this)[Phase::Rest].start; }
};

struct PhaseConfig {
  double threshold_fraction = 0.05;
  double dwell_s = 0.1;
  double floor = 0.05;  // m/s
};

namespace detail {

struct Run {
  Eigen::Index begin, end;  // [begin, end)
};

inline Eigen::Index argmax_in(const Eigen::VectorXd& v, Eigen::Index b, Eigen::Index e) {
  Eigen::Index best = b;
  for (Eigen::Index i = b + 1; i < e; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline std::vector<Run> active_runs(const Eigen::VectorXd& v, double thr) {
  std::vector<Run> runs;
  Eigen::Index i = 0;
  const Eigen::Index n = v.size();
  while (i < n) {
    if (v[i] > thr) {
      Eigen::Index j = i;
      while (j < n && v[j] > thr) ++j;
      runs.push_back({i, j});
      i = j;
    } else {
      ++i;
    }
  }
  return runs;
}

// Splits the run whose interior holds the deepest local minimum (relative to
// the smaller flanking peak). Returns false when no run can be split.
inline bool split_deepest(const Eigen::VectorXd& v, std::vector<Run>& runs, Eigen::Index min_len) {
  double best_depth = 0.0;
  std::size_t best_run = 0;
  Eigen::Index best_at = -1;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto [b, e] = runs[r];
    for (Eigen::Index i = b + min_len; i + min_len < e; ++i) {
      if (!(v[i] <= v[i - 1] && v[i] < v[i + 1])) continue;
      const double left = v.segment(b, i - b).maxCoeff();
      const double right = v.segment(i + 1, e - i - 1).maxCoeff();
      const double depth = std::min(left, right) - v[i];
      if (depth > best_depth) {
        best_depth = depth;
        best_run = r;
        best_at = i;
      }
    }
  }
  if (best_at < 0) return false;
  const Run old = runs[best_run];
  runs[best_run] = {old.begin, best_at};
  runs.insert(runs.begin() + static_cast<std::ptrdiff_t>(best_run) + 1, Run{best_at, old.end});
  return true;
}

}  // namespace detail

/// Six drinking-task phases from the end-effector speed.
inline PhaseSegmentation classify_phases(const Eigen::VectorXd& eev, double rate, const PhaseConfig& cfg = {}) {
  const Eigen::Index n = eev.size();
  if (n < 3 || !(rate > 0.0)) throw SegmentationError("velocity profile too short");
  if (!eev.allFinite()) throw SegmentationError("velocity profile contains non-finite samples");
  const double peak = eev.maxCoeff();
  if (!(peak >= cfg.floor)) throw SegmentationError("no drinking cycle found: peak velocity below floor");
  const Eigen::Index dwell = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::lround(cfg.dwell_s * rate)));

  std::vector<detail::Run> runs = detail::active_runs(eev, cfg.threshold_fraction * peak);
  std::vector<detail::Run> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && r.begin - merged.back().end < dwell)
      merged.back().end = r.end;
    else
      merged.push_back(r);
  }
  runs.clear();
  for (const auto& r : merged)
    if (r.end - r.begin >= dwell) runs.push_back(r);
  while (runs.size() < 4)
    if (!detail::split_deepest(eev, runs, 1)) break;
  while (runs.size() > 4) {
    std::size_t g = 0;
    for (std::size_t k = 1; k + 1 < runs.size(); ++k)
      if (runs[k + 1].begin - runs[k].end < runs[g + 1].begin - runs[g].end) g = k;
    runs[g].end = runs[g + 1].end;
    runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(g) + 1);
  }
  if (runs.size() != 4) throw SegmentationError("could not identify four movement bursts");

  // Refine each burst against its own peak, bounded by the neighbouring peaks.
  std::array<Eigen::Index, 4> peaks{}, on{}, off{};
  for (int k = 0; k < 4; ++k) peaks[k] = detail::argmax_in(eev, runs[k].begin, runs[k].end);
  for (int k = 0; k < 4; ++k) {
    const double thr = cfg.threshold_fraction * eev[peaks[k]];
    const Eigen::Index lo = k == 0 ? 0 : peaks[k - 1] + 1;
    const Eigen::Index hi = k == 3 ? n : peaks[k + 1];
    Eigen::Index i = peaks[k];
    while (i > lo && eev[i - 1] > thr) --i;
    on[k] = i;
    Eigen::Index j = peaks[k];
    while (j + 1 < hi && eev[j] > thr) ++j;
    if (eev[j] > thr) j = hi;  // never dropped below the threshold before the next burst
    off[k] = j;
  }
  for (int k = 0; k < 3; ++k)
    if (off[k] > on[k + 1]) off[k] = on[k + 1];

  PhaseSegmentation seg;
  seg.rate = rate;
  seg.onset = on[0];
  const std::array<Eigen::Index, 7> cuts{0, off[0], off[1], on[2], off[2], off[3], n};
  for (std::size_t p = 0; p < 6; ++p) {
    if (cuts[p + 1] < cuts[p] || (p < 5 && cuts[p + 1] == cuts[p]))
      throw SegmentationError("degenerate phase '" + phase_name(kPhases[p]) + "'");
    seg.phases[p] = {kPhases[p], cuts[p], cuts[p + 1]};
  }
  return seg;
}

// ---- movement units ---------------------------------------------------------------

struct MovementUnitConfig {
  double min_prominence = 0.02;  // m/s
  double min_separation_s = 0.15;
};

/// Indices of local maxima passing the separation rule (taller peaks win) and
/// the prominence floor. Plateaus report their middle sample.
inline std::vector<Eigen::Index> movement_unit_peaks(const Eigen::VectorXd& v, double rate,
                                                     const MovementUnitConfig& cfg = {}) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> peaks;
  for (Eigen::Index i = 1; i + 1 < n;) {
    if (v[i] > v[i - 1]) {
      Eigen::Index j = i;
      while (j + 1 < n && v[j + 1] == v[i]) ++j;
      if (j + 1 < n && v[j + 1] < v[i]) {
        peaks.push_back((i + j) / 2);
        i = j + 1;
        continue;
      }
      i = j + 1;
      continue;
    }
    ++i;
  }
  const auto distance = static_cast<Eigen::Index>(std::ceil(cfg.min_separation_s * rate - 1e-9));
  if (distance > 1 && peaks.size() > 1) {
    std::vector<std::size_t> order(peaks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[peaks[a]] > v[peaks[b]]; });
    std::vector<bool> keep(peaks.size(), true);
    for (std::size_t k : order) {
      if (!keep[k]) continue;
      for (std::size_t q = k; q-- > 0 && peaks[k] - peaks[q] < distance;) keep[q] = false;
      for (std::size_t q = k + 1; q < peaks.size() && peaks[q] - peaks[k] < distance; ++q) keep[q] = false;
    }
    std::vector<Eigen::Index> kept;
    for (std::size_t k = 0; k < peaks.size(); ++k)
      if (keep[k]) kept.push_back(peaks[k]);
    peaks.swap(kept);
  }
  std::vector<Eigen::Index> out;
  for (Eigen::Index p : peaks) {
    double left = v[p];
    for (Eigen::Index i = p; i-- > 0 && v[i] <= v[p];) left = std::min(left, v[i]);
    double right = v[p];
    for (Eigen::Index i = p + 1; i < n && v[i] <= v[p]; ++i) right = std::min(right, v[i]);
    if (v[p] - std::max(left, right) >= cfg.min_prominence) out.push_back(p);
  }
  return out;
}

inline int count_movement_units(const Eigen::VectorXd& v, double rate, const MovementUnitConfig& cfg = {}) {
  if (v.size() == 0) throw ContractError("movement-unit segment is empty");
  return static_cast<int>(movement_unit_peaks(v, rate, cfg).size());
}

// ---- measures ---------------------------------------------------------------------------

struct MeasureSet {
  double total_movement_time = 0.0;  // s
  double n_movement_units = 0.0;
  double peak_velocity = 0.0;         // m/s
  double elbow_angular_pv = 0.0;      // deg/s
  double time_to_pv = 0.0;            // s
  double time_to_first_pv = 0.0;      // s
  double max_elbow_extension = 0.0;   // deg, smallest elbow flexion angle while reaching
  double max_shoulder_abduction = 0.0;
  double max_trunk_displacement = 0.0;  // mm
  double max_shoulder_flexion_reach = 0.0;
  double max_shoulder_flexion_drink = 0.0;
  double interjoint_coordination = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr std::array<const char*, 12> kMeasureColumns{
    "total_movement_time_s",    "n_movement_units",         "peak_velocity_m_s",
    "elbow_angular_pv_deg_s",   "time_to_pv_s",             "time_to_first_pv_s",
    "max_elbow_extension_deg",  "max_shoulder_abduction_deg", "max_trunk_displacement_mm",
    "max_shoulder_flexion_reach_deg", "max_shoulder_flexion_drink_deg", "interjoint_coordination"};

inline std::array<double, 12> measure_values(const MeasureSet& m) {
  return {m.total_movement_time,       m.n_movement_units,           m.peak_velocity,
          m.elbow_angular_pv,          m.time_to_pv,                 m.time_to_first_pv,
          m.max_elbow_extension,       m.max_shoulder_abduction,     m.max_trunk_displacement,
          m.max_shoulder_flexion_reach, m.max_shoulder_flexion_drink, m.interjoint_coordination};
}

inline MeasureSet measures_from_values(const std::array<double, 12>& v) {
  MeasureSet m;
  m.total_movement_time = v[0];
  m.n_movement_units = v[1];
  m.peak_velocity = v[2];
  m.elbow_angular_pv = v[3];
  m.time_to_pv = v[4];
  m.time_to_first_pv = v[5];
  m.max_elbow_extension = v[6];
  m.max_shoulder_abduction = v[7];
  m.max_trunk_displacement = v[8];
  m.max_shoulder_flexion_reach = v[9];
  m.max_shoulder_flexion_drink = v[10];
  m.interjoint_coordination = v[11];
  return m;
}

/// Pearson correlation; NaN when either input has zero variance or n < 2.
inline double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) throw ContractError("pearson: length mismatch");
  if (a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double saa = (da * da).sum();
  const double sbb = (db * db).sum();
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp((da * db).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
}

struct MeasureConfig {
  MovementUnitConfig units;
};

inline MeasureSet compute_measures(const TrajectorySeries& series, const PhaseSegmentation& seg,
                                   const MeasureConfig& cfg = {}) {
  const Eigen::VectorXd& v = series.channel(ChannelId::EndEffectorVelocity);
  const Eigen::VectorXd& w = series.channel(ChannelId::ElbowAngularVelocity);
  const Eigen::VectorXd& elbow = series.channel(ChannelId::ElbowFlexion);
  const Eigen::VectorXd& sflex = series.channel(ChannelId::ShoulderFlexion);
  const Eigen::VectorXd& sabd = series.channel(ChannelId::ShoulderAbduction);
  const Eigen::VectorXd& trunk = series.channel(ChannelId::TrunkDisplacement);
  series.validate();
  if (seg.frames() != series.length())
    throw ContractError("segmentation covers " + std::to_string(seg.frames()) + " frames, series has " +
                        std::to_string(series.length()));
  const double rate = series.rate;
  const PhaseInterval reach = seg[Phase::Reaching];
  const PhaseInterval drink = seg[Phase::Drinking];
  const Eigen::Index onset = seg.onset;
  const Eigen::Index end = seg.movement_end();

  MeasureSet m;
  m.total_movement_time = static_cast<double>(end - onset) / rate;
  const Eigen::VectorXd task = v.segment(onset, end - onset);
  const std::vector<Eigen::Index> units = movement_unit_peaks(task, rate, cfg.units);
  m.n_movement_units = static_cast<double>(units.size());

  Eigen::Index pv = reach.start;
  for (Eigen::Index i = reach.start; i < reach.end; ++i)
    if (v[i] > v[pv]) pv = i;
  m.peak_velocity = v[pv];
  m.time_to_pv = static_cast<double>(pv - onset) / rate;
  m.time_to_first_pv = m.time_to_pv;
  for (Eigen::Index u : units) {
    const Eigen::Index at = u + onset;
    if (at < reach.end) {
      m.time_to_first_pv = std::min(m.time_to_pv, static_cast<double>(at - onset) / rate);
      break;
    }
  }
  const Eigen::Index rn = reach.end - reach.start;
  m.elbow_angular_pv = w.segment(reach.start, rn).cwiseAbs().maxCoeff();
  m.max_elbow_extension = elbow.segment(reach.start, rn).minCoeff();
  m.max_shoulder_flexion_reach = sflex.segment(reach.start, rn).maxCoeff();
  m.max_shoulder_flexion_drink = sflex.segment(drink.start, drink.end - drink.start).maxCoeff();
  m.max_shoulder_abduction = sabd.segment(0, seg[Phase::Back].start).maxCoeff();
  m.max_trunk_displacement = trunk.maxCoeff();
  const Eigen::Index cn = reach.end - onset;
  m.interjoint_coordination = pearson(-elbow.segment(onset, cn), sflex.segment(onset, cn));
  return m;
}

}  // namespace mmc
