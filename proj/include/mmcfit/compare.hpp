#pragma once

// Agreement statistics between two systems' trajectories: bias removal,
// lag search, RMSE / Pearson, and aggregation into table layouts.
//
// Lag sign: a positive lag means `b` is delayed relative to `a`, i.e. a[i]
// lines up with b[i + lag].

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "mmcfit/errors.hpp"
#include "mmcfit/kinematics.hpp"
#include "mmcfit/log.hpp"
#include "mmcfit/measures.hpp"

namespace mmc {

struct BiasResult {
  double bias = 0.0;
  Eigen::VectorXd b_adjusted;
};

/// bias = mean(a) - mean(b); b_adjusted = b + bias.
inline BiasResult static_bias(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ContractError("static_bias: length mismatch");
  if (a.size() == 0) throw ContractError("static_bias: empty series");
  BiasResult r;
  r.bias = a.mean() - b.mean();
  r.b_adjusted = b.array() + r.bias;
  return r;
}

struct LagResult {
  int lag_samples = 0;
  double rmse = 0.0;  // at the returned lag, over the overlap
};

namespace detail {

struct Overlap {
  Eigen::Index a0, b0, n;
};

inline Overlap overlap_at(Eigen::Index len, int lag) {
  const Eigen::Index a0 = std::max<Eigen::Index>(0, -lag);
  const Eigen::Index b0 = a0 + lag;
  return {a0, b0, len - std::abs(lag)};
}

inline double rmse_at(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int lag, bool demean) {
  const Overlap o = overlap_at(a.size(), lag);
  Eigen::ArrayXd d = a.segment(o.a0, o.n).array() - b.segment(o.b0, o.n).array();
  if (demean) d -= d.mean();
  return std::sqrt(d.square().mean());
}

}  // namespace detail

/// Integer-sample grid search over [-max_lag, max_lag]. With `demean` the
/// residual mean is removed per shift, making the search independent of the
/// residual bias on each overlap.
inline LagResult align_lag(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rate, double max_lag_s = 0.25,
                           bool demean = false) {
  if (a.size() != b.size()) throw ContractError("align_lag: length mismatch");
  if (!(rate > 0.0) || !(max_lag_s >= 0.0)) throw ContractError("align_lag: invalid rate or max lag");
  const Eigen::Index n = a.size();
  const int max_k = static_cast<int>(std::floor(max_lag_s * rate + 1e-9));
  LagResult best{0, std::numeric_limits<double>::infinity()};
  bool any = false;
  // visit 0, -1, +1, -2, +2, ... so strict improvement implements the tie rule
  for (int m = 0; m <= 2 * max_k; ++m) {
    const int k = m == 0 ? 0 : (m % 2 == 1 ? -(m + 1) / 2 : m / 2);
    if (2 * (n - std::abs(k)) < n) continue;
    if (n - std::abs(k) < 1) continue;
    const double e = detail::rmse_at(a, b, k, demean);
    if (!any || e < best.rmse) {
      best = {k, e};
      any = true;
    }
  }
  if (!any) throw AlignmentError("align_lag: overlap shorter than 50% of the signal at every lag");
  return best;
}

struct Agreement {
  double rmse = 0.0;
  double r = std::numeric_limits<double>::quiet_NaN();
};

inline Agreement agreement(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ContractError("agreement: length mismatch");
  if (a.size() < 3) throw ContractError("agreement: need at least 3 samples");
  Agreement g;
  g.rmse = std::sqrt((a - b).array().square().mean());
  g.r = pearson(a, b);
  return g;
}

struct AlignmentResult {
  ChannelId channel = ChannelId::ShoulderFlexion;
  double bias = 0.0;
  double lag_s = 0.0;
  int lag_samples = 0;
  double rmse = 0.0;
  double r = std::numeric_limits<double>::quiet_NaN();
};

/// Full pipeline for one channel: bias over the whole trial, lag search,
/// then bias, RMSE and r over the aligned overlap.
inline AlignmentResult compare_channel(ChannelId channel, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                       double rate, double max_lag_s = 0.25) {
  const Eigen::Index n = std::min(a.size(), b.size());
  const Eigen::VectorXd aa = a.head(n), bb = b.head(n);
  const BiasResult br = static_bias(aa, bb);
  const LagResult lag = align_lag(aa, br.b_adjusted, rate, max_lag_s, true);
  const detail::Overlap o = detail::overlap_at(n, lag.lag_samples);
  const Eigen::VectorXd as = aa.segment(o.a0, o.n);
  const Eigen::VectorXd bs = bb.segment(o.b0, o.n);
  AlignmentResult r;
  r.channel = channel;
  r.bias = (as - bs).mean();
  r.lag_samples = lag.lag_samples;
  r.lag_s = lag.lag_samples / rate;
  const Agreement g = agreement(as, Eigen::VectorXd(bs.array() + r.bias));
  r.rmse = g.rmse;
  r.r = g.r;
  return r;
}

/// Compares every channel present in both series. `b` is resampled to a's rate first.
inline std::vector<AlignmentResult> compare_series(const TrajectorySeries& a, const TrajectorySeries& b,
                                                   double max_lag_s = 0.25) {
  const TrajectorySeries bb = resample(b, a.rate);
  std::vector<AlignmentResult> out;
  for (ChannelId c : kAllChannels) {
    auto ia = a.channels.find(c);
    auto ib = bb.channels.find(c);
    if (ia == a.channels.end() || ib == bb.channels.end()) continue;
    out.push_back(compare_channel(c, ia->second, ib->second, a.rate, max_lag_s));
  }
  return out;
}

// ---- aggregation ----------------------------------------------------------------

/// Linear-interpolation quantile (h = (n-1) p). NaNs are ignored.
inline double quantile(std::vector<double> v, double p) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto i = static_cast<std::size_t>(h);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (h - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

struct Summary {
  double median = std::numeric_limits<double>::quiet_NaN();
  double q25 = std::numeric_limits<double>::quiet_NaN();
  double q75 = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  for (double x : v)
    if (!std::isnan(x)) ++s.n;
  s.median = quantile(v, 0.5);
  s.q25 = quantile(v, 0.25);
  s.q75 = quantile(v, 0.75);
  return s;
}

inline std::string format_summary(const Summary& s) {
  if (s.n == 0) return "NA";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.2f [%.2f, %.2f]", s.median, s.q25, s.q75);
  return buf;
}

inline std::string format_fixed2(double v) {
  if (std::isnan(v)) return "NA";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct TrialAlignment {
  std::string trial_id;
  std::string participant;
  std::string arm;  // "affected" | "unaffected"
  AlignmentResult result;
};

enum class Metric { R, Rmse, Bias, Lag };

inline double metric_of(const AlignmentResult& a, Metric m) {
  switch (m) {
    case Metric::R: return a.r;
    case Metric::Rmse: return a.rmse;
    case Metric::Bias: return a.bias;
    case Metric::Lag: return a.lag_s;
  }
  return 0.0;
}

struct AggregateReport {
  // (channel, arm) -> metric -> summary
  std::map<std::pair<ChannelId, std::string>, std::map<Metric, Summary>> table1;
  // (channel, arm) -> mean over participants of the within-participant bias IQR
  std::map<std::pair<ChannelId, std::string>, double> table2;
};

inline AggregateReport aggregate(const std::vector<TrialAlignment>& trials) {
  std::map<std::pair<ChannelId, std::string>, std::vector<const TrialAlignment*>> groups;
  for (const auto& t : trials) groups[{t.result.channel, t.arm}].push_back(&t);
  AggregateReport rep;
  for (ChannelId c : kAllChannels)
    for (const char* arm : {"unaffected", "affected"}) {
      auto it = groups.find({c, arm});
      if (it == groups.end() || it->second.empty()) {
        log_warning("aggregate: no trials for " + channel_name(c) + " / " + arm);
        continue;
      }
      auto& row = rep.table1[{c, arm}];
      for (Metric m : {Metric::R, Metric::Rmse, Metric::Bias, Metric::Lag}) {
        std::vector<double> v;
        for (const auto* t : it->second) v.push_back(metric_of(t->result, m));
        row[m] = summarize(v);
      }
      std::map<std::string, std::vector<double>> by_participant;
      for (const auto* t : it->second) by_participant[t->participant].push_back(t->result.bias);
      double sum = 0.0;
      int count = 0;
      for (const auto& [p, b] : by_participant) {
        sum += quantile(b, 0.75) - quantile(b, 0.25);
        ++count;
      }
      rep.table2[{c, arm}] = sum / count;
    }
  return rep;
}

/// Row labels in table order; elbow extension is reported from the elbow flexion channel.
inline std::vector<std::pair<ChannelId, std::string>> table_channel_rows() {
  return {{ChannelId::EndEffectorVelocity, "End-Effector Velocity"},
          {ChannelId::ElbowAngularVelocity, "Elbow Angular Velocity"},
          {ChannelId::ElbowFlexion, "Elbow Extension"},
          {ChannelId::ShoulderFlexion, "Shoulder Flexion"},
          {ChannelId::ShoulderAbduction, "Shoulder Abduction"},
          {ChannelId::TrunkDisplacement, "Trunk Displacement"}};
}

inline constexpr const char* kTable1Schema = "mmcfit.table1/1";
inline constexpr const char* kTable2Schema = "mmcfit.table2/1";
inline constexpr const char* kTable3Schema = "mmcfit.table3/1";
inline constexpr const char* kPlotSchema = "mmcfit.measure_pairs/1";

inline void write_table1(std::ostream& os, const AggregateReport& rep) {
  os << "# schema: " << kTable1Schema << "\n";
  os << "channel\tmetric\tunaffected\taffected\n";
  const std::vector<std::pair<Metric, const char*>> metrics{
      {Metric::R, "r"}, {Metric::Rmse, "RMSE"}, {Metric::Bias, "Bias"}, {Metric::Lag, "Time Lag"}};
  for (const auto& [c, label] : table_channel_rows())
    for (const auto& [m, mname] : metrics) {
      os << label << '\t' << mname;
      for (const char* arm : {"unaffected", "affected"}) {
        auto it = rep.table1.find({c, arm});
        os << '\t' << (it == rep.table1.end() ? std::string("NA") : format_summary(it->second.at(m)));
      }
      os << "\n";
    }
}

inline void write_table2(std::ostream& os, const AggregateReport& rep) {
  os << "# schema: " << kTable2Schema << "\n";
  os << "channel\tunaffected\taffected\n";
  for (const auto& [c, label] : table_channel_rows()) {
    os << label;
    for (const char* arm : {"unaffected", "affected"}) {
      auto it = rep.table2.find({c, arm});
      os << '\t' << (it == rep.table2.end() ? std::string("NA") : format_fixed2(it->second));
    }
    os << "\n";
  }
}

// ---- measure correlations -----------------------------------------------------------

struct MeasureRow {
  std::string trial_id;
  std::string participant;
  std::string arm;
  std::string system;  // "mmc" | "omc"
  MeasureSet measures;
};

struct MeasureCorrelation {
  std::string measure;  // row label in the correlation table
  int column = 0;       // index into kMeasureColumns
  double r_s = std::numeric_limits<double>::quiet_NaN();
  double r_av = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_trials = 0;
  std::size_t n_groups = 0;
};

struct MeasurePair {
  std::string measure;
  std::string trial_id;
  std::string participant;
  std::string arm;
  double mmc = 0.0;
  double omc = 0.0;
};

/// Correlation table rows mapped onto measure columns.
inline std::vector<std::pair<std::string, int>> table3_rows() {
  return {{"PV", 2},
          {"Elbow angular PV", 3},
          {"Time to PV", 4},
          {"Time to first PV", 5},
          {"Number of movement units", 1},
          {"Total movement time", 0},
          {"Interjoint coordination", 11},
          {"Trunk displacement", 8},
          {"Shoulder flexion", 9},
          {"Elbow extension", 6},
          {"Shoulder abduction", 7},
          {"Shoulder flexion D", 10}};
}

inline double pearson_or_missing(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  return pearson(Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size())),
                 Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size())));
}

struct CorrelationReport {
  std::vector<MeasureCorrelation> rows;
  std::vector<MeasurePair> pairs;
};

/// Pairs rows by trial id across systems; r_s over trials, r_av over
/// participant x arm means. Fewer than 3 pairs leaves r missing.
inline CorrelationReport measure_correlations(const std::vector<MeasureRow>& rows) {
  std::map<std::string, const MeasureRow*> mmc, omc;
  for (const auto& r : rows) {
    // the reference column holds OMC rows, or ground truth on synthetic data
    auto& dst = r.system == "mmc" ? mmc : omc;
    if (r.system != "mmc" && r.system != "omc" && r.system != "truth")
      throw ContractError("unknown system '" + r.system + "'");
    if (!dst.emplace(r.trial_id, &r).second)
      throw ContractError("duplicate measure row for trial '" + r.trial_id + "' (" + r.system + ")");
  }
  CorrelationReport rep;
  for (const auto& [label, col] : table3_rows()) {
    MeasureCorrelation mc;
    mc.measure = label;
    mc.column = col;
    std::vector<double> xs, ys;
    std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& [id, m] : mmc) {
      auto it = omc.find(id);
      if (it == omc.end()) continue;
      const double x = measure_values(m->measures)[col];
      const double y = measure_values(it->second->measures)[col];
      if (std::isnan(x) || std::isnan(y)) continue;
      xs.push_back(x);
      ys.push_back(y);
      auto& g = groups[{m->participant, m->arm}];
      g.first.push_back(x);
      g.second.push_back(y);
      rep.pairs.push_back({label, id, m->participant, m->arm, x, y});
    }
    mc.n_trials = xs.size();
    mc.r_s = pearson_or_missing(xs, ys);
    std::vector<double> ax, ay;
    for (const auto& [k, g] : groups) {
      ax.push_back(Eigen::Map<const Eigen::VectorXd>(g.first.data(), static_cast<Eigen::Index>(g.first.size())).mean());
      ay.push_back(Eigen::Map<const Eigen::VectorXd>(g.second.data(), static_cast<Eigen::Index>(g.second.size())).mean());
    }
    mc.n_groups = ax.size();
    mc.r_av = pearson_or_missing(ax, ay);
    rep.rows.push_back(mc);
  }
  return rep;
}

inline void write_table3(std::ostream& os, const CorrelationReport& rep) {
  os << "# schema: " << kTable3Schema << "\n";
  os << "measure\tr_s\tr_av\n";
  for (const auto& r : rep.rows) os << r.measure << '\t' << format_fixed2(r.r_s) << '\t' << format_fixed2(r.r_av) << "\n";
}

inline void write_measure_pairs(std::ostream& os, const CorrelationReport& rep) {
  os << "# schema: " << kPlotSchema << "\n";
  os << "measure,trial_id,participant,arm,mmc,omc\n";
  for (const auto& p : rep.pairs)
    os << p.measure << ',' << p.trial_id << ',' << p.participant << ',' << p.arm << ',' << format_double(p.mmc) << ','
       << format_double(p.omc) << "\n";
}

}  // namespace mmc
