#pragma once

// Batch stages behind the command line tool. Every stage reads and writes
// files under one workspace directory:
//
//   calibration.json  model.json
//   keypoints/<trial>/<camera>.csv   markers/<trial>.csv
//   fits/{mmc,omc,truth}.json        trajectories/<system>/<trial>.csv
//   measures.csv  alignment.csv      report/{table1,table2,table3}.tsv, report/measure_pairs.csv

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mmcfit/io.hpp"
#include "mmcfit/ik_end_to_end.hpp"
#include "mmcfit/ik_two_stage.hpp"
#include "mmcfit/log.hpp"
#include "mmcfit/synthetic.hpp"

namespace mmc::pipeline {

namespace fs = std::filesystem;

/// A required input that does not exist. The record names the path.
class MissingInputError : public ContractError {
 public:
  MissingInputError(const std::string& what, const fs::path& path)
      : ContractError(what + " '" + path.string() + "' does not exist"), path_(path.string()) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// No trials survived to the requested stage.
class NoTrialsError : public std::runtime_error {
 public:
  explicit NoTrialsError(const std::string& what) : std::runtime_error("no trials: " + what) {}
};

struct SynthOptions {
  int participants = 1;
  int trials = 3;  // per participant; arms alternate affected / unaffected
  NoiseSpec noise{1.0, 0.05, {}, 0.7, 1.0, 0.0005};
  int cameras = 5;
  double video_rate = 60.0;
  double marker_rate = 100.0;
};

struct PipelineConfig {
  fs::path output = "mmcfit-run";
  std::optional<fs::path> calibration, keypoints, markers, model;
  FitConfig fit;
  SynthOptions synth;
  double max_lag_s = 0.25;
  double measure_rate = 60.0;
  std::string reference = "omc";  // or "truth" on synthetic data
  std::string arm_side = "r";
  int jobs = 1;
  std::uint64_t seed = 0;

  fs::path calibration_path() const { return calibration.value_or(output / "calibration.json"); }
  fs::path keypoint_dir() const { return keypoints.value_or(output / "keypoints"); }
  fs::path marker_dir() const { return markers.value_or(output / "markers"); }
  fs::path model_path() const { return model.value_or(output / "model.json"); }
  fs::path fit_path(const std::string& system) const { return output / "fits" / (system + ".json"); }
  fs::path trajectory_dir(const std::string& system) const { return output / "trajectories" / system; }
  fs::path measures_path() const { return output / "measures.csv"; }
  fs::path alignment_path() const { return output / "alignment.csv"; }
  fs::path report_dir() const { return output / "report"; }
};

/// Applies a JSON configuration document over `cfg`. Recognized keys:
/// fit (see fit_config_from_json), synth, compare {max_lag, reference},
/// measures {rate}, paths {calibration, keypoints, markers, model}, jobs, seed, arm_side.
inline void apply_config(PipelineConfig& cfg, const nlohmann::json& j) {
  try {
    if (j.contains("seed")) {
      cfg.seed = j.at("seed").get<std::uint64_t>();
      cfg.fit.seed = cfg.seed;
    }
    if (j.contains("fit")) cfg.fit = fit_config_from_json(j.at("fit"), cfg.fit);
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      cfg.synth.participants = s.value("participants", cfg.synth.participants);
      cfg.synth.trials = s.value("trials", cfg.synth.trials);
      cfg.synth.cameras = s.value("cameras", cfg.synth.cameras);
      cfg.synth.video_rate = s.value("video_rate", cfg.synth.video_rate);
      cfg.synth.marker_rate = s.value("marker_rate", cfg.synth.marker_rate);
      cfg.synth.noise.pixel_sigma = s.value("pixel_sigma", cfg.synth.noise.pixel_sigma);
      cfg.synth.noise.dropout = s.value("dropout", cfg.synth.noise.dropout);
      if (s.contains("camera_dropout")) cfg.synth.noise.camera_dropout = s.at("camera_dropout").get<std::vector<double>>();
      cfg.synth.noise.marker_sigma = s.value("marker_sigma", cfg.synth.noise.marker_sigma);
      cfg.synth.noise.confidence_lo = s.value("confidence_lo", cfg.synth.noise.confidence_lo);
      cfg.synth.noise.confidence_hi = s.value("confidence_hi", cfg.synth.noise.confidence_hi);
    }
    if (j.contains("compare")) {
      cfg.max_lag_s = j.at("compare").value("max_lag", cfg.max_lag_s);
      cfg.reference = j.at("compare").value("reference", cfg.reference);
    }
    if (j.contains("measures")) cfg.measure_rate = j.at("measures").value("rate", cfg.measure_rate);
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      for (auto [key, slot] : {std::pair{"calibration", &cfg.calibration}, std::pair{"keypoints", &cfg.keypoints},
                               std::pair{"markers", &cfg.markers}, std::pair{"model", &cfg.model}})
        if (p.contains(key)) *slot = fs::path(p.at(key).get<std::string>());
    }
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.arm_side = j.value("arm_side", cfg.arm_side);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("invalid configuration: ") + e.what());
  }
}

// ---- helpers ------------------------------------------------------------------------

/// Runs f(i) for i in [0, n) on up to `jobs` threads. The first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline BodyModel load_model(const PipelineConfig& cfg) {
  const fs::path p = cfg.model_path();
  if (!fs::exists(p)) throw MissingInputError("model file", p);
  return model_from_json(io::read_json(p));
}

inline CameraRig load_rig(const PipelineConfig& cfg) {
  const fs::path p = cfg.calibration_path();
  if (!fs::exists(p)) throw MissingInputError("calibration file", p);
  return rig_from_json(io::read_json(p));
}

inline io::FitDocument load_fit(const PipelineConfig& cfg, const BodyModel& model, const std::string& system) {
  const fs::path p = cfg.fit_path(system);
  if (!fs::exists(p)) throw MissingInputError("fit document", p);
  return io::fit_from_json(io::read_json(p), model);
}

inline std::string participant_id(int p) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "p%02d", p + 1);
  return buf;
}

inline std::string trial_id(int p, int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%02d_t%02d", p + 1, t + 1);
  return buf;
}

// ---- synth ----------------------------------------------------------------------------

inline void run_synth(const PipelineConfig& cfg) {
  const BodyModel model = build_default_upper_body(Side::Right);
  SyntheticScenario sc;
  sc.seed = cfg.seed;
  sc.video_rate = cfg.synth.video_rate;
  sc.marker_rate = cfg.synth.marker_rate;
  sc.noise = cfg.synth.noise;
  sc.rig.n_cameras = cfg.synth.cameras;
  sc.validate();
  if (cfg.synth.participants < 1 || cfg.synth.trials < 1) throw ContractError("synth needs at least one participant and trial");
  const CameraRig rig = make_rig(sc.rig);
  io::write_json(cfg.calibration_path(), rig_to_json(rig));
  io::write_json(cfg.model_path(), model_to_json(model));

  struct Job {
    int p, t;
  };
  std::vector<Job> jobs;
  for (int p = 0; p < cfg.synth.participants; ++p)
    for (int t = 0; t < cfg.synth.trials; ++t) jobs.push_back({p, t});
  std::vector<io::FitDocument::Trial> truth(jobs.size());
  std::vector<GroundTruth> gts(jobs.size());

  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const auto [p, t] = jobs[i];
    const std::string id = trial_id(p, t);
    const std::string arm = t % 2 == 0 ? "affected" : "unaffected";
    const GroundTruth gt = generate_trajectory(model, sc, p, t);
    const std::uint64_t stream = static_cast<std::uint64_t>(p) * 1000 + static_cast<std::uint64_t>(t);
    TrialObservations obs = render_observations(model, gt, rig, sc.noise, sc.video_rate, sc.seed * 7919 + stream, id);
    obs.participant = participant_id(p);
    obs.arm = arm;
    io::write_trial_keypoints(cfg.keypoint_dir(), model, rig, obs);
    Marker3DTrial mk = render_markers(model, gt, sc.noise, sc.marker_rate, sc.seed * 7919 + stream, id);
    mk.participant = obs.participant;
    mk.arm = arm;
    io::write_text(cfg.marker_dir() / (id + ".csv"), io::markers_to_string(model, mk));
    truth[i] = {id, obs.participant, arm, sc.video_rate, gt.theta_at(sc.video_rate)};
    gts[i] = gt;
    DeriveOptions dopt;
    dopt.arm_suffix = cfg.arm_side;
    io::write_text(cfg.trajectory_dir("truth") / (id + ".csv"),
                   io::trajectory_to_string(truth_series(model, gt, sc.video_rate, dopt)));
  });

  io::FitDocument doc = io::make_fit_document(model, "truth");
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    doc.trials.push_back(truth[i]);
    doc.scale[truth[i].participant] = gts[i].scale;
    doc.offsets[truth[i].participant] = gts[i].offsets;
  }
  io::write_json(cfg.fit_path("truth"), io::fit_to_json(doc));
  log_info("synth: wrote " + std::to_string(jobs.size()) + " trials to " + cfg.output.string());
}

// ---- fitting --------------------------------------------------------------------------

template <class T>
std::map<std::string, std::vector<T>> by_participant(std::vector<T> trials) {
  std::map<std::string, std::vector<T>> out;
  for (auto& t : trials) out[t.participant].push_back(std::move(t));
  return out;
}

inline io::FitDocument run_fit_mmc(const PipelineConfig& cfg) {
  const CameraRig rig = load_rig(cfg);
  const BodyModel model = load_model(cfg);
  if (!fs::is_directory(cfg.keypoint_dir())) throw MissingInputError("keypoint directory", cfg.keypoint_dir());
  const auto trials = io::read_keypoint_dir(cfg.keypoint_dir(), model, rig);
  if (trials.empty()) throw NoTrialsError("no keypoint trials under '" + cfg.keypoint_dir().string() + "'");
  const auto groups = by_participant(trials);
  std::vector<std::string> ids;
  for (const auto& [p, g] : groups) ids.push_back(p);

  std::vector<SessionFit> fits(ids.size());
  parallel_for(ids.size(), cfg.jobs, [&](std::size_t i) {
    log_info("fit-mmc: participant " + ids[i] + " (" + std::to_string(groups.at(ids[i]).size()) + " trials)");
    fits[i] = fit_end_to_end(model, rig, groups.at(ids[i]), cfg.fit);
  });

  io::FitDocument doc = io::make_fit_document(model, "mmc");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const SessionFit& f = fits[i];
    for (const auto& fail : f.failed) doc.failed.push_back(fail);
    if (f.trials.empty()) continue;
    doc.scale[ids[i]] = f.scale;
    doc.offsets[ids[i]] = f.offsets;
    for (const auto& t : f.trials)
      doc.trials.push_back({t.trial_id, t.participant, t.arm, t.rate, t.theta, t.final_loss, t.reprojection_rms_px, 0});
  }
  io::write_json(cfg.fit_path("mmc"), io::fit_to_json(doc));
  return doc;
}

inline io::FitDocument run_fit_omc(const PipelineConfig& cfg) {
  const BodyModel model = load_model(cfg);
  if (!fs::is_directory(cfg.marker_dir())) throw MissingInputError("marker directory", cfg.marker_dir());
  const auto trials = io::read_marker_dir(cfg.marker_dir(), model);
  if (trials.empty()) throw NoTrialsError("no marker trials under '" + cfg.marker_dir().string() + "'");
  const auto groups = by_participant(trials);

  struct Job {
    const Marker3DTrial* trial;
    const Marker3DTrial* static_source;  // first trial of the participant
  };
  std::vector<Job> jobs;
  for (const auto& [p, g] : groups)
    for (const auto& t : g) jobs.push_back({&t, &g.front()});

  TwoStageOptions opt;
  opt.static_window_s = cfg.fit.static_window_s;
  opt.offset_radius = cfg.fit.loss.offset_radius;
  std::vector<std::optional<TwoStageResult>> results(jobs.size());
  std::vector<std::string> reasons(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const Marker3DTrial& src = *jobs[i].static_source;
    const int nwin = std::clamp(static_cast<int>(std::lround(opt.static_window_s * src.rate)), 1, src.frame_count());
    try {
      results[i] = fit_two_stage(model, src.window(0, nwin), *jobs[i].trial, opt);
    } catch (const ScalingError& e) {
      reasons[i] = e.what();
    } catch (const ContractError& e) {
      reasons[i] = e.what();
    }
  });

  io::FitDocument doc = io::make_fit_document(model, "omc");
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Marker3DTrial& t = *jobs[i].trial;
    if (!results[i]) {
      log_warning("trial '" + t.trial_id + "' failed: " + reasons[i]);
      doc.failed.push_back({t.trial_id, t.participant, t.arm, reasons[i]});
      continue;
    }
    const TwoStageResult& r = *results[i];
    doc.scale[t.participant] = r.scale;
    doc.offsets[t.participant] = r.offsets;
    Eigen::MatrixXd theta(model.dof_count(), static_cast<Eigen::Index>(r.theta.size()));
    for (std::size_t f = 0; f < r.theta.size(); ++f) theta.col(static_cast<Eigen::Index>(f)) = r.theta[f];
    const int flagged = static_cast<int>(std::count(r.flagged.begin(), r.flagged.end(), true));
    doc.trials.push_back({t.trial_id, t.participant, t.arm, r.rate, theta, std::numeric_limits<double>::quiet_NaN(),
                          r.marker_rmse_m.mean(), flagged});
  }
  io::write_json(cfg.fit_path("omc"), io::fit_to_json(doc));
  return doc;
}

// ---- derive ---------------------------------------------------------------------------

inline std::vector<Eigen::Matrix3Xd> fitted_markers(const BodyModel& model, const ScaleParams& scale,
                                                    const MarkerOffsets& offsets, const Eigen::MatrixXd& theta) {
  std::vector<Eigen::Matrix3Xd> out;
  out.reserve(theta.cols());
  for (Eigen::Index f = 0; f < theta.cols(); ++f) out.push_back(forward_kinematics(model, scale, offsets, theta.col(f)).positions);
  return out;
}

/// Writes trajectories/<system>/ from fits/<system>.json. Returns the number of trials written.
inline std::size_t run_derive_system(const PipelineConfig& cfg, const BodyModel& model, const std::string& system) {
  const io::FitDocument doc = load_fit(cfg, model, system);
  DeriveOptions opt;
  opt.arm_suffix = cfg.arm_side;
  std::vector<std::string> errors(doc.trials.size());
  parallel_for(doc.trials.size(), cfg.jobs, [&](std::size_t i) {
    const auto& t = doc.trials[i];
    try {
      const auto markers = fitted_markers(model, doc.scale.at(t.participant), doc.offsets.at(t.participant), t.theta);
      io::write_text(cfg.trajectory_dir(system) / (t.trial_id + ".csv"),
                     io::trajectory_to_string(derive_channels(model, t.theta, markers, t.rate, opt)));
    } catch (const ContractError& e) {
      errors[i] = e.what();
    }
  });
  std::size_t n = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i].empty())
      ++n;
    else
      log_warning("derive " + system + " trial '" + doc.trials[i].trial_id + "': " + errors[i]);
  }
  return n;
}

inline void run_derive(const PipelineConfig& cfg) {
  const BodyModel model = load_model(cfg);
  std::size_t total = 0;
  bool any = false;
  for (const char* system : {"mmc", "omc", "truth"}) {
    if (!fs::exists(cfg.fit_path(system))) continue;
    any = true;
    total += run_derive_system(cfg, model, system);
  }
  if (!any) throw MissingInputError("fit documents under", cfg.output / "fits");
  if (total == 0) throw NoTrialsError("no fitted trials to derive");
}

// ---- measures and comparison -----------------------------------------------------------

inline std::map<std::string, fs::path> trajectory_files(const PipelineConfig& cfg, const std::string& system) {
  std::map<std::string, fs::path> out;
  const fs::path dir = cfg.trajectory_dir(system);
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") out[e.path().stem().string()] = e.path();
  return out;
}

/// Derives trajectories for `system` when only its fit document exists.
inline void ensure_trajectories(const PipelineConfig& cfg, const std::string& system) {
  if (!trajectory_files(cfg, system).empty() || !fs::exists(cfg.fit_path(system))) return;
  const BodyModel model = load_model(cfg);
  run_derive_system(cfg, model, system);
}

inline std::map<std::string, std::pair<std::string, std::string>> trial_labels(const PipelineConfig& cfg) {
  // participant and arm per trial, read from whichever fit documents exist
  std::map<std::string, std::pair<std::string, std::string>> out;
  for (const char* system : {"truth", "omc", "mmc"}) {
    const fs::path p = cfg.fit_path(system);
    if (!fs::exists(p)) continue;
    const auto j = io::read_json(p);
    for (const auto& t : j.value("trials", nlohmann::json::array()))
      out[t.at("trial_id").get<std::string>()] = {t.at("participant").get<std::string>(), t.at("arm").get<std::string>()};
  }
  return out;
}

inline std::vector<MeasureRow> run_measures(const PipelineConfig& cfg) {
  ensure_trajectories(cfg, "mmc");
  ensure_trajectories(cfg, cfg.reference);
  const auto a = trajectory_files(cfg, "mmc");
  const auto b = trajectory_files(cfg, cfg.reference);
  const auto labels = trial_labels(cfg);
  std::vector<std::string> ids;
  for (const auto& [id, p] : a)
    if (b.count(id)) ids.push_back(id);
  if (ids.empty()) throw NoTrialsError("no trials with both mmc and " + cfg.reference + " trajectories");

  std::vector<std::optional<std::pair<MeasureRow, MeasureRow>>> rows(ids.size());
  parallel_for(ids.size(), cfg.jobs, [&](std::size_t i) {
    const std::string& id = ids[i];
    const auto [participant, arm] = labels.count(id) ? labels.at(id) : std::pair<std::string, std::string>{"p00", "affected"};
    try {
      TrajectorySeries sa = resample(io::read_trajectory(a.at(id)), cfg.measure_rate);
      TrajectorySeries sb = resample(io::read_trajectory(b.at(id)), cfg.measure_rate);
      // resampled lengths can differ by a sample; both systems share the reference segmentation
      const Eigen::Index n = std::min(sa.length(), sb.length());
      for (auto* s : {&sa, &sb})
        for (auto& [c, v] : s->channels) v.conservativeResize(n);
      const PhaseSegmentation seg = classify_phases(sb.channel(ChannelId::EndEffectorVelocity), sb.rate);
      rows[i] = std::pair{MeasureRow{id, participant, arm, "mmc", compute_measures(sa, seg)},
                          MeasureRow{id, participant, arm, cfg.reference, compute_measures(sb, seg)}};
    } catch (const SegmentationError& e) {
      log_warning("measures trial '" + id + "': " + e.what());
    } catch (const ContractError& e) {
      log_warning("measures trial '" + id + "': " + e.what());
    }
  });
  std::vector<MeasureRow> out;
  for (const auto& r : rows)
    if (r) {
      out.push_back(r->first);
      out.push_back(r->second);
    }
  if (out.empty()) throw NoTrialsError("measures could not be computed for any trial");
  io::write_text(cfg.measures_path(), io::measures_to_string(out));
  return out;
}

inline std::vector<TrialAlignment> run_compare(const PipelineConfig& cfg) {
  ensure_trajectories(cfg, "mmc");
  ensure_trajectories(cfg, cfg.reference);
  const auto a = trajectory_files(cfg, "mmc");
  const auto b = trajectory_files(cfg, cfg.reference);
  const auto labels = trial_labels(cfg);
  std::vector<std::string> ids;
  for (const auto& [id, p] : a)
    if (b.count(id)) ids.push_back(id);
  if (ids.empty()) throw NoTrialsError("no trials with both mmc and " + cfg.reference + " trajectories");

  std::vector<std::vector<TrialAlignment>> per(ids.size());
  parallel_for(ids.size(), cfg.jobs, [&](std::size_t i) {
    const std::string& id = ids[i];
    const auto [participant, arm] = labels.count(id) ? labels.at(id) : std::pair<std::string, std::string>{"p00", "affected"};
    try {
      for (const auto& r : compare_series(io::read_trajectory(a.at(id)), io::read_trajectory(b.at(id)), cfg.max_lag_s))
        per[i].push_back({id, participant, arm, r});
    } catch (const AlignmentError& e) {
      log_warning("compare trial '" + id + "': " + e.what());
    } catch (const ContractError& e) {
      log_warning("compare trial '" + id + "': " + e.what());
    }
  });
  std::vector<TrialAlignment> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  if (out.empty()) throw NoTrialsError("no trial could be aligned");
  io::write_text(cfg.alignment_path(), io::alignments_to_string(out));
  return out;
}

// ---- report -----------------------------------------------------------------------------

inline void run_report(const PipelineConfig& cfg) {
  if (!fs::exists(cfg.alignment_path())) throw NoTrialsError("'" + cfg.alignment_path().string() + "' does not exist");
  const auto alignments = io::parse_alignments(io::read_table(cfg.alignment_path(), io::kAlignmentSchema));
  if (alignments.empty()) throw NoTrialsError("'" + cfg.alignment_path().string() + "' holds no rows");

  const AggregateReport rep = aggregate(alignments);
  std::ostringstream t1, t2, t3, pairs;
  write_table1(t1, rep);
  write_table2(t2, rep);
  std::vector<MeasureRow> measures;
  if (fs::exists(cfg.measures_path()))
    measures = io::parse_measures(io::read_table(cfg.measures_path(), io::kMeasureSchema));
  else
    log_warning("no measures file; movement-quality correlations are reported as NA");
  const CorrelationReport corr = measure_correlations(measures);
  write_table3(t3, corr);
  write_measure_pairs(pairs, corr);
  io::write_text(cfg.report_dir() / "table1.tsv", t1.str());
  io::write_text(cfg.report_dir() / "table2.tsv", t2.str());
  io::write_text(cfg.report_dir() / "table3.tsv", t3.str());
  io::write_text(cfg.report_dir() / "measure_pairs.csv", pairs.str());
}

// ---- error records -------------------------------------------------------------------

/// Machine-readable failure description written to stderr by the tool.
inline nlohmann::json error_record(const std::string& command, const std::exception& e) {
  nlohmann::json j;
  j["command"] = command;
  j["message"] = e.what();
  std::string type = "Error";
  int code = 1;
  if (const auto* p = dynamic_cast<const ParseError*>(&e)) {
    type = "ParseError";
    code = 3;
    j["path"] = p->path();
    j["line"] = p->line();
    j["column"] = p->column();
  } else if (const auto* m = dynamic_cast<const MissingInputError*>(&e)) {
    type = "MissingInput";
    code = 2;
    j["path"] = m->path();
  } else if (dynamic_cast<const NoTrialsError*>(&e)) {
    type = "NoTrials";
    code = 4;
  } else if (dynamic_cast<const ContractError*>(&e)) {
    type = "InvalidInput";
    code = 2;
  } else if (const auto* nf = dynamic_cast<const NonFiniteError*>(&e)) {
    type = "NonFinite";
    j["primitive"] = nf->primitive();
  }
  j["error"] = type;
  j["exit_code"] = code;
  return j;
}

}  // namespace mmc::pipeline
