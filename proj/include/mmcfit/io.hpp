#pragma once

// File formats: keypoints, 3D markers, trajectories, fits, measures and
// alignment rows. Every text file begins with "# schema: <name>/<version>"
// followed by "# key: value" metadata lines and one header row.

#include <Eigen/Dense>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmcfit/camera.hpp"
#include "mmcfit/compare.hpp"
#include "mmcfit/errors.hpp"
#include "mmcfit/ik_end_to_end.hpp"
#include "mmcfit/kinematics.hpp"
#include "mmcfit/measures.hpp"
#include "mmcfit/model.hpp"
#include "mmcfit/observations.hpp"

namespace mmc::io {

namespace fs = std::filesystem;

inline constexpr const char* kKeypointSchema = "mmcfit.keypoints/1";
inline constexpr const char* kMarkerSchema = "mmcfit.markers/1";
inline constexpr const char* kFitSchema = "mmcfit.sessionfit/1";
inline constexpr const char* kMeasureSchema = "mmcfit.measures/1";
inline constexpr const char* kAlignmentSchema = "mmcfit.alignment/1";

// ---- delimited text --------------------------------------------------------------

struct Table {
  std::string path;
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::size_t header_line = 0;
  struct Row {
    std::size_t line;
    std::vector<std::string> cells;
    std::vector<std::size_t> columns;  // 1-based character column of each cell
  };
  std::vector<Row> rows;

  [[noreturn]] void fail(const Row& r, std::size_t cell, const std::string& msg) const {
    throw ParseError(path, r.line, cell < r.columns.size() ? r.columns[cell] : 1, msg);
  }

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ParseError(path, header_line, 1, "missing column '" + name + "'");
  }

  const std::string& require_meta(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw ParseError(path, 1, 1, "missing metadata '" + key + "'");
    return it->second;
  }

  double number(const Row& r, std::size_t cell) const {
    if (cell >= r.cells.size()) fail(r, r.cells.size(), "too few fields");
    const std::string& s = r.cells[cell];
    if (s == "nan" || s == "NaN" || s == "NA") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(r, cell, "not a number: '" + s + "'");
    return v;
  }

  long integer(const Row& r, std::size_t cell) const {
    if (cell >= r.cells.size()) fail(r, r.cells.size(), "too few fields");
    const std::string& s = r.cells[cell];
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(r, cell, "not an integer: '" + s + "'");
    return v;
  }

  const std::string& text(const Row& r, std::size_t cell) const {
    if (cell >= r.cells.size()) fail(r, r.cells.size(), "too few fields");
    return r.cells[cell];
  }
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Table parse_table(std::istream& in, const std::string& path, const std::string& expected_schema,
                         char delim = ',') {
  Table t;
  t.path = path;
  std::string line;
  std::size_t n = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      if (have_header) throw ParseError(path, n, 1, "metadata after the header row");
      const auto colon = line.find(':');
      if (colon == std::string::npos) throw ParseError(path, n, 1, "metadata line without ':'");
      t.meta[trim(line.substr(1, colon - 1))] = trim(line.substr(colon + 1));
      continue;
    }
    Table::Row r{n, {}, {}};
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(delim, start);
      r.cells.push_back(trim(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
      r.columns.push_back(start + 1);
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (!have_header) {
      t.header = r.cells;
      t.header_line = n;
      have_header = true;
    } else {
      if (r.cells.size() != t.header.size())
        throw ParseError(path, n, r.columns.back(),
                         "expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(r.cells.size()));
      t.rows.push_back(std::move(r));
    }
  }
  auto it = t.meta.find("schema");
  if (it == t.meta.end()) throw ParseError(path, 1, 1, "missing schema header");
  if (it->second != expected_schema)
    throw ParseError(path, 1, 1, "schema '" + it->second + "' where '" + expected_schema + "' was expected");
  if (!have_header) throw ParseError(path, n + 1, 1, "missing header row");
  return t;
}

inline Table read_table(const fs::path& path, const std::string& schema, char delim = ',') {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open '" + path.string() + "'");
  return parse_table(in, path.string(), schema, delim);
}

inline void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw ContractError("write failed for '" + path.string() + "'");
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    // nlohmann reports a byte offset; convert to line/column
    std::ifstream again(path);
    std::string all((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < all.size(); ++i) {
      if (all[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(path.string(), line, col, e.what());
  }
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(1) + "\n"); }

// ---- keypoints ------------------------------------------------------------------------

struct TrialMeta {
  std::string trial_id;
  std::string participant;
  std::string arm;
  double rate = 0.0;
  int frames = 0;
};

inline std::string keypoints_to_string(const BodyModel& model, const TrialObservations& t, std::size_t camera,
                                       const std::string& camera_id) {
  std::ostringstream os;
  os << "# schema: " << kKeypointSchema << "\n# trial: " << t.trial_id << "\n# participant: " << t.participant
     << "\n# arm: " << t.arm << "\n# camera: " << camera_id << "\n# rate_hz: " << format_double(t.rate)
     << "\n# frames: " << t.frames << "\nframe,keypoint,u,v,confidence\n";
  for (int f = 0; f < t.frames; ++f)
    for (int m = 0; m < model.marker_count(); ++m) {
      const Observation2D o = t.at(camera, m, f);
      if (o.missing(0.0)) continue;
      os << f << ',' << model.markers()[m].id << ',' << format_double(o.u) << ',' << format_double(o.v) << ','
         << format_double(o.confidence) << "\n";
    }
  return os.str();
}

inline TrialMeta table_trial_meta(const Table& t) {
  TrialMeta m;
  m.trial_id = t.require_meta("trial");
  m.participant = t.meta.count("participant") ? t.meta.at("participant") : "p00";
  m.arm = t.meta.count("arm") ? t.meta.at("arm") : "affected";
  try {
    m.rate = std::stod(t.require_meta("rate_hz"));
    m.frames = std::stoi(t.require_meta("frames"));
  } catch (const std::logic_error&) {
    throw ParseError(t.path, 1, 1, "invalid rate_hz/frames metadata");
  }
  if (!(m.rate > 0.0) || m.frames < 0) throw ParseError(t.path, 1, 1, "rate_hz must be positive, frames non-negative");
  return m;
}

/// Reads one camera's keypoint file into `track` (markers x frames).
inline std::pair<TrialMeta, CameraTrack> parse_keypoints(const Table& t, const BodyModel& model) {
  const TrialMeta meta = table_trial_meta(t);
  CameraTrack tr = CameraTrack::empty(model.marker_count(), meta.frames);
  const std::size_t cf = t.column("frame"), ck = t.column("keypoint"), cu = t.column("u"), cv = t.column("v"),
                    cc = t.column("confidence");
  for (const auto& r : t.rows) {
    const long f = t.integer(r, cf);
    if (f < 0 || f >= meta.frames) t.fail(r, cf, "frame index out of range");
    const auto m = model.find_marker(t.text(r, ck));
    if (!m) t.fail(r, ck, "unknown keypoint '" + t.text(r, ck) + "'");
    const double c = t.number(r, cc);
    if (!(c >= 0.0 && c <= 1.0)) t.fail(r, cc, "confidence outside [0,1]");
    tr.u(*m, f) = t.number(r, cu);
    tr.v(*m, f) = t.number(r, cv);
    tr.confidence(*m, f) = c;
  }
  return {meta, tr};
}

inline fs::path keypoint_path(const fs::path& dir, const std::string& trial, const std::string& camera) {
  return dir / trial / (camera + ".csv");
}

inline void write_trial_keypoints(const fs::path& dir, const BodyModel& model, const CameraRig& rig,
                                  const TrialObservations& t) {
  for (std::size_t c = 0; c < rig.size(); ++c)
    write_text(keypoint_path(dir, t.trial_id, rig[c].id), keypoints_to_string(model, t, c, rig[c].id));
}

/// Reads every trial directory under `dir` (sorted by name): one file per rig camera.
inline std::vector<TrialObservations> read_keypoint_dir(const fs::path& dir, const BodyModel& model,
                                                        const CameraRig& rig) {
  if (!fs::is_directory(dir)) throw ContractError("keypoint directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> trials;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) trials.push_back(e.path());
  std::sort(trials.begin(), trials.end());
  std::vector<TrialObservations> out;
  for (const auto& tdir : trials) {
    TrialObservations obs;
    bool first = true;
    for (std::size_t c = 0; c < rig.size(); ++c) {
      const fs::path p = tdir / (rig[c].id + ".csv");
      if (!fs::exists(p)) throw ContractError("missing keypoint file '" + p.string() + "'");
      auto [meta, track] = parse_keypoints(read_table(p, kKeypointSchema), model);
      if (first) {
        obs.trial_id = meta.trial_id;
        obs.participant = meta.participant;
        obs.arm = meta.arm;
        obs.rate = meta.rate;
        obs.frames = meta.frames;
        first = false;
      } else if (meta.frames != obs.frames || meta.rate != obs.rate || meta.trial_id != obs.trial_id) {
        throw ParseError(p.string(), 1, 1, "camera files of one trial disagree on trial/rate/frames");
      }
      obs.cameras.push_back(std::move(track));
    }
    out.push_back(std::move(obs));
  }
  return out;
}

// ---- 3D markers -----------------------------------------------------------------------

inline std::string markers_to_string(const BodyModel& model, const Marker3DTrial& t) {
  std::ostringstream os;
  os << "# schema: " << kMarkerSchema << "\n# trial: " << t.trial_id << "\n# participant: " << t.participant
     << "\n# arm: " << t.arm << "\n# rate_hz: " << format_double(t.rate) << "\n# frames: " << t.frame_count()
     << "\nframe,marker,x,y,z\n";
  for (int f = 0; f < t.frame_count(); ++f)
    for (int m = 0; m < model.marker_count(); ++m)
      os << f << ',' << model.markers()[m].id << ',' << format_double(t.frames[f](0, m)) << ','
         << format_double(t.frames[f](1, m)) << ',' << format_double(t.frames[f](2, m)) << "\n";
  return os.str();
}

inline Marker3DTrial parse_markers(const Table& t, const BodyModel& model) {
  const TrialMeta meta = table_trial_meta(t);
  Marker3DTrial out;
  out.trial_id = meta.trial_id;
  out.participant = meta.participant;
  out.arm = meta.arm;
  out.rate = meta.rate;
  out.frames.assign(meta.frames, Eigen::Matrix3Xd::Constant(3, model.marker_count(), std::numeric_limits<double>::quiet_NaN()));
  const std::size_t cf = t.column("frame"), cm = t.column("marker"), cx = t.column("x"), cy = t.column("y"),
                    cz = t.column("z");
  for (const auto& r : t.rows) {
    const long f = t.integer(r, cf);
    if (f < 0 || f >= meta.frames) t.fail(r, cf, "frame index out of range");
    const auto m = model.find_marker(t.text(r, cm));
    if (!m) t.fail(r, cm, "unknown marker '" + t.text(r, cm) + "'");
    out.frames[f].col(*m) = Vec3(t.number(r, cx), t.number(r, cy), t.number(r, cz));
  }
  return out;
}

inline std::vector<Marker3DTrial> read_marker_dir(const fs::path& dir, const BodyModel& model) {
  if (!fs::is_directory(dir)) throw ContractError("marker directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Marker3DTrial> out;
  for (const auto& p : files) out.push_back(parse_markers(read_table(p, kMarkerSchema), model));
  return out;
}

// ---- trajectories ------------------------------------------------------------------------

inline std::string trajectory_to_string(const TrajectorySeries& s) {
  std::ostringstream os;
  write_trajectory(os, s);
  return os.str();
}

inline TrajectorySeries parse_trajectory(const Table& t) {
  TrajectorySeries s;
  try {
    s.rate = std::stod(t.require_meta("rate_hz"));
    s.t0 = std::stod(t.require_meta("t0"));
  } catch (const std::logic_error&) {
    throw ParseError(t.path, 1, 1, "invalid rate_hz/t0 metadata");
  }
  if (t.header.empty() || t.header[0] != "time_s") throw ParseError(t.path, t.header_line, 1, "first column must be time_s");
  std::vector<std::pair<ChannelId, std::size_t>> cols;
  for (std::size_t i = 1; i < t.header.size(); ++i) {
    bool found = false;
    for (ChannelId c : kAllChannels)
      if (t.header[i] == channel_name(c) + "_" + channel_unit(c)) {
        cols.emplace_back(c, i);
        found = true;
      }
    if (!found) throw ParseError(t.path, t.header_line, 1, "unknown channel column '" + t.header[i] + "'");
  }
  for (const auto& [c, i] : cols) s.channels[c] = Eigen::VectorXd(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (const auto& [c, i] : cols) s.channels[c][static_cast<Eigen::Index>(r)] = t.number(t.rows[r], i);
  return s;
}

inline TrajectorySeries read_trajectory(const fs::path& p) { return parse_trajectory(read_table(p, kTrajectorySchema)); }

// ---- fits ------------------------------------------------------------------------------------

/// Joint-angle trajectories of one system for a set of trials, plus shared body parameters.
struct FitDocument {
  std::string system;  // "mmc", "omc" or "truth"
  std::vector<std::string> dof_order;
  std::vector<std::string> segment_ids;
  std::vector<std::string> marker_ids;
  // per participant
  std::map<std::string, ScaleParams> scale;
  std::map<std::string, MarkerOffsets> offsets;
  struct Trial {
    std::string trial_id, participant, arm;
    double rate = 60.0;
    Eigen::MatrixXd theta;  // DOF x frames
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();  // px (mmc) or m (omc)
    int flagged_frames = 0;
  };
  std::vector<Trial> trials;
  std::vector<FailedTrial> failed;
};

inline nlohmann::json fit_to_json(const FitDocument& d) {
  using nlohmann::json;
  json j;
  j["schema"] = kFitSchema;
  j["system"] = d.system;
  j["dof_order"] = d.dof_order;
  j["segments"] = d.segment_ids;
  j["markers"] = d.marker_ids;
  j["participants"] = json::object();
  for (const auto& [p, s] : d.scale) {
    json pj;
    pj["scale"] = std::vector<double>(s.values.data(), s.values.data() + s.values.size());
    const auto& o = d.offsets.at(p);
    json off = json::array();
    for (Eigen::Index m = 0; m < o.values.cols(); ++m) off.push_back({o.values(0, m), o.values(1, m), o.values(2, m)});
    pj["offsets"] = off;
    pj["offset_radius"] = o.radius;
    j["participants"][p] = pj;
  }
  j["trials"] = json::array();
  for (const auto& t : d.trials) {
    json tj;
    tj["trial_id"] = t.trial_id;
    tj["participant"] = t.participant;
    tj["arm"] = t.arm;
    tj["rate_hz"] = t.rate;
    tj["frames"] = t.theta.cols();
    tj["final_loss"] = std::isnan(t.final_loss) ? json(nullptr) : json(t.final_loss);
    tj["residual"] = std::isnan(t.residual) ? json(nullptr) : json(t.residual);
    tj["flagged_frames"] = t.flagged_frames;
    json th = json::array();
    for (Eigen::Index f = 0; f < t.theta.cols(); ++f) {
      std::vector<double> col(t.theta.rows());
      for (Eigen::Index i = 0; i < t.theta.rows(); ++i) col[i] = t.theta(i, f);
      th.push_back(col);
    }
    tj["theta"] = th;
    j["trials"].push_back(tj);
  }
  j["failed"] = json::array();
  for (const auto& f : d.failed)
    j["failed"].push_back({{"trial_id", f.trial_id}, {"participant", f.participant}, {"arm", f.arm}, {"reason", f.reason}});
  return j;
}

inline FitDocument fit_from_json(const nlohmann::json& j, const BodyModel& model) {
  try {
    if (j.at("schema").get<std::string>() != kFitSchema) throw ContractError("not a fit document");
    FitDocument d;
    d.system = j.at("system").get<std::string>();
    d.dof_order = j.at("dof_order").get<std::vector<std::string>>();
    if (d.dof_order != model.dof_names()) throw ContractError("fit DOF order does not match the model");
    d.segment_ids = j.at("segments").get<std::vector<std::string>>();
    d.marker_ids = j.at("markers").get<std::vector<std::string>>();
    for (const auto& [p, pj] : j.at("participants").items()) {
      const auto s = pj.at("scale").get<std::vector<double>>();
      if (static_cast<int>(s.size()) != model.segment_count()) throw ContractError("scale size mismatch");
      d.scale[p] = ScaleParams{Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()))};
      MarkerOffsets o = model.zero_offsets(pj.value("offset_radius", 0.05));
      const auto& off = pj.at("offsets");
      if (static_cast<int>(off.size()) != model.marker_count()) throw ContractError("offset count mismatch");
      for (int m = 0; m < model.marker_count(); ++m)
        for (int i = 0; i < 3; ++i) o.values(i, m) = off.at(m).at(i).get<double>();
      d.offsets[p] = o;
    }
    for (const auto& tj : j.at("trials")) {
      FitDocument::Trial t;
      t.trial_id = tj.at("trial_id").get<std::string>();
      t.participant = tj.at("participant").get<std::string>();
      t.arm = tj.at("arm").get<std::string>();
      t.rate = tj.at("rate_hz").get<double>();
      if (!tj.at("final_loss").is_null()) t.final_loss = tj.at("final_loss").get<double>();
      if (!tj.at("residual").is_null()) t.residual = tj.at("residual").get<double>();
      t.flagged_frames = tj.value("flagged_frames", 0);
      const auto& th = tj.at("theta");
      t.theta.resize(model.dof_count(), static_cast<Eigen::Index>(th.size()));
      for (std::size_t f = 0; f < th.size(); ++f) {
        if (static_cast<int>(th[f].size()) != model.dof_count()) throw ContractError("theta row has wrong DOF count");
        for (int i = 0; i < model.dof_count(); ++i) t.theta(i, static_cast<Eigen::Index>(f)) = th[f][i].get<double>();
      }
      if (!d.scale.count(t.participant)) throw ContractError("trial '" + t.trial_id + "' has no participant scale");
      d.trials.push_back(std::move(t));
    }
    for (const auto& fj : j.value("failed", nlohmann::json::array()))
      d.failed.push_back({fj.at("trial_id").get<std::string>(), fj.value("participant", ""), fj.value("arm", ""),
                          fj.value("reason", "")});
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("invalid fit document: ") + e.what());
  }
}

inline FitDocument make_fit_document(const BodyModel& model, const std::string& system) {
  FitDocument d;
  d.system = system;
  d.dof_order = model.dof_names();
  for (const auto& s : model.segments()) d.segment_ids.push_back(s.id);
  for (const auto& m : model.markers()) d.marker_ids.push_back(m.id);
  return d;
}

// ---- measures and alignment rows --------------------------------------------------------

inline std::string measures_to_string(const std::vector<MeasureRow>& rows) {
  std::ostringstream os;
  os << "# schema: " << kMeasureSchema << "\ntrial_id,participant,arm,system";
  for (const char* c : kMeasureColumns) os << ',' << c;
  os << "\n";
  for (const auto& r : rows) {
    os << r.trial_id << ',' << r.participant << ',' << r.arm << ',' << r.system;
    for (double v : measure_values(r.measures)) os << ',' << format_double(v);
    os << "\n";
  }
  return os.str();
}

inline std::vector<MeasureRow> parse_measures(const Table& t) {
  const std::size_t ct = t.column("trial_id"), cp = t.column("participant"), ca = t.column("arm"),
                    cs = t.column("system");
  std::array<std::size_t, 12> cols{};
  for (std::size_t k = 0; k < 12; ++k) cols[k] = t.column(kMeasureColumns[k]);
  std::vector<MeasureRow> out;
  for (const auto& r : t.rows) {
    MeasureRow m;
    m.trial_id = t.text(r, ct);
    m.participant = t.text(r, cp);
    m.arm = t.text(r, ca);
    m.system = t.text(r, cs);
    if (m.arm != "affected" && m.arm != "unaffected") t.fail(r, ca, "arm must be affected or unaffected");
    if (m.system != "mmc" && m.system != "omc" && m.system != "truth") t.fail(r, cs, "system must be mmc, omc or truth");
    std::array<double, 12> v{};
    for (std::size_t k = 0; k < 12; ++k) v[k] = t.number(r, cols[k]);
    m.measures = measures_from_values(v);
    out.push_back(std::move(m));
  }
  return out;
}

inline std::string alignments_to_string(const std::vector<TrialAlignment>& rows) {
  std::ostringstream os;
  os << "# schema: " << kAlignmentSchema << "\ntrial_id,participant,arm,channel,bias,lag_s,lag_samples,rmse,r\n";
  for (const auto& a : rows)
    os << a.trial_id << ',' << a.participant << ',' << a.arm << ',' << channel_name(a.result.channel) << ','
       << format_double(a.result.bias) << ',' << format_double(a.result.lag_s) << ',' << a.result.lag_samples << ','
       << format_double(a.result.rmse) << ',' << format_double(a.result.r) << "\n";
  return os.str();
}

inline std::vector<TrialAlignment> parse_alignments(const Table& t) {
  const std::size_t ct = t.column("trial_id"), cp = t.column("participant"), ca = t.column("arm"),
                    cc = t.column("channel"), cb = t.column("bias"), cl = t.column("lag_s"),
                    cn = t.column("lag_samples"), cr = t.column("rmse"), cq = t.column("r");
  std::vector<TrialAlignment> out;
  for (const auto& r : t.rows) {
    TrialAlignment a;
    a.trial_id = t.text(r, ct);
    a.participant = t.text(r, cp);
    a.arm = t.text(r, ca);
    try {
      a.result.channel = channel_from_name(t.text(r, cc));
    } catch (const ContractError& e) {
      t.fail(r, cc, e.what());
    }
    a.result.bias = t.number(r, cb);
    a.result.lag_s = t.number(r, cl);
    a.result.lag_samples = static_cast<int>(t.integer(r, cn));
    a.result.rmse = t.number(r, cr);
    a.result.r = t.number(r, cq);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace mmc::io
