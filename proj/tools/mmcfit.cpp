// mmcfit command line: one subcommand per pipeline stage, plus `pipeline` to chain them.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mmcfit/pipeline.hpp"
#include "mmcfit/runtime.hpp"

namespace {

using namespace mmc;
namespace pl = mmc::pipeline;

struct Flags {
  std::string config;
  std::string output = "mmcfit-run";
  int jobs = 1;
  std::uint64_t seed = 0;
  double max_lag = 0.25;
  int batches = 8;
  int verbosity = 0;

  std::string calibration, keypoints, markers, model;
  std::string reference = "omc";
  int participants = 1;
  int trials = 3;
  double pixel_sigma = 1.0;
  double dropout = 0.05;
  double marker_sigma = 0.0005;
  int steps = -1;
  bool synth_first = false;
};

}  // namespace

int main(int argc, char** argv) {
  mmc::configure_allocator();
  CLI::App app{"Markerless motion capture fitting and agreement analysis"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON configuration file");
  app.add_option("--output,-o", f.output, "workspace directory")->capture_default_str();
  auto* o_jobs = app.add_option("--jobs,-j", f.jobs, "parallel trials/participants")->check(CLI::PositiveNumber);
  auto* o_seed = app.add_option("--seed", f.seed, "random seed");
  auto* o_lag = app.add_option("--max-lag", f.max_lag, "maximum lag searched (s)")->check(CLI::NonNegativeNumber);
  auto* o_batches = app.add_option("--batches", f.batches, "trial batches per epoch")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", f.verbosity, "more logging (repeatable)");
  auto* o_cal = app.add_option("--calibration", f.calibration, "calibration file");
  auto* o_kp = app.add_option("--keypoints", f.keypoints, "keypoint directory");
  auto* o_mk = app.add_option("--markers", f.markers, "marker directory");
  auto* o_model = app.add_option("--model", f.model, "model file");
  auto* o_ref = app.add_option("--reference", f.reference, "reference system: omc or truth")
                    ->check(CLI::IsMember({"omc", "truth"}));
  auto* o_steps = app.add_option("--steps", f.steps, "end-to-end optimizer epochs")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "generate a synthetic session");
  auto* o_parts = synth->add_option("--participants", f.participants)->check(CLI::PositiveNumber);
  auto* o_trials = synth->add_option("--trials", f.trials, "trials per participant")->check(CLI::PositiveNumber);
  auto* o_px = synth->add_option("--pixel-sigma", f.pixel_sigma)->check(CLI::NonNegativeNumber);
  auto* o_drop = synth->add_option("--dropout", f.dropout)->check(CLI::Range(0.0, 1.0));
  auto* o_msig = synth->add_option("--marker-sigma", f.marker_sigma)->check(CLI::NonNegativeNumber);
  app.add_subcommand("fit-mmc", "end-to-end fit of keypoints");
  app.add_subcommand("fit-omc", "two-stage fit of 3D markers");
  app.add_subcommand("derive", "derive kinematic channels from fits");
  app.add_subcommand("measures", "movement-quality measures per trial");
  app.add_subcommand("compare", "bias, lag, RMSE and correlation per trial and channel");
  app.add_subcommand("report", "aggregate tables");
  auto* pipe = app.add_subcommand("pipeline", "fit-mmc, fit-omc, derive, measures, compare, report");
  pipe->add_flag("--synth", f.synth_first, "run synth first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    nlohmann::json rec{{"command", "mmcfit"}, {"error", "Usage"}, {"message", e.what()}, {"exit_code", 2}};
    std::cerr << rec.dump() << '\n';
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    set_log_level(static_cast<LogLevel>(std::min(3, 1 + f.verbosity)));
    pl::PipelineConfig cfg;
    if (!f.config.empty()) {
      if (!std::filesystem::exists(f.config)) throw pl::MissingInputError("configuration file", f.config);
      pl::apply_config(cfg, io::read_json(f.config));
    }
    // flags override the configuration file
    cfg.output = f.output;
    if (o_jobs->count()) cfg.jobs = f.jobs;
    if (o_seed->count()) cfg.seed = cfg.fit.seed = f.seed;
    if (o_lag->count()) cfg.max_lag_s = f.max_lag;
    if (o_batches->count()) cfg.fit.batches = f.batches;
    if (o_steps->count()) cfg.fit.epochs = f.steps;
    if (o_ref->count()) cfg.reference = f.reference;
    if (o_cal->count()) cfg.calibration = f.calibration;
    if (o_kp->count()) cfg.keypoints = f.keypoints;
    if (o_mk->count()) cfg.markers = f.markers;
    if (o_model->count()) cfg.model = f.model;
    if (o_parts->count()) cfg.synth.participants = f.participants;
    if (o_trials->count()) cfg.synth.trials = f.trials;
    if (o_px->count()) cfg.synth.noise.pixel_sigma = f.pixel_sigma;
    if (o_drop->count()) cfg.synth.noise.dropout = f.dropout;
    if (o_msig->count()) cfg.synth.noise.marker_sigma = f.marker_sigma;

    if (command == "synth") {
      pl::run_synth(cfg);
    } else if (command == "fit-mmc") {
      pl::run_fit_mmc(cfg);
    } else if (command == "fit-omc") {
      pl::run_fit_omc(cfg);
    } else if (command == "derive") {
      pl::run_derive(cfg);
    } else if (command == "measures") {
      pl::run_measures(cfg);
    } else if (command == "compare") {
      pl::run_compare(cfg);
    } else if (command == "report") {
      pl::run_report(cfg);
    } else if (command == "pipeline") {
      if (f.synth_first) pl::run_synth(cfg);
      pl::run_fit_mmc(cfg);
      if (cfg.reference == "omc") pl::run_fit_omc(cfg);
      pl::run_derive(cfg);
      pl::run_measures(cfg);
      pl::run_compare(cfg);
      pl::run_report(cfg);
    }
  } catch (const std::exception& e) {
    const nlohmann::json rec = pl::error_record(command, e);
    std::cerr << rec.dump() << '\n';
    return rec.at("exit_code").get<int>();
  }
  return 0;
}
