#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mmcfit/ik_end_to_end.hpp"
#include "mmcfit/measures.hpp"
#include "mmcfit/synthetic.hpp"

using namespace mmc;

namespace {

bool same_tracks(const TrialObservations& a, const TrialObservations& b) {
  if (a.frames != b.frames || a.cameras.size() != b.cameras.size()) return false;
  for (std::size_t c = 0; c < a.cameras.size(); ++c)
    for (const auto& [x, y] : {std::pair{&a.cameras[c].u, &b.cameras[c].u}, std::pair{&a.cameras[c].v, &b.cameras[c].v},
                               std::pair{&a.cameras[c].confidence, &b.cameras[c].confidence}})
      for (Eigen::Index i = 0; i < x->size(); ++i) {
        const double p = x->data()[i], q = y->data()[i];
        if (!(p == q || (std::isnan(p) && std::isnan(q)))) return false;
      }
  return true;
}

Vec3 camera_center(const Camera& c) { return -c.extrinsics.rotation.transpose() * c.extrinsics.translation; }

}  // namespace

TEST(Scenario, SameSeedIsBitIdentical) {
  const BodyModel model = build_default_upper_body(Side::Right);
  SyntheticScenario sc;
  sc.seed = 17;
  sc.noise.pixel_sigma = 1.0;
  sc.noise.dropout = 0.05;
  const CameraRig rig = make_rig(sc.rig);
  const GroundTruth a = generate_trajectory(model, sc, 1, 2), b = generate_trajectory(model, sc, 1, 2);
  EXPECT_EQ(a.duration, b.duration);
  EXPECT_TRUE((a.theta_at(60.0).array() == b.theta_at(60.0).array()).all());
  EXPECT_TRUE((a.scale.values.array() == b.scale.values.array()).all());
  EXPECT_TRUE(same_tracks(render_observations(model, a, rig, sc.noise, 60.0, 9),
                          render_observations(model, b, rig, sc.noise, 60.0, 9)));
}

TEST(Scenario, DifferentSeedsAndTrialsDiffer) {
  const BodyModel model = build_default_upper_body(Side::Right);
  SyntheticScenario sc;
  const GroundTruth base = generate_trajectory(model, sc, 0, 0);
  const GroundTruth other_trial = generate_trajectory(model, sc, 0, 1);
  sc.seed = 1;
  const GroundTruth other_seed = generate_trajectory(model, sc, 0, 0);
  EXPECT_NE(base.duration, other_trial.duration);
  EXPECT_NE(base.duration, other_seed.duration);
  // same participant shares a body across trials
  EXPECT_TRUE((base.scale.values.array() == other_trial.scale.values.array()).all());
  EXPECT_FALSE((base.scale.values.array() == other_seed.scale.values.array()).all());
}

TEST(Scenario, PosesStayWithinJointLimits) {
  const BodyModel model = build_default_upper_body(Side::Right);
  SyntheticScenario sc;
  sc.pose_jitter = 0.3;  // stress the clamp
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    for (int trial = 0; trial < 10; ++trial, ++checked) {
      sc.seed = seed;
      const Eigen::MatrixXd th = generate_trajectory(model, sc, 0, trial).theta_at(20.0);
      for (Eigen::Index f = 0; f < th.cols(); ++f)
        for (int i = 0; i < model.dof_count(); ++i) {
          ASSERT_GE(th(i, f), model.dofs()[i].min - 1e-12) << model.dofs()[i].name;
          ASSERT_LE(th(i, f), model.dofs()[i].max + 1e-12) << model.dofs()[i].name;
        }
    }
  EXPECT_EQ(checked, 1000);
}

TEST(Scenario, EveryTrialHasFourBurstsAndAQuietDrink) {
  const BodyModel model = build_default_upper_body(Side::Right);
  SyntheticScenario sc;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    sc.seed = seed;
    const GroundTruth gt = generate_trajectory(model, sc, 0, static_cast<int>(seed % 5));
    const TrajectorySeries s = truth_series(model, gt, 60.0);
    const Eigen::VectorXd& eev = s.channel(ChannelId::EndEffectorVelocity);
    EXPECT_GE(count_movement_units(eev, s.rate), 4) << "seed " << seed;
    const PhaseSegmentation seg = classify_phases(eev, s.rate);
    const PhaseInterval d = seg[Phase::Drinking];
    ASSERT_GT(d.end, d.start);
    EXPECT_LT(eev.segment(d.start, d.end - d.start).maxCoeff(), 0.3 * eev.maxCoeff()) << "seed " << seed;
  }
}

TEST(Scenario, ValidationNamesTheProblem) {
  SyntheticScenario sc;
  sc.noise.dropout = 1.5;
  EXPECT_THROW(sc.validate(), ContractError);
  sc = {};
  sc.noise.camera_dropout = {0.0, -0.1};
  EXPECT_THROW(sc.validate(), ContractError);
  sc = {};
  sc.noise.confidence_lo = 0.9;
  sc.noise.confidence_hi = 0.8;
  EXPECT_THROW(sc.validate(), ContractError);
  sc = {};
  sc.noise.pixel_sigma = -1.0;
  EXPECT_THROW(sc.validate(), ContractError);
  sc = {};
  sc.video_rate = 0.0;
  EXPECT_THROW(sc.validate(), ContractError);
  sc = {};
  sc.task_arm = "x";
  const BodyModel model = build_default_upper_body(Side::Right);
  EXPECT_THROW(generate_trajectory(model, sc), ContractError);
}

TEST(Rig, DefaultCamerasAreEvenlySpacedAndSeeTheTarget) {
  const RigSpec spec;
  const CameraRig rig = make_rig(spec);
  ASSERT_EQ(rig.size(), 5u);
  for (std::size_t c = 0; c < rig.size(); ++c) {
    const Vec3 o = camera_center(rig[c]);
    EXPECT_NEAR(std::hypot(o.x() - spec.target.x(), o.y() - spec.target.y()), spec.radius, 1e-9);
    const Vec3 pc = rig[c].extrinsics.rotation * spec.target + rig[c].extrinsics.translation;
    EXPECT_GT(pc.z(), 0.0);
    EXPECT_NEAR(pc.x(), 0.0, 1e-9);
    EXPECT_NEAR(pc.y(), 0.0, 1e-9);
    if (c > 0) {
      const Vec3 p = camera_center(rig[c - 1]) - spec.target, q = o - spec.target;
      const double step = std::atan2(q.y(), q.x()) - std::atan2(p.y(), p.x());
      EXPECT_NEAR(step * 180.0 / std::numbers::pi, 45.0, 1e-9);
    }
  }
}

TEST(Render, PixelNoiseHasTheRequestedSpread) {
  const BodyModel model = build_default_upper_body(Side::Right);
  SyntheticScenario sc;
  const CameraRig rig = make_rig(sc.rig);
  const GroundTruth gt = generate_trajectory(model, sc);
  NoiseSpec noisy;
  noisy.pixel_sigma = 1.0;
  const TrialObservations clean = render_observations(model, gt, rig, NoiseSpec{}, 60.0, 4);
  const TrialObservations dirty = render_observations(model, gt, rig, noisy, 60.0, 4);
  double sum = 0.0, sum2 = 0.0;
  long n = 0;
  for (std::size_t c = 0; c < rig.size(); ++c)
    for (const auto& [x, y] : {std::pair{&clean.cameras[c].u, &dirty.cameras[c].u},
                               std::pair{&clean.cameras[c].v, &dirty.cameras[c].v}})
      for (Eigen::Index i = 0; i < x->size(); ++i) {
        if (std::isnan(x->data()[i])) continue;
        const double r = y->data()[i] - x->data()[i];
        sum += r;
        sum2 += r * r;
        ++n;
      }
  ASSERT_GE(n, 10000);
  const double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
  EXPECT_NEAR(sd, 1.0, 0.05);
  EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Render, NoiseFreeViewsTriangulateExactly) {
  const BodyModel model = build_default_upper_body(Side::Right);
  SyntheticScenario sc;
  sc.seed = 2;
  const CameraRig rig = make_rig(sc.rig);
  const GroundTruth gt = generate_trajectory(model, sc);
  const TrialObservations obs = render_observations(model, gt, rig, sc.noise, 30.0, 2);
  const Marker3DTrial tri = triangulate_trial(model, rig, obs, TriangulationOptions{});
  const auto truth = truth_markers(model, gt, 30.0);
  ASSERT_EQ(tri.frames.size(), truth.size());
  double worst = 0.0;
  for (std::size_t f = 0; f < truth.size(); ++f) worst = std::max(worst, (tri.frames[f] - truth[f]).cwiseAbs().maxCoeff());
  EXPECT_LT(worst, 1e-6);
}

TEST(Render, DroppedCameraContributesNothingAndTheFitStillRuns) {
  const BodyModel model = build_default_upper_body(Side::Right);
  SyntheticScenario sc;
  sc.noise.camera_dropout = {0.0, 0.0, 1.0, 0.0, 0.0};
  const CameraRig rig = make_rig(sc.rig);
  const TrialObservations obs = render_observations(model, generate_trajectory(model, sc), rig, sc.noise, 15.0, 1, "t0");
  EXPECT_TRUE(obs.cameras[2].u.array().isNaN().all());
  for (std::size_t c : {0u, 1u, 3u, 4u}) EXPECT_FALSE(obs.cameras[c].u.array().isNaN().all());

  FitConfig cfg;
  cfg.hidden = {16, 16};
  cfg.fourier_pairs = 3;
  cfg.epochs = 10;
  cfg.pretrain_steps = 20;
  cfg.eval_every = 5;
  const SessionFit fit = fit_end_to_end(model, rig, {obs}, cfg);
  EXPECT_EQ(fit.trials.size(), 1u);
  EXPECT_TRUE(fit.failed.empty());
  EXPECT_TRUE(std::isfinite(fit.loss));
}

TEST(Render, MarkerNoiseIsSeeded) {
  const BodyModel model = build_default_upper_body(Side::Right);
  SyntheticScenario sc;
  sc.noise.marker_sigma = 0.002;
  const GroundTruth gt = generate_trajectory(model, sc);
  const Marker3DTrial a = render_markers(model, gt, sc.noise, 100.0, 3), b = render_markers(model, gt, sc.noise, 100.0, 3);
  const Marker3DTrial c = render_markers(model, gt, sc.noise, 100.0, 4);
  EXPECT_TRUE((a.frames[10].array() == b.frames[10].array()).all());
  EXPECT_FALSE((a.frames[10].array() == c.frames[10].array()).all());
}

TEST(Corrupt, ZeroCorruptionIsIdentity) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Eigen::VectorXd x(200);
  for (auto& v : x) v = g(rng);
  EXPECT_TRUE((corrupt(x, 0.0, 0, 0.0, 5, 60.0).array() == x.array()).all());
}

TEST(Corrupt, ShiftsAndOffsetsByTheRequestedAmount) {
  Eigen::VectorXd x(50);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i * i);
  const Eigen::VectorXd y = corrupt(x, 5.0, 2, 0.0, 0, 60.0);
  for (Eigen::Index i = 0; i + 2 < x.size(); ++i) EXPECT_EQ(y[i], x[i + 2] + 5.0);
  EXPECT_EQ(y[49], x[49] + 5.0);  // edge held
  const Eigen::VectorXd z = corrupt(x, 0.0, -3, 0.0, 0, 60.0);
  EXPECT_EQ(z[0], x[0]);
  EXPECT_EQ(z[10], x[7]);
}

TEST(Corrupt, NoiseIsSeededAndLagIsBounded) {
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(100);
  const Eigen::VectorXd a = corrupt(x, 0.0, 0, 0.1, 8, 60.0), b = corrupt(x, 0.0, 0, 0.1, 8, 60.0);
  EXPECT_TRUE((a.array() == b.array()).all());
  EXPECT_GT(a.norm(), 0.0);
  EXPECT_NO_THROW(corrupt(x, 0.0, 15, 0.0, 0, 60.0));
  EXPECT_THROW(corrupt(x, 0.0, 16, 0.0, 0, 60.0), ContractError);
  EXPECT_THROW(corrupt(x, 0.0, 0, 0.0, 0, 0.0), ContractError);
}

TEST(MinimumJerk, EndpointsAndSymmetry) {
  EXPECT_EQ(minimum_jerk(0.0), 0.0);
  EXPECT_EQ(minimum_jerk(1.0), 1.0);
  EXPECT_DOUBLE_EQ(minimum_jerk(0.5), 0.5);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double s = u(rng);
    EXPECT_NEAR(minimum_jerk(s) + minimum_jerk(1.0 - s), 1.0, 1e-12);
  }
}
