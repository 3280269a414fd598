#include <gtest/gtest.h>

#include <random>

#include "mmcfit/camera.hpp"
#include "mmcfit/jet.hpp"
#include "mmcfit/num.hpp"
#include "mmcfit/synthetic.hpp"
#include "oracles.hpp"

using namespace mmc;

namespace {

Camera simple_camera() {
  Camera c;
  c.id = "c";
  c.intrinsics = {1000, 1000, 500, 500, {0, 0, 0, 0, 0}};
  c.width = 1000;
  c.height = 1000;
  return c;
}

Camera random_camera(std::mt19937_64& rng, double kmax = 0.1) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Camera c;
  c.id = "r";
  c.intrinsics.fx = 900 + 300 * (u(rng) + 1);
  c.intrinsics.fy = c.intrinsics.fx * (1.0 + 0.01 * u(rng));
  c.intrinsics.cx = 960 + 20 * u(rng);
  c.intrinsics.cy = 540 + 20 * u(rng);
  c.intrinsics.dist = {kmax * u(rng), kmax * u(rng), 0.01 * kmax * u(rng), 0.01 * kmax * u(rng), kmax * u(rng)};
  const Vec3 center(3.0 * u(rng), -2.5 - u(rng), 1.0 + 0.5 * u(rng));
  c.extrinsics = look_at(center, Vec3(0.2 * u(rng), 0.2 * u(rng), 1.0));
  return c;
}

Vec3 random_point_near_origin(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  return Vec3(u(rng), u(rng), 1.0 + u(rng));
}

}  // namespace

TEST(Projection, OpticalAxisHitsPrincipalPoint) {
  const Camera c = simple_camera();
  for (double z : {0.1, 1.0, 37.0}) {
    const Eigen::Vector2d uv = project(c, Vec3(0, 0, z));
    EXPECT_DOUBLE_EQ(uv.x(), 500.0);
    EXPECT_DOUBLE_EQ(uv.y(), 500.0);
  }
}

TEST(Projection, PinholeExample) {
  const Eigen::Vector2d uv = project(simple_camera(), Vec3(0.1, 0, 1));
  EXPECT_NEAR(uv.x(), 600.0, 1e-12);
  EXPECT_NEAR(uv.y(), 500.0, 1e-12);
}

TEST(Projection, BehindCameraThrows) {
  EXPECT_THROW(project(simple_camera(), Vec3(0, 0, -1)), BehindCameraError);
  EXPECT_THROW(project(simple_camera(), Vec3(0.2, 0, 0)), BehindCameraError);
}

TEST(Projection, MatchesMatrixOracle) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Camera c = random_camera(rng);
    const Vec3 p = random_point_near_origin(rng);
    const Eigen::Vector2d a = project(c, p);
    const Eigen::Vector2d b = oracle::project_by_hand(c, p);
    ASSERT_NEAR(a.x(), b.x(), 1e-9);
    ASSERT_NEAR(a.y(), b.y(), 1e-9);
  }
}

TEST(Projection, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Camera c = random_camera(rng);
    const Vec3 p = random_point_near_origin(rng);
    const Vec3Of<Jet> pj{Jet::variable(p[0], 3, 0), Jet::variable(p[1], 3, 1), Jet::variable(p[2], 3, 2)};
    const auto uv = project_generic<Jet>(c.intrinsics, c.extrinsics, pj);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      Vec3 lo = p, hi = p;
      lo[k] -= h;
      hi[k] += h;
      const Eigen::Vector2d fd = (project(c, hi) - project(c, lo)) / (2 * h);
      for (int r = 0; r < 2; ++r) {
        const double ad = uv[r].v[k];
        ASSERT_LE(std::abs(ad - fd[r]), 1e-5 * std::max(1.0, std::abs(fd[r])));
      }
    }
  }
}

TEST(Distortion, UndistortInvertsDistort) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> k(-0.1, 0.1), xy(-0.6, 0.6);
  for (int i = 0; i < 1000; ++i) {
    const std::array<double, 5> d{k(rng), k(rng), 0.1 * k(rng), 0.1 * k(rng), k(rng)};
    const double x = xy(rng), y = 0.6 * xy(rng);
    const auto [xd, yd] = distort<double>(d, x, y);
    const Eigen::Vector2d back = undistort(d, xd, yd);
    // in pixels at a 1400 px focal length
    ASSERT_LT(1400.0 * std::hypot(back.x() - x, back.y() - y), 1e-9);
  }
}

TEST(Triangulation, RecoversPointFromFiveCameras) {
  const CameraRig rig = make_rig(RigSpec{});
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = RigSpec{}.target + Vec3(u(rng), u(rng), u(rng));
    std::vector<Observation2D> obs;
    for (const auto& c : rig.cameras()) {
      const Eigen::Vector2d uv = project(c, p);
      obs.push_back({uv.x(), uv.y(), 1.0});
    }
    const Triangulated t = triangulate(rig, obs);
    ASSERT_LT((t.point - p).norm(), 1e-6);
    ASSERT_LT(t.residual_rms_px, 1e-6);
    EXPECT_EQ(t.cameras_used, 5);
  }
}

TEST(Triangulation, TwoCamerasSuffice) {
  const CameraRig rig = make_rig(RigSpec{});
  const Vec3 p = RigSpec{}.target;
  std::vector<Observation2D> obs(rig.size());
  for (std::size_t c : {0u, 3u}) {
    const Eigen::Vector2d uv = project(rig[c], p);
    obs[c] = {uv.x(), uv.y(), 0.9};
  }
  EXPECT_LT((triangulate(rig, obs).point - p).norm(), 1e-6);
}

TEST(Triangulation, SingleViewIsUnderdetermined) {
  const CameraRig rig = make_rig(RigSpec{});
  std::vector<Observation2D> obs(rig.size());
  const Eigen::Vector2d uv = project(rig[1], RigSpec{}.target);
  obs[1] = {uv.x(), uv.y(), 1.0};
  EXPECT_THROW(triangulate(rig, obs), UnderdeterminedError);
  // low-confidence views do not count
  obs[2] = {uv.x(), uv.y(), 0.1};
  EXPECT_THROW(triangulate(rig, obs), UnderdeterminedError);
}

TEST(Triangulation, InvariantToUniformConfidenceScaling) {
  const CameraRig rig = make_rig(RigSpec{});
  std::mt19937_64 rng(15);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_real_distribution<double> s(0.3, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<Observation2D> a, b;
    const double scale = s(rng);
    for (const auto& c : rig.cameras()) {
      const Eigen::Vector2d uv = project(c, RigSpec{}.target);
      const double u = uv.x() + n(rng), v = uv.y() + n(rng);
      a.push_back({u, v, 1.0});
      b.push_back({u, v, scale});
    }
    const Vec3 pa = triangulate(rig, a).point, pb = triangulate(rig, b).point;
    ASSERT_LT((pa - pb).norm(), 1e-12);
  }
}

TEST(Rig, RejectsInvalidCameras) {
  Camera c = simple_camera();
  c.intrinsics.fx = 0;
  EXPECT_THROW(CameraRig({c}), ContractError);
  c = simple_camera();
  c.extrinsics.rotation(0, 0) = -1;  // reflection
  EXPECT_THROW(CameraRig({c}), ContractError);
  EXPECT_THROW(CameraRig({simple_camera(), simple_camera()}), ContractError);
}

TEST(Rig, CalibrationJsonRoundTrip) {
  const CameraRig rig = make_rig(RigSpec{});
  const CameraRig back = rig_from_json(nlohmann::json::parse(rig_to_json(rig).dump()));
  ASSERT_EQ(back.size(), rig.size());
  for (std::size_t i = 0; i < rig.size(); ++i) {
    EXPECT_EQ(back[i].id, rig[i].id);
    EXPECT_EQ(back[i].intrinsics.dist, rig[i].intrinsics.dist);
    EXPECT_EQ(back[i].extrinsics.rotation, rig[i].extrinsics.rotation);
    EXPECT_EQ(back[i].extrinsics.translation, rig[i].extrinsics.translation);
  }
  nlohmann::json bad = rig_to_json(rig);
  bad["cameras"][0]["K"] = {1, 2, 3};
  EXPECT_THROW(rig_from_json(bad), ContractError);
}
