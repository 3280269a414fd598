#include <gtest/gtest.h>

#include <random>

#include "mmcfit/model.hpp"
#include "oracles.hpp"

using namespace mmc;

namespace {

JointAngles random_pose(const BodyModel& m, std::mt19937_64& rng) {
  JointAngles q(m.dof_count());
  for (int d = 0; d < m.dof_count(); ++d) {
    std::uniform_real_distribution<double> u(m.dofs()[d].min, m.dofs()[d].max);
    q[d] = u(rng);
  }
  return q;
}

ScaleParams random_scale(const BodyModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.8, 1.25);
  ScaleParams s = m.unit_scale();
  for (int i = 0; i < m.segment_count(); ++i) s.values[i] = u(rng);
  return s;
}

MarkerOffsets random_offsets(const BodyModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.02, 0.02);
  MarkerOffsets o = m.zero_offsets();
  for (int k = 0; k < m.marker_count(); ++k) o.values.col(k) = Vec3(u(rng), u(rng), u(rng));
  return o;
}

}  // namespace

TEST(DefaultModel, BilateralHasTwentyDofs) {
  const BodyModel m = build_default_upper_body(Side::Bilateral);
  EXPECT_EQ(m.dof_count(), 20);
  EXPECT_EQ(build_default_upper_body(Side::Right).dof_count(), 13);
}

TEST(DefaultModel, RightHasHandMarker) {
  const BodyModel m = build_default_upper_body(Side::Right);
  ASSERT_TRUE(m.find_marker("hand_r").has_value());
  EXPECT_FALSE(m.find_marker("hand_l").has_value());
  EXPECT_TRUE(m.find_marker("sternum").has_value());
}

TEST(DefaultModel, DofOrderIsStable) {
  const auto names = build_default_upper_body(Side::Bilateral).dof_names();
  ASSERT_EQ(names.size(), 20u);
  EXPECT_EQ(names[0], "trunk_tx");
  EXPECT_EQ(names[5], "trunk_rotation");
  EXPECT_EQ(names[6], "shoulder_flexion_r");
  EXPECT_EQ(names[9], "elbow_flexion_r");
  EXPECT_EQ(names[13], "shoulder_flexion_l");
  EXPECT_EQ(names[19], "wrist_deviation_l");
}

TEST(DefaultModel, LimitsContainZeroPose) {
  const BodyModel m = build_default_upper_body(Side::Bilateral);
  for (const auto& d : m.dofs()) {
    EXPECT_LT(d.min, 0.0) << d.name;
    EXPECT_GT(d.max, 0.0) << d.name;
  }
}

TEST(BodyModelInvariants, RejectsBrokenGraphs) {
  std::vector<SegmentSpec> segs{{"a", "", Vec3::Zero(), true}, {"b", "missing", Vec3::Zero(), true}};
  EXPECT_THROW(BodyModel(segs, {}, {}), ContractError);
  std::vector<SegmentSpec> ok{{"a", "", Vec3::Zero(), true}};
  EXPECT_THROW(BodyModel(ok, {}, {{"m", "nope", Vec3::Zero()}}), ContractError);
  EXPECT_THROW(BodyModel(ok, {}, {{"m", "a", Vec3::Zero()}, {"m", "a", Vec3::Zero()}}), ContractError);
  EXPECT_THROW(BodyModel(ok, {{"a", {{"q", Vec3(1, 1, 0), DofKind::Rotation, -1, 1}}}}, {}), ContractError);
  EXPECT_THROW(BodyModel(ok, {{"a", {{"q", Vec3::UnitX(), DofKind::Rotation, 1, -1}}}}, {}), ContractError);
  std::vector<SegmentSpec> cyc{{"r", "", Vec3::Zero(), true}, {"a", "b", Vec3::Zero(), true}, {"b", "a", Vec3::Zero(), true}};
  EXPECT_THROW(BodyModel(cyc, {}, {}), ContractError);
}

TEST(ForwardKinematics, IdentityPoseSumsNeutralOffsets) {
  const BodyModel m = build_default_upper_body(Side::Right);
  const MarkerCloud c = forward_kinematics(m, m.unit_scale(), m.zero_offsets(), m.zero_pose());
  // hand_r: trunk root + shoulder + elbow + wrist + local
  const Vec3 expected = Vec3(0, 0, 0.60) + Vec3(0, -0.18, 0.45) + Vec3(0, 0, -0.30) + Vec3(0, 0, -0.26) +
                        Vec3(0.01, 0.0, -0.08);
  EXPECT_LT((c.positions.col(m.marker_index("hand_r")) - expected).norm(), 1e-15);
  const Vec3 sternum = Vec3(0, 0, 0.60) + Vec3(0.12, 0, 0.38);
  EXPECT_LT((c.positions.col(m.marker_index("sternum")) - sternum).norm(), 1e-15);
}

TEST(ForwardKinematics, ElbowFlexionRotatesForearmRigidly) {
  const BodyModel m = build_default_upper_body(Side::Right);
  JointAngles q = m.zero_pose();
  const MarkerCloud c0 = forward_kinematics(m, m.unit_scale(), m.zero_offsets(), q);
  q[m.dof_index("elbow_flexion_r")] = M_PI / 2;
  const MarkerCloud c1 = forward_kinematics(m, m.unit_scale(), m.zero_offsets(), q);
  const Vec3 elbow = Vec3(0, 0, 0.60) + Vec3(0, -0.18, 0.45) + Vec3(0, 0, -0.30);
  for (const char* id : {"wrist_rad_r", "wrist_uln_r"}) {
    const Vec3 a = c0.positions.col(m.marker_index(id)) - elbow;
    const Vec3 b = c1.positions.col(m.marker_index(id)) - elbow;
    EXPECT_NEAR(a.norm(), b.norm(), 1e-12);
    // rotated 90 degrees about the lateral axis: forearm now points forward (+x)
    EXPECT_NEAR(a.dot(b), a.y() * b.y(), 1e-12);
    EXPECT_GT(b.x(), 0.2);
  }
}

TEST(ForwardKinematics, UniformScaleDoublesDistances) {
  const BodyModel m = build_default_upper_body(Side::Bilateral);
  ScaleParams s = m.unit_scale();
  s.values.setConstant(2.0);
  const MarkerCloud a = forward_kinematics(m, m.unit_scale(), m.zero_offsets(), m.zero_pose());
  const MarkerCloud b = forward_kinematics(m, s, m.zero_offsets(), m.zero_pose());
  // Root position is a world placement, not a length; distances are measured between markers.
  for (int i = 0; i < m.marker_count(); ++i)
    for (int j = 0; j < m.marker_count(); ++j)
      EXPECT_NEAR((b.positions.col(i) - b.positions.col(j)).norm(),
                  2.0 * (a.positions.col(i) - a.positions.col(j)).norm(), 1e-12);
}

TEST(ForwardKinematics, MatchesHomogeneousMatrixOracle) {
  std::mt19937_64 rng(11);
  for (Side side : {Side::Right, Side::Left, Side::Bilateral}) {
    const BodyModel m = build_default_upper_body(side);
    for (int trial = 0; trial < 200; ++trial) {
      const JointAngles q = random_pose(m, rng);
      const ScaleParams s = random_scale(m, rng);
      const MarkerOffsets o = random_offsets(m, rng);
      const MarkerCloud c = forward_kinematics(m, s, o, q);
      const Eigen::Matrix3Xd ref = oracle::fk_homogeneous(m, s, o, q);
      EXPECT_LT((c.positions - ref).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(ForwardKinematics, GeneralAxisMatchesOracle) {
  // off-principal axes exercise the Rodrigues branch
  std::vector<SegmentSpec> segs{{"base", "", Vec3(0.1, 0.2, 0.3), true}, {"arm", "base", Vec3(0.3, 0, 0), true}};
  std::vector<JointSpec> joints{
      {"base", {{"tilt", Vec3(1, 1, 0).normalized(), DofKind::Rotation, -3, 3}}},
      {"arm",
       {{"twist", Vec3(0.2, -0.5, 0.8).normalized(), DofKind::Rotation, -3, 3},
        {"slide", Vec3(0, 0.6, 0.8), DofKind::Translation, -1, 1}}}};
  std::vector<MarkerSpec> markers{{"tip", "arm", Vec3(0.2, 0.05, -0.1)}, {"b", "base", Vec3(0, 0.1, 0)}};
  const BodyModel m(segs, joints, markers);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const JointAngles q = random_pose(m, rng);
    const ScaleParams s = random_scale(m, rng);
    const MarkerOffsets o = random_offsets(m, rng);
    EXPECT_LT((forward_kinematics(m, s, o, q).positions - oracle::fk_homogeneous(m, s, o, q)).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST(ForwardKinematics, DimensionMismatchIsContractViolation) {
  const BodyModel m = build_default_upper_body(Side::Right);
  EXPECT_THROW(forward_kinematics(m, m.unit_scale(), m.zero_offsets(), JointAngles::Zero(3)), ContractError);
  ScaleParams bad = m.unit_scale();
  bad.values[0] = 0.0;
  EXPECT_THROW(forward_kinematics(m, bad, m.zero_offsets(), m.zero_pose()), ContractError);
}

// ---- invariants ------------------------------------------------------------

TEST(ModelProperties, SameSegmentDistancesAreRigid) {
  const BodyModel m = build_default_upper_body(Side::Bilateral);
  std::mt19937_64 rng(21);
  const ScaleParams s = random_scale(m, rng);
  const MarkerOffsets o = random_offsets(m, rng);
  const MarkerCloud ref = forward_kinematics(m, s, o, m.zero_pose());
  for (int trial = 0; trial < 1000; ++trial) {
    const MarkerCloud c = forward_kinematics(m, s, o, random_pose(m, rng));
    for (int i = 0; i < m.marker_count(); ++i)
      for (int j = i + 1; j < m.marker_count(); ++j) {
        if (m.marker_segment(i) != m.marker_segment(j)) continue;
        const double d0 = (ref.positions.col(i) - ref.positions.col(j)).norm();
        const double d1 = (c.positions.col(i) - c.positions.col(j)).norm();
        ASSERT_NEAR(d0, d1, 1e-12);
      }
  }
}

TEST(ModelProperties, ScaleHomogeneityAtZeroPose) {
  const BodyModel m = build_default_upper_body(Side::Bilateral);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> us(0.2, 5.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const ScaleParams s = random_scale(m, rng);
    const double k = us(rng);
    ScaleParams ks = s;
    ks.values *= k;
    const MarkerCloud a = forward_kinematics(m, s, m.zero_offsets(), m.zero_pose());
    const MarkerCloud b = forward_kinematics(m, ks, m.zero_offsets(), m.zero_pose());
    const int i = static_cast<int>(rng() % m.marker_count());
    const int j = static_cast<int>(rng() % m.marker_count());
    ASSERT_NEAR((b.positions.col(i) - b.positions.col(j)).norm(), k * (a.positions.col(i) - a.positions.col(j)).norm(),
                1e-11);
  }
}

TEST(ModelProperties, Deterministic) {
  const BodyModel m = build_default_upper_body(Side::Bilateral);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const JointAngles q = random_pose(m, rng);
    const ScaleParams s = random_scale(m, rng);
    const MarkerOffsets o = random_offsets(m, rng);
    const MarkerCloud a = forward_kinematics(m, s, o, q);
    const MarkerCloud b = forward_kinematics(m, s, o, q);
    ASSERT_EQ(0, std::memcmp(a.positions.data(), b.positions.data(), sizeof(double) * a.positions.size()));
  }
}

TEST(ModelSerialization, RoundTripsLosslessly) {
  const BodyModel m = build_default_upper_body(Side::Bilateral);
  const nlohmann::json j = model_to_json(m);
  const BodyModel back = model_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(model_to_json(back).dump(), j.dump());
  EXPECT_EQ(back.dof_names(), m.dof_names());
  std::mt19937_64 rng(1);
  const JointAngles q = random_pose(m, rng);
  const auto a = forward_kinematics(m, m.unit_scale(), m.zero_offsets(), q);
  const auto b = forward_kinematics(back, back.unit_scale(), back.zero_offsets(), q);
  EXPECT_EQ(0, std::memcmp(a.positions.data(), b.positions.data(), sizeof(double) * a.positions.size()));
}

TEST(ModelSerialization, RejectsInconsistentDofOrder) {
  nlohmann::json j = model_to_json(build_default_upper_body(Side::Right));
  j["dof_order"][0] = "bogus";
  EXPECT_THROW(model_from_json(j), ContractError);
  nlohmann::json k = model_to_json(build_default_upper_body(Side::Right));
  k["joints"][0]["dofs"][0]["kind"] = "spiral";
  EXPECT_THROW(model_from_json(k), ContractError);
}
