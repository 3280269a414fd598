#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "mmcfit/measures.hpp"
#include "mmcfit/synthetic.hpp"
#include "oracles.hpp"

using namespace mmc;

namespace {

constexpr double kPi = std::numbers::pi;

double uniform(std::mt19937_64& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

// A * sin^2(pi (t - t0) / d) on [t0, t0 + d], zero elsewhere.
struct Bell {
  double t0, d, amp;
  double operator()(double t) const {
    if (t <= t0 || t >= t0 + d) return 0.0;
    const double s = std::sin(kPi * (t - t0) / d);
    return amp * s * s;
  }
  // times where the bell crosses `fraction` of its amplitude
  double rise(double fraction) const { return t0 + d * std::asin(std::sqrt(fraction)) / kPi; }
  double fall(double fraction) const { return t0 + d - d * std::asin(std::sqrt(fraction)) / kPi; }
};

struct Profile {
  double rate;
  std::array<Bell, 4> bells;
  double plateau;  // quiet drinking level between the second and third bell
  Eigen::VectorXd v;
};

Profile four_bells(std::mt19937_64& rng) {
  Profile p;
  p.rate = uniform(rng, 0.0, 1.0) < 0.5 ? 60.0 : 100.0;
  double t = uniform(rng, 0.3, 1.0);
  for (auto& b : p.bells) {
    b = {t, uniform(rng, 0.5, 1.4), uniform(rng, 0.25, 1.0)};
    t += b.d + uniform(rng, 0.25, 1.2);
  }
  p.plateau = uniform(rng, 0.0, 0.005);
  const int n = static_cast<int>((t + uniform(rng, 0.2, 1.0)) * p.rate);
  p.v.resize(n);
  for (int i = 0; i < n; ++i) {
    const double ti = i / p.rate;
    double x = 0.0;
    for (const auto& b : p.bells) x += b(ti);
    if (ti > p.bells[1].t0 + p.bells[1].d && ti < p.bells[2].t0) x += p.plateau;
    p.v[i] = x;
  }
  return p;
}

oracle::TrialArrays arrays(const TrajectorySeries& s) {
  auto vec = [&](ChannelId c) {
    const Eigen::VectorXd& v = s.channel(c);
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  return {s.rate,
          vec(ChannelId::EndEffectorVelocity),
          vec(ChannelId::ElbowAngularVelocity),
          vec(ChannelId::ElbowFlexion),
          vec(ChannelId::ShoulderFlexion),
          vec(ChannelId::ShoulderAbduction),
          vec(ChannelId::TrunkDisplacement)};
}

oracle::Cuts cuts(const PhaseSegmentation& seg) {
  return {static_cast<int>(seg.onset),
          static_cast<int>(seg[Phase::Forward].start),
          static_cast<int>(seg[Phase::Drinking].start),
          static_cast<int>(seg[Phase::Back].start),
          static_cast<int>(seg[Phase::Returning].start),
          static_cast<int>(seg[Phase::Rest].start)};
}

// Ground-truth series of a synthetic drinking trial.
TrajectorySeries synthetic_series(const BodyModel& model, std::uint64_t seed, int trial, double rate = 60.0) {
  SyntheticScenario sc;
  sc.seed = seed;
  return truth_series(model, generate_trajectory(model, sc, 0, trial), rate);
}

void expect_valid(const PhaseSegmentation& seg, Eigen::Index n) {
  ASSERT_EQ(seg.phases[0].start, 0);
  ASSERT_EQ(seg.frames(), n);
  for (std::size_t p = 0; p < 6; ++p) {
    ASSERT_EQ(seg.phases[p].phase, kPhases[p]);
    if (p > 0) ASSERT_EQ(seg.phases[p].start, seg.phases[p - 1].end);
    if (p < 5) ASSERT_LT(seg.phases[p].start, seg.phases[p].end);
  }
}

Eigen::VectorXd bell_series(double rate, double duration, const std::vector<Bell>& bells) {
  const int n = static_cast<int>(duration * rate) + 1;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    v[i] = 0.0;
    for (const auto& b : bells) v[i] += b(i / rate);
  }
  return v;
}

std::vector<int> to_int(const std::vector<Eigen::Index>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(ClassifyPhases, FourBellsGiveAnalyticBoundaries) {
  std::mt19937_64 rng(51);
  for (int k = 0; k < 1000; ++k) {
    const Profile p = four_bells(rng);
    const PhaseSegmentation seg = classify_phases(p.v, p.rate);
    expect_valid(seg, p.v.size());
    // first sample above the threshold on a rise, first at or below it on a fall
    auto rise = [&](const Bell& b) { return std::floor(b.rise(0.05) * p.rate) + 1.0; };
    auto fall = [&](const Bell& b) { return std::ceil(b.fall(0.05) * p.rate); };
    const auto& b = p.bells;
    ASSERT_NEAR(static_cast<double>(seg.onset), rise(b[0]), 1.0);
    ASSERT_NEAR(static_cast<double>(seg[Phase::Forward].start), fall(b[0]), 1.0);
    ASSERT_NEAR(static_cast<double>(seg[Phase::Drinking].start), fall(b[1]), 1.0);
    ASSERT_NEAR(static_cast<double>(seg[Phase::Back].start), rise(b[2]), 1.0);
    ASSERT_NEAR(static_cast<double>(seg[Phase::Returning].start), fall(b[2]), 1.0);
    ASSERT_NEAR(static_cast<double>(seg[Phase::Rest].start), fall(b[3]), 1.0);
  }
}

TEST(ClassifyPhases, SyntheticTrialsAlwaysGiveSixContiguousPhases) {
  const BodyModel model = build_default_upper_body(Side::Right);
  for (int k = 0; k < 1000; ++k) {
    const TrajectorySeries s = synthetic_series(model, 100 + k / 10, k % 10);
    expect_valid(classify_phases(s.channel(ChannelId::EndEffectorVelocity), s.rate), s.length());
  }
}

TEST(ClassifyPhases, NoCycleIsASegmentationFailure) {
  EXPECT_THROW(classify_phases(Eigen::VectorXd::Zero(300), 60.0), SegmentationError);
  EXPECT_THROW(classify_phases(Eigen::VectorXd::Constant(300, 0.04), 60.0), SegmentationError);
  // a single burst is not a drinking cycle
  EXPECT_THROW(classify_phases(bell_series(60.0, 3.0, {{1.0, 0.8, 0.5}}), 60.0), SegmentationError);
  Eigen::VectorXd bad = bell_series(60.0, 3.0, {{1.0, 0.8, 0.5}});
  bad[10] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(classify_phases(bad, 60.0), SegmentationError);
}

TEST(MovementUnits, Examples) {
  EXPECT_EQ(count_movement_units(bell_series(60.0, 2.0, {{0.5, 1.0, 0.6}}), 60.0), 1);
  // two 0.5 m/s bells, peaks 500 ms apart, trough at 0.1 m/s
  std::vector<double> two(200);
  for (int i = 0; i < 200; ++i) {
    const double t = i / 100.0;
    two[i] = 0.1 + 0.4 * std::pow(std::cos(kPi * (t - 0.5) / 0.5), 2) * (t > 0.25 && t < 1.25 ? 1.0 : 0.0);
  }
  const Eigen::VectorXd twov = Eigen::Map<Eigen::VectorXd>(two.data(), 200);
  EXPECT_EQ(count_movement_units(twov, 100.0), 2);
  EXPECT_EQ(oracle::peaks(two, 0.02, 15).size(), 2u);
  // a ripple of prominence 0.005 m/s on the rising flank
  Eigen::VectorXd ripple = bell_series(100.0, 2.0, {{0.5, 1.0, 0.6}});
  for (int i = 0; i < ripple.size(); ++i) {
    const double t = i / 100.0;
    if (t > 0.7 && t < 0.8) ripple[i] += 0.005 * std::sin(kPi * (t - 0.7) / 0.1) * 4.0;
  }
  EXPECT_EQ(count_movement_units(ripple, 100.0), 1);
  EXPECT_THROW(count_movement_units(Eigen::VectorXd(), 60.0), ContractError);
}

TEST(MovementUnits, MatchBruteForceEnumeration) {
  std::mt19937_64 rng(52);
  for (int k = 0; k < 2000; ++k) {
    const double rate = k % 2 ? 60.0 : 100.0;
    const double duration = uniform(rng, 1.0, 4.0);
    std::vector<Bell> bells;
    const int nb = 1 + static_cast<int>(uniform(rng, 0.0, 6.0));
    for (int b = 0; b < nb; ++b) bells.push_back({uniform(rng, -0.3, duration), uniform(rng, 0.1, 1.0), uniform(rng, 0.01, 0.8)});
    Eigen::VectorXd v = bell_series(rate, duration, bells);
    const double noise = k % 3 == 0 ? 0.0 : uniform(rng, 0.0, 0.02);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += noise * g(rng);
    if (k % 7 == 0)  // plateaus
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::round(v[i] * 20.0) / 20.0;
    const std::vector<double> raw(v.data(), v.data() + v.size());
    const int distance = static_cast<int>(std::lround(0.15 * rate));
    ASSERT_EQ(to_int(movement_unit_peaks(v, rate)), oracle::peaks(raw, 0.02, distance)) << "case " << k;
  }
}

TEST(MovementUnits, CountSurvivesResamplingBetween100And60Hz) {
  std::mt19937_64 rng(53);
  for (int k = 0; k < 1000; ++k) {
    // peaks at least 0.3 s apart with deep troughs between them
    std::vector<Bell> bells;
    double t = uniform(rng, 0.2, 0.5);
    const int nb = 1 + static_cast<int>(uniform(rng, 0.0, 5.0));
    for (int b = 0; b < nb; ++b) {
      const double d = uniform(rng, 0.35, 0.9);
      bells.push_back({t, d, uniform(rng, 0.15, 0.8)});
      t += d * uniform(rng, 0.75, 1.3);
    }
    const double duration = t + 0.5;
    for (double from : {100.0, 60.0}) {
      const double to = from == 100.0 ? 60.0 : 100.0;
      TrajectorySeries s;
      s.rate = from;
      s.channels[ChannelId::EndEffectorVelocity] = bell_series(from, duration, bells);
      const TrajectorySeries r = resample(s, to);
      ASSERT_EQ(count_movement_units(s.channel(ChannelId::EndEffectorVelocity), from),
                count_movement_units(r.channel(ChannelId::EndEffectorVelocity), to))
          << "case " << k;
    }
  }
}

TEST(ComputeMeasures, SingleBellInReaching) {
  const double rate = 60.0;
  const int n = 180;
  TrajectorySeries s;
  s.rate = rate;
  // 0.6 m/s peak at 0.4 s
  s.channels[ChannelId::EndEffectorVelocity] = bell_series(rate, (n - 1) / rate, {{0.0, 0.8, 0.6}});
  for (ChannelId c : {ChannelId::ElbowAngularVelocity, ChannelId::ElbowFlexion, ChannelId::ShoulderFlexion,
                      ChannelId::ShoulderAbduction, ChannelId::TrunkDisplacement})
    s.channels[c] = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
  PhaseSegmentation seg;
  seg.rate = rate;
  seg.onset = 0;
  const std::array<Eigen::Index, 7> c{0, 48, 70, 90, 110, 130, n};
  for (std::size_t p = 0; p < 6; ++p) seg.phases[p] = {kPhases[p], c[p], c[p + 1]};
  const MeasureSet m = compute_measures(s, seg);
  EXPECT_NEAR(m.peak_velocity, 0.6, 1e-12);
  EXPECT_NEAR(m.time_to_pv, 0.4, 1e-12);
  EXPECT_NEAR(m.time_to_first_pv, 0.4, 1e-12);
  EXPECT_EQ(m.n_movement_units, 1.0);
  EXPECT_NEAR(m.total_movement_time, 130 / rate, 1e-12);
}

TEST(ComputeMeasures, LinearReachGivesPerfectCoordination) {
  const BodyModel model = build_default_upper_body(Side::Right);
  TrajectorySeries s = synthetic_series(model, 7, 0);
  const PhaseSegmentation seg = classify_phases(s.channel(ChannelId::EndEffectorVelocity), s.rate);
  const Eigen::Index n = s.length();
  // elbow extends while the shoulder flexes, both linearly
  s.channels[ChannelId::ElbowFlexion] = Eigen::VectorXd::LinSpaced(n, 120.0, 20.0);
  s.channels[ChannelId::ShoulderFlexion] = Eigen::VectorXd::LinSpaced(n, 5.0, 80.0);
  EXPECT_NEAR(compute_measures(s, seg).interjoint_coordination, 1.0, 1e-12);
}

TEST(ComputeMeasures, MatchNaiveScript) {
  const BodyModel model = build_default_upper_body(Side::Right);
  for (int k = 0; k < 200; ++k) {
    const TrajectorySeries s = synthetic_series(model, 300 + k, k % 4, k % 3 ? 60.0 : 100.0);
    const PhaseSegmentation seg = classify_phases(s.channel(ChannelId::EndEffectorVelocity), s.rate);
    const auto got = measure_values(compute_measures(s, seg));
    const auto want = oracle::measures(arrays(s), cuts(seg));
    for (std::size_t i = 0; i < 12; ++i)
      ASSERT_NEAR(got[i], want[i], 1e-9 * std::max(1.0, std::abs(want[i]))) << kMeasureColumns[i] << " case " << k;
  }
}

TEST(ComputeMeasures, InvariantToTimeShift) {
  const BodyModel model = build_default_upper_body(Side::Right);
  std::mt19937_64 rng(54);
  for (int k = 0; k < 1000; ++k) {
    const TrajectorySeries s = synthetic_series(model, 500 + k / 5, k % 5);
    const PhaseSegmentation seg = classify_phases(s.channel(ChannelId::EndEffectorVelocity), s.rate);
    const auto base = measure_values(compute_measures(s, seg));
    // shift the clock and prepend rest frames holding the first sample
    const int pad = static_cast<int>(uniform(rng, 1.0, 30.0));
    TrajectorySeries shifted;
    shifted.rate = s.rate;
    shifted.t0 = s.t0 + uniform(rng, -5.0, 5.0);
    for (const auto& [c, v] : s.channels) {
      Eigen::VectorXd w(v.size() + pad);
      w.head(pad).setConstant(c == ChannelId::EndEffectorVelocity || c == ChannelId::ElbowAngularVelocity ? 0.0 : v[0]);
      w.tail(v.size()) = v;
      shifted.channels[c] = w;
    }
    const PhaseSegmentation seg2 = classify_phases(shifted.channel(ChannelId::EndEffectorVelocity), shifted.rate);
    ASSERT_EQ(seg2.onset, seg.onset + pad);
    const auto moved = measure_values(compute_measures(shifted, seg2));
    for (std::size_t i = 0; i < 12; ++i) ASSERT_NEAR(moved[i], base[i], 1e-12 * std::max(1.0, std::abs(base[i]))) << kMeasureColumns[i];
  }
}

TEST(ComputeMeasures, FirstPeakNeverAfterPeak) {
  const BodyModel model = build_default_upper_body(Side::Right);
  std::mt19937_64 rng(55);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    TrajectorySeries s = synthetic_series(model, 900 + k / 5, k % 5);
    // noisy speed creates extra units in the reach
    Eigen::VectorXd& v = s.channels[ChannelId::EndEffectorVelocity];
    const double sigma = uniform(rng, 0.0, 0.03);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::abs(v[i] + sigma * g(rng));
    PhaseSegmentation seg;
    try {
      seg = classify_phases(v, s.rate);
    } catch (const SegmentationError&) {
      continue;
    }
    const MeasureSet m = compute_measures(s, seg);
    ASSERT_LE(m.time_to_first_pv, m.time_to_pv);
    ASSERT_GE(m.time_to_first_pv, 0.0);
    ASSERT_GE(m.n_movement_units, 1.0);
    ASSERT_GE(m.total_movement_time, 0.0);
    // undefined (NaN) when a noise burst makes the reach static
    ASSERT_TRUE(std::isnan(m.interjoint_coordination) || std::abs(m.interjoint_coordination) <= 1.0);
  }
}

TEST(ComputeMeasures, CoordinationInvariantUnderPositiveAffineMaps) {
  const BodyModel model = build_default_upper_body(Side::Right);
  std::mt19937_64 rng(56);
  for (int k = 0; k < 1000; ++k) {
    TrajectorySeries s = synthetic_series(model, 1300 + k / 5, k % 5);
    const PhaseSegmentation seg = classify_phases(s.channel(ChannelId::EndEffectorVelocity), s.rate);
    const double r = compute_measures(s, seg).interjoint_coordination;
    const ChannelId which = k % 2 ? ChannelId::ElbowFlexion : ChannelId::ShoulderFlexion;
    Eigen::VectorXd& c = s.channels[which];
    c = (c.array() * uniform(rng, 0.01, 100.0) + uniform(rng, -100.0, 100.0)).matrix();
    ASSERT_NEAR(compute_measures(s, seg).interjoint_coordination, r, 1e-12);
  }
}

TEST(ComputeMeasures, MissingChannelIsNamed) {
  const BodyModel model = build_default_upper_body(Side::Right);
  TrajectorySeries s = synthetic_series(model, 1, 0);
  const PhaseSegmentation seg = classify_phases(s.channel(ChannelId::EndEffectorVelocity), s.rate);
  s.channels.erase(ChannelId::TrunkDisplacement);
  try {
    compute_measures(s, seg);
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("trunk_displacement"), std::string::npos);
  }
}

TEST(ComputeMeasures, RejectsSegmentationOfAnotherLength) {
  const BodyModel model = build_default_upper_body(Side::Right);
  const TrajectorySeries s = synthetic_series(model, 1, 0);
  const TrajectorySeries t = synthetic_series(model, 1, 1);
  const PhaseSegmentation seg = classify_phases(t.channel(ChannelId::EndEffectorVelocity), t.rate);
  if (t.length() != s.length()) EXPECT_THROW(compute_measures(s, seg), ContractError);
}

TEST(MeasureSet, ValuesRoundTrip) {
  std::array<double, 12> v{};
  for (std::size_t i = 0; i < 12; ++i) v[i] = 0.5 + static_cast<double>(i);
  EXPECT_EQ(measure_values(measures_from_values(v)), v);
}
