#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "qkdioc/errors.hpp"
#include "qkdioc/ioc.hpp"

using namespace qkdioc;
using namespace qkdioc::ioc;

namespace {

const MonitorConfig kCfg{};

std::vector<std::uint32_t> poisson_counts(double mu, std::size_t n, std::uint64_t seed) {
  optics::SourceParams s;
  s.mu = mu;
  Engine rng = RngStreams(seed).stream("tap");
  std::vector<std::uint32_t> out(n);
  for (auto& c : out) c = optics::sample_photon_number(s, rng);
  return out;
}

optics::DetectionEvent click(std::uint64_t slot, std::uint8_t d) {
  optics::DetectionEvent e;
  e.slot = slot;
  e.detector_id = d;
  e.click = true;
  e.timetag = static_cast<double>(slot) * 1e-6;
  return e;
}

protocol::QberWindow window(std::uint64_t id, std::uint64_t errors, std::uint64_t total) {
  protocol::QberWindow w;
  w.window_id = id;
  w.slot_range = {id * 100, id * 100 + 100};
  w.error_bits = errors;
  w.total_bits = total;
  w.qber = static_cast<double>(errors) / static_cast<double>(total);
  return w;
}

// Click stream from a detector with a known afterpulse hazard over a steady background.
std::vector<optics::DetectionEvent> synthetic_clicks(double p_indep, double p_after, std::uint32_t decay,
                                                     std::uint64_t slots, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<optics::DetectionEvent> out;
  std::array<double, 2> hazard{0, 0};
  const double q = std::exp(-1.0 / decay);
  for (std::uint64_t s = 0; s < slots; ++s) {
    for (std::uint8_t d = 0; d < 2; ++d) {
      const bool c = u(rng) < p_indep || u(rng) < hazard[d];
      hazard[d] *= q;
      if (c) {
        out.push_back(click(s, d));
        hazard[d] += p_after;
      }
    }
  }
  return out;
}

}  // namespace

TEST(Tokens, IoCClassRoundTrip) {
  for (int i = 0; i < IoCClass::kCount; ++i) {
    const IoCClass c = IoCClass::from_ordinal(i);
    EXPECT_EQ(IoCClass::from_token(c.token()), c);
  }
  EXPECT_EQ(IoCClass::qber().token(), "qber");
  EXPECT_EQ(IoCClass::real_time(RealTimeKind::Photocurrent).token(), "real_time.photocurrent");
  EXPECT_EQ(IoCClass::received_power().token(), "received_power");
  EXPECT_FALSE(IoCClass::from_token("real_time"));
  for (Severity s : {Severity::Advisory, Severity::Alarm, Severity::Damage})
    EXPECT_EQ(severity_from_token(severity_token(s)), s);
}

TEST(Findings, HoldsReappliesComparison) {
  IoCFinding f;
  f.measured = 0.2;
  f.threshold = 0.12;
  f.comparison = Comparison::Greater;
  EXPECT_TRUE(f.holds());
  f.measured = 0.12;
  EXPECT_FALSE(f.holds());
  f.comparison = Comparison::AtLeast;
  EXPECT_TRUE(f.holds());
  f.comparison = Comparison::AbsDeviationGreater;
  f.measured = 1.0;
  f.reference = 1.5;
  f.threshold = 0.4;
  EXPECT_TRUE(f.holds());
  f.comparison = Comparison::ExcessOver;
  EXPECT_FALSE(f.holds());
}

TEST(QberMonitor, BandsAreStrict) {
  const std::vector<protocol::QberWindow> w{window(0, 80, 1000), window(1, 81, 1000), window(2, 120, 1000),
                                            window(3, 121, 1000)};
  const auto f = qber_monitor(w, kCfg);
  // 0.080 is quiet, 0.081 and 0.120 are advisories, 0.121 alarms.
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].severity, Severity::Advisory);
  EXPECT_EQ(f[0].window.begin, 100u);
  EXPECT_EQ(f[1].severity, Severity::Advisory);
  EXPECT_EQ(f[2].severity, Severity::Alarm);
  EXPECT_DOUBLE_EQ(f[2].measured, 0.121);
}

TEST(QberMonitor, PermutationInvariant) {
  std::vector<protocol::QberWindow> w;
  for (std::uint64_t i = 0; i < 12; ++i) w.push_back(window(i, 60 + 7 * i, 1000));
  const auto ref = qber_monitor(w, kCfg);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(w.begin(), w.end(), rng);
    const auto got = qber_monitor(w, kCfg);
    ASSERT_EQ(got.size(), ref.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].window, ref[i].window);
      EXPECT_EQ(got[i].severity, ref[i].severity);
    }
  }
}

TEST(PhotocurrentMonitor, BoundIsInclusive) {
  const std::vector<std::int64_t> at{0, 8100, 8100, 10};
  EXPECT_TRUE(photocurrent_monitor(at, kCfg).empty());
  const std::vector<std::int64_t> over{0, 8101, 0};
  const auto f = photocurrent_monitor(over, kCfg);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].severity, Severity::Alarm);
  EXPECT_DOUBLE_EQ(f[0].measured, 8101);
  EXPECT_TRUE(f[0].holds());
}

TEST(PhotocurrentMonitor, OneAlarmPerRunCarryingPeak) {
  const std::vector<std::int64_t> s{9000, 9500, 100, 8200, 0, 0, 9999, 8101};
  const auto f = photocurrent_monitor(s, kCfg);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_DOUBLE_EQ(f[0].measured, 9500);
  EXPECT_EQ(f[0].window, (SlotRange{0, 2}));
  EXPECT_DOUBLE_EQ(f[2].measured, 9999);
  EXPECT_EQ(f[2].window, (SlotRange{6, 8}));
}

// Property: no finding iff max(samples) <= photocurrent_max.
TEST(PhotocurrentMonitor, EmptyIffMaxWithinBound) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> d(0, 8200);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::int64_t> s(50);
    for (auto& v : s) v = d(rng);
    const bool within = *std::max_element(s.begin(), s.end()) <= 8100;
    EXPECT_EQ(photocurrent_monitor(s, kCfg).empty(), within);
  }
  const std::vector<std::int64_t> neg{1, -1};
  EXPECT_THROW(photocurrent_monitor(neg, kCfg), ValidationError);
}

TEST(PowerMonitor, ExactThresholds) {
  const std::pair<double, PowerClass> table[] = {
      {1e-16, PowerClass::Nominal},         {1e-15, PowerClass::NoiseSaturated}, {1e-4, PowerClass::NoiseSaturated},
      {1e-3, PowerClass::ThermalBlinding},  {1e2, PowerClass::ThermalBlinding},  {1e3, PowerClass::Melting},
      {1e4, PowerClass::Melting}};
  for (const auto& [p, cls] : table) EXPECT_EQ(classify_power(p, kCfg), cls) << p;
}

TEST(PowerMonitor, SeverityByClass) {
  EXPECT_FALSE(power_monitor(1e-16, kCfg).finding);
  EXPECT_EQ(power_monitor(1e-10, kCfg).finding->severity, Severity::Alarm);
  EXPECT_EQ(power_monitor(1e-3, kCfg).finding->severity, Severity::Damage);
  EXPECT_EQ(power_monitor(1e4, kCfg).finding->severity, Severity::Damage);
  EXPECT_TRUE(power_monitor(1e-3, kCfg).finding->holds());
  EXPECT_THROW(power_monitor(-1.0, kCfg), ValidationError);
}

// Property: classification is a monotone step function of power.
TEST(PowerMonitor, Monotone) {
  int last = 0;
  for (double e = -20.0; e <= 6.0; e += 0.01) {
    const int c = static_cast<int>(classify_power(std::pow(10.0, e), kCfg));
    EXPECT_GE(c, last);
    last = c;
  }
}

TEST(PhotonStats, HonestSourcePassesAndReportsTail) {
  const auto counts = poisson_counts(0.1, 1000000, 1);
  const auto r = photon_stats_monitor(counts, 0.1, kCfg);
  EXPECT_TRUE(r.result.findings.empty());
  EXPECT_TRUE(r.goodness_of_fit_passed);
  EXPECT_NEAR(r.multiphoton_fraction, oracle::kMultiphotonMu01, 4 * std::sqrt(oracle::kMultiphotonMu01 / 1e6));
  EXPECT_NEAR(r.ci_half_width, 2.576 * std::sqrt(0.1 / 1e6), 2e-5);
}

TEST(PhotonStats, MisdeclaredSourceAlarms) {
  const auto counts = poisson_counts(0.2, 1000000, 2);
  const auto r = photon_stats_monitor(counts, 0.1, kCfg);
  const auto alarm = std::find_if(r.result.findings.begin(), r.result.findings.end(),
                                  [](const IoCFinding& f) { return f.severity == Severity::Alarm; });
  ASSERT_NE(alarm, r.result.findings.end());
  EXPECT_TRUE(alarm->holds());
  EXPECT_FALSE(r.goodness_of_fit_passed);
}

TEST(PhotonStats, DegenerateZeroMu) {
  const std::vector<std::uint32_t> zeros(20000, 0);
  EXPECT_TRUE(photon_stats_monitor(zeros, 0.0, kCfg).result.findings.empty());
}

TEST(PhotonStats, TooFewSamplesIsInconclusive) {
  const std::vector<std::uint32_t> few(100, 0);
  const auto r = photon_stats_monitor(few, 0.1, kCfg);
  EXPECT_TRUE(r.result.inconclusive);
  EXPECT_TRUE(r.result.findings.empty());
}

// Property: under an honest source the chi-square test rejects at about its significance level.
TEST(PhotonStats, ChiSquareFalseRejectionRate) {
  int rejected = 0;
  const int trials = 200;
  for (int s = 0; s < trials; ++s)
    rejected += !photon_stats_monitor(poisson_counts(0.3, 20000, 100 + s), 0.3, kCfg).goodness_of_fit_passed;
  EXPECT_LE(rejected, 8);  // Binomial(200, 0.01): P(X > 8) < 0.001
}

TEST(Deadtime, SpacingAtSpecIsQuiet) {
  optics::DetectorParams det;
  det.adc_period = 1e-6;
  det.spec_deadtime = 3e-6;
  std::vector<optics::DetectionEvent> clicks;
  for (std::uint64_t s = 0; s < 3000; s += 3) clicks.push_back(click(s, 0));
  DeadtimeContext ctx{3000, 1e6, 10000, std::nullopt};
  const auto r = deadtime_monitor(clicks, ctx, det, kCfg);
  EXPECT_TRUE(r.findings.empty());
}

TEST(Deadtime, GapBeyondToleranceAlarms) {
  optics::DetectorParams det;
  det.adc_period = 1e-6;
  det.spec_deadtime = 3e-6;
  std::vector<optics::DetectionEvent> clicks;
  for (std::uint64_t s = 0; s < 8000; s += 8) clicks.push_back(click(s, 1));
  DeadtimeContext ctx{8000, 1e6, 10000, std::nullopt};
  const auto r = deadtime_monitor(clicks, ctx, det, kCfg);
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_EQ(r.findings[0].severity, Severity::Alarm);
  EXPECT_NEAR(r.findings[0].measured, 8e-6, 1e-12);
  EXPECT_TRUE(r.findings[0].holds());
}

TEST(Deadtime, StarvationAlarms) {
  optics::DetectorParams det;
  DeadtimeContext ctx{20000, 1e6, 10000, 0.05};
  const auto r = deadtime_monitor({}, ctx, det, kCfg);
  ASSERT_FALSE(r.findings.empty());
  EXPECT_NE(r.findings[0].detail.find("count starvation"), std::string::npos);
  EXPECT_TRUE(r.findings[0].holds());
}

TEST(Afterpulse, EstimatorRecoversInjectedExcess) {
  optics::DetectorParams det;
  det.afterpulse_decay_gates = 5;
  const auto quiet = synthetic_clicks(0.01, 0.0, 5, 400000, 1);
  const auto noisy = synthetic_clicks(0.01, 0.05, 5, 400000, 2);
  const auto a = estimate_afterpulse(quiet, 400000, det, kCfg);
  const auto b = estimate_afterpulse(noisy, 400000, det, kCfg);
  ASSERT_TRUE(a.valid && b.valid);
  EXPECT_NEAR(a.estimate, 0.0, 4 * a.standard_error);
  EXPECT_GT(b.estimate, a.estimate + 10 * b.standard_error);
}

TEST(Afterpulse, MonitorAlarmsAgainstCalibration) {
  optics::DetectorParams det;
  const auto base = estimate_afterpulse(synthetic_clicks(0.01, 0.002, 5, 300000, 3), 300000, det, kCfg);
  const auto same = synthetic_clicks(0.01, 0.002, 5, 300000, 4);
  const auto more = synthetic_clicks(0.01, 0.03, 5, 300000, 5);
  EXPECT_TRUE(afterpulse_monitor(same, 300000, det, base, kCfg).findings.empty());
  const auto r = afterpulse_monitor(more, 300000, det, base, kCfg);
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_TRUE(r.findings[0].holds());
  EXPECT_EQ(r.findings[0].ioc_class, IoCClass::real_time(RealTimeKind::Afterpulse));
}

TEST(Afterpulse, NoClicksIsInconclusive) {
  optics::DetectorParams det;
  const auto base = estimate_afterpulse(synthetic_clicks(0.01, 0.0, 5, 100000, 3), 100000, det, kCfg);
  const auto r = afterpulse_monitor({}, 100000, det, base, kCfg);
  EXPECT_TRUE(r.inconclusive);
  EXPECT_TRUE(afterpulse_monitor({}, 100000, det, std::nullopt, kCfg).inconclusive);
}

TEST(Config, MonitorValidation) {
  MonitorConfig c;
  c.qber_advisory = 0.2;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.power_thermal = 1e-20;
  EXPECT_THROW(c.validate(), ValidationError);
}
