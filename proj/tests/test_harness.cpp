#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "qkdioc/errors.hpp"
#include "qkdioc/harness.hpp"
#include "qkdioc/serialization.hpp"
#include "support.hpp"

using namespace qkdioc;
using namespace qkdioc::harness;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("qkdioc-test-" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Scenario, BundledFilesParseAndRoundTrip) {
  for (const char* name : fixtures::kBundled) {
    const Scenario s = fixtures::bundled(name);
    EXPECT_EQ(s.name, name);
    const Scenario again = scenario_from_json(scenario_to_json(s));
    EXPECT_EQ(scenario_to_json(again).dump(), scenario_to_json(s).dump()) << name;
  }
}

TEST(Scenario, StrictKeysAndTypes) {
  json j = scenario_to_json(fixtures::bundled("nominal"));
  j["colour"] = 1;
  EXPECT_THROW(scenario_from_json(j), ValidationError);
  j = scenario_to_json(fixtures::bundled("nominal"));
  j["detector"]["efficency"] = 0.5;
  EXPECT_THROW(scenario_from_json(j), ValidationError);
  j = scenario_to_json(fixtures::bundled("nominal"));
  j["source"]["mu"] = "lots";
  EXPECT_THROW(scenario_from_json(j), ValidationError);
  EXPECT_THROW(parse_scenario("{"), ParseError);
  EXPECT_THROW(load_scenario("/nonexistent/x.scn"), IoError);
}

TEST(Scenario, BlindingBelowThresholdFailsBeforeSimulation) {
  json j = scenario_to_json(fixtures::bundled("blinding-default"));
  j["attack"]["cw_power"] = 1e-9;
  EXPECT_THROW(scenario_from_json(j), ValidationError);
}

TEST(Scenario, LinkHashIgnoresAttackAndSeed) {
  const Scenario a = fixtures::bundled("after-gate");
  Scenario b = a;
  b.attack.reset();
  b.seed = 7;
  EXPECT_EQ(link_hash(a), link_hash(b));
  b.detector.afterpulse_prob *= 2;
  EXPECT_NE(link_hash(a), link_hash(b));
}

TEST(Baseline, SaveLoadRoundTrip) {
  const Scenario s = fixtures::bundled("nominal");
  const ioc::Baseline b = calibrate(s);
  const fs::path dir = temp_dir("baseline");
  const fs::path p = baseline_path(dir, b.link_hash);
  save_baseline(b, p);
  const ioc::Baseline c = load_baseline(p);
  EXPECT_EQ(serial::to_json(b).dump(), serial::to_json(c).dump());
  fs::remove_all(dir);
}

TEST(Run, MissingBaselineIsReported) {
  Scenario s = fixtures::bundled("nominal");
  s.calibration_run = false;
  EXPECT_THROW(run_scenario(s), MissingBaseline);
  RunOptions opts;
  opts.baseline_dir = temp_dir("missing");
  EXPECT_THROW(run_scenario(s, opts), MissingBaseline);
}

TEST(Run, StoredBaselineReproducesCalibratedRun) {
  const fs::path dir = temp_dir("reuse");
  Scenario s = fixtures::bundled("after-gate");
  RunOptions opts;
  opts.baseline_dir = dir;
  const json first = report_to_json(run_scenario(s, opts).report);
  s.calibration_run = false;
  json second = report_to_json(run_scenario(s, opts).report);
  second["scenario"]["calibration_run"] = true;
  EXPECT_EQ(first.dump(), second.dump());
  fs::remove_all(dir);
}

TEST(Run, NominalIsQuiet) {
  const auto r = run_scenario(fixtures::bundled("nominal")).report;
  EXPECT_TRUE(r.findings.empty());
  EXPECT_TRUE(r.candidates.empty());
  EXPECT_FALSE(r.ground_truth);
}

TEST(Run, BlindingRanksDetectorBlindingFirst) {
  const auto r = run_scenario(fixtures::bundled("blinding-default")).report;
  ASSERT_FALSE(r.candidates.empty());
  EXPECT_EQ(r.candidates[0].id, "det-blinding");
  EXPECT_TRUE(*r.verdict_match);
}

TEST(Run, InterceptResendShowsQberNotPower) {
  const auto r = run_scenario(fixtures::bundled("intercept-resend")).report;
  bool qber_alarm = false;
  for (const auto& f : r.findings) {
    EXPECT_NE(f.ioc_class, IoCClass::received_power());
    qber_alarm |= f.ioc_class == IoCClass::qber() && f.severity == Severity::Alarm;
  }
  EXPECT_TRUE(qber_alarm);
}

TEST(Run, JammingShowsPowerDamage) {
  const auto r = run_scenario(fixtures::bundled("jamming-dos")).report;
  bool damage = false;
  for (const auto& f : r.findings)
    damage |= f.ioc_class == IoCClass::received_power() && f.severity == Severity::Damage;
  EXPECT_TRUE(damage);
}

// Invariants over every bundled scenario.
TEST(Run, ReportInvariants) {
  for (const char* name : fixtures::kBundled) {
    const RunResult res = run_scenario(fixtures::bundled(name));
    const json j = report_to_json(res.report);
    for (const auto& f : res.report.findings) EXPECT_TRUE(f.holds()) << name << ": " << f.detail;
    if (res.report.ground_truth)
      EXPECT_EQ(*res.report.verdict_match,
                verdict_from(res.report.candidates, *res.report.ground_truth, res.report.top_k));

    // Pooled QBER recomputed from the disclosed bits in the session log.
    const json log = serial::session_to_json(res.record);
    const auto& key = res.record.sifted_key;
    std::uint64_t errors = 0;
    const auto positions = log["disclosed_positions"].get<std::vector<std::uint64_t>>();
    for (auto p : positions) errors += key.alice_bits[p] != key.bob_bits[p];
    const double q = positions.empty() ? 0.0 : static_cast<double>(errors) / static_cast<double>(positions.size());
    EXPECT_DOUBLE_EQ(j["summary"]["pooled_qber"].get<double>(), q) << name;
    EXPECT_FALSE(render_text(j).empty());
  }
}

TEST(Report, ExplainNamesChains) {
  const json j = report_to_json(run_scenario(fixtures::bundled("blinding-default")).report);
  const auto text = explain_report(j, taxonomy::load_kb(taxonomy::canonical_kb_path()));
  EXPECT_NE(text.find("real_time.photocurrent"), std::string::npos);
  EXPECT_NE(text.find("det-blinding"), std::string::npos);
}
