// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qkdioc/harness.hpp"
#include "qkdioc/ioc.hpp"
#include "support.hpp"

using namespace qkdioc;
using harness::Scenario;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

harness::ForensicReport run(const Scenario& s) { return harness::run_scenario(s).report; }

Scenario with_seed(Scenario s, std::uint64_t seed) {
  s.seed = seed;
  return s;
}

bool has(const harness::ForensicReport& r, const IoCClass& c, Severity min) {
  return std::any_of(r.findings.begin(), r.findings.end(),
                     [&](const IoCFinding& f) { return f.ioc_class == c && f.severity >= min; });
}

Outcome intercept_resend() {
  const auto frac = oracle::intercept_resend_error();
  const bool exact = frac.num == 1 && frac.den == 4;
  const Scenario base = fixtures::bundled("intercept-resend");
  double lo = 1, hi = 0, slowest = 0;
  bool ok = exact;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run(with_seed(base, seed));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double q = r.summary.pooled_qber;
    lo = std::min(lo, q);
    hi = std::max(hi, q);
    slowest = std::max(slowest, secs);
    ok = ok && q >= 0.24 && q <= 0.26 && secs < 10.0 && r.summary.num_slots == 100000;
  }
  return {ok, fmt("case table %lld/%lld; QBER range [%.4f, %.4f] over 10 seeds; slowest %.2f s",
                  static_cast<long long>(frac.num), static_cast<long long>(frac.den), lo, hi, slowest)};
}

Outcome phase_remap() {
  const auto r = run(fixtures::bundled("phase-remap"));
  const double q = r.summary.pooled_qber;
  const bool alarm = has(r, IoCClass::qber(), Severity::Alarm);
  const bool ok = q >= 0.187 && q <= 0.207 && r.summary.disclosed_bits >= 100000 && alarm;
  return {ok, fmt("QBER %.4f over %llu sifted bits; qber alarm %s", q,
                  static_cast<unsigned long long>(r.summary.disclosed_bits), alarm ? "yes" : "no")};
}

Outcome blinding() {
  const auto r = run(fixtures::bundled("blinding-default"));
  const double dq = std::abs(r.summary.pooled_qber - r.baseline->pooled_qber);
  int photocurrent = 0;
  bool starvation = false;
  for (const auto& f : r.findings) {
    if (f.ioc_class == IoCClass::real_time(RealTimeKind::Photocurrent) && f.severity == Severity::Alarm)
      ++photocurrent;
    if (f.ioc_class == IoCClass::real_time(RealTimeKind::Deadtime) &&
        f.detail.find("count starvation") != std::string::npos)
      starvation = true;
  }
  const bool ok = dq <= 0.005 && photocurrent >= 1 && starvation && r.summary.eve_known_fraction == 1.0;
  return {ok, fmt("|dQBER| %.4f; photocurrent alarms %d; starvation %s; Eve knows %.4f of sifted bits", dq,
                  photocurrent, starvation ? "yes" : "no", r.summary.eve_known_fraction)};
}

Outcome pns() {
  const double oracle_share = oracle::multiphoton_share(0.5);
  const auto r = run(fixtures::bundled("pns"));
  const double n = static_cast<double>(r.summary.sifted_length);
  const double p = oracle::kPnsShareMu05;
  const double sigma = std::sqrt(p * (1 - p) / n);
  const double known = r.summary.eve_known_fraction;
  const double q1 = r.summary.pooled_qber, q0 = r.baseline->pooled_qber;
  const double n0 = static_cast<double>(r.baseline->sifted_length);
  const double pooled = (q1 * n + q0 * n0) / (n + n0);
  const double qsigma = std::sqrt(pooled * (1 - pooled) * (1 / n + 1 / n0));
  const bool ok = std::abs(oracle_share - p) < 5e-5 && std::abs(known - p) <= 3 * sigma &&
                  std::abs(q1 - q0) <= 3 * qsigma;
  return {ok, fmt("known fraction %.4f vs %.4f (3 sigma %.4f, brute force %.6f); QBER %.4f vs baseline %.4f", known,
                  p, 3 * sigma, oracle_share, q1, q0)};
}

Outcome power_thresholds() {
  const ioc::MonitorConfig cfg;
  const std::pair<double, ioc::PowerClass> table[] = {
      {1e-16, ioc::PowerClass::Nominal},         {1e-15, ioc::PowerClass::NoiseSaturated},
      {1e-4, ioc::PowerClass::NoiseSaturated},   {1e-3, ioc::PowerClass::ThermalBlinding},
      {1e2, ioc::PowerClass::ThermalBlinding},   {1e3, ioc::PowerClass::Melting},
      {1e4, ioc::PowerClass::Melting}};
  std::string got;
  bool ok = true;
  for (const auto& [w, cls] : table) {
    const auto c = ioc::classify_power(w, cfg);
    ok = ok && c == cls;
    got += (got.empty() ? "" : ", ") + std::string(ioc::power_class_token(c));
  }
  return {ok, got};
}

Outcome photocurrent_bound() {
  const ioc::MonitorConfig cfg;
  const std::vector<std::int64_t> at{8100}, over{8101};
  const auto a = ioc::photocurrent_monitor(at, cfg);
  const auto b = ioc::photocurrent_monitor(over, cfg);
  const bool ok = a.empty() && b.size() == 1 && b[0].severity == Severity::Alarm && b[0].measured == 8101;
  return {ok, fmt("8100 -> %zu findings; 8101 -> %zu findings", a.size(), b.size())};
}

std::vector<std::uint32_t> tap(double mu, std::uint64_t seed) {
  optics::SourceParams s;
  s.mu = mu;
  Engine rng = RngStreams(seed).stream("source");
  std::vector<std::uint32_t> out(1000000);
  for (auto& c : out) c = optics::sample_photon_number(s, rng);
  return out;
}

Outcome photon_stats() {
  const ioc::MonitorConfig cfg;
  int honest_pass = 0, misdeclared_alarm = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    honest_pass += ioc::photon_stats_monitor(tap(0.1, seed), 0.1, cfg).goodness_of_fit_passed;
    const auto r = ioc::photon_stats_monitor(tap(0.2, 1000 + seed), 0.1, cfg);
    misdeclared_alarm += std::any_of(r.result.findings.begin(), r.result.findings.end(),
                                     [](const IoCFinding& f) { return f.severity == Severity::Alarm; });
  }
  return {honest_pass >= 95 && misdeclared_alarm == 100,
          fmt("honest chi-square pass %d/100; mis-declared alarm %d/100", honest_pass, misdeclared_alarm)};
}

const IoCFinding* afterpulse_finding(const harness::ForensicReport& r) {
  for (const auto& f : r.findings)
    if (f.ioc_class == IoCClass::real_time(RealTimeKind::Afterpulse)) return &f;
  return nullptr;
}

Outcome after_gate() {
  const Scenario s = fixtures::bundled("after-gate");
  const auto r = run(s);
  const IoCFinding* f = afterpulse_finding(r);
  const double sigma = s.monitors.afterpulse_sigma;
  const double z = f ? (f->measured - f->reference) / (f->threshold / sigma) : 0.0;
  Scenario control = s;
  control.attack.reset();
  int triggered = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) triggered += afterpulse_finding(run(with_seed(control, seed))) != nullptr;
  return {f != nullptr && z > 3.0 && triggered <= 2,
          fmt("attack excess %.1f standard errors; attack-free control triggered %d/100", z, triggered)};
}

Outcome false_positives() {
  const Scenario s = fixtures::bundled("nominal");
  int clean = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto r = run(with_seed(s, seed));
    clean += std::none_of(r.findings.begin(), r.findings.end(),
                          [](const IoCFinding& f) { return f.severity >= Severity::Alarm; });
  }
  return {clean >= 98, fmt("%d/100 seeds without alarms", clean)};
}

Outcome coverage() {
  const auto kb = taxonomy::load_kb(taxonomy::canonical_kb_path());
  bool ok = true;
  std::string detail;
  for (const char* name : fixtures::kBundled) {
    const Scenario s = fixtures::bundled(name);
    if (!s.attack) continue;
    const auto r = run(s);
    const auto* t = kb.find(attacks::technique_id(*s.attack));
    std::string mark;
    if (std::string(name) == "time-shift") {
      const bool quiet = r.findings.empty();
      ok = ok && quiet;
      mark = quiet ? "0 findings" : fmt("%zu findings", r.findings.size());
    } else if (t && !t->ioc_classes.empty()) {
      const bool in_set = std::any_of(r.findings.begin(), r.findings.end(),
                                      [&](const IoCFinding& f) { return t->ioc_classes.contains(f.ioc_class); });
      const bool match = r.verdict_match.value_or(false) && in_set;
      ok = ok && match;
      mark = match ? "match" : "MISS";
    } else {
      mark = "no ioc classes";
    }
    detail += (detail.empty() ? "" : "; ") + std::string(name) + " " + mark;
  }
  return {ok, detail};
}

Outcome determinism() {
  int identical = 0, total = 0;
  for (const char* name : fixtures::kBundled) {
    const Scenario s = fixtures::bundled(name);
    ++total;
    identical += harness::report_to_struct_text(run(s)) == harness::report_to_struct_text(run(s));
  }
  return {identical == total, fmt("%d/%d scenarios byte-identical", identical, total)};
}

Outcome taxonomy_fidelity() {
  const auto kb = taxonomy::load_kb(taxonomy::canonical_kb_path());
  const auto violations = taxonomy::validate_kb_document(nlohmann::json::parse(taxonomy::serialize_kb(kb)));
  auto has_item = [](const std::vector<std::string>& v, const char* x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  auto triple = [&](taxonomy::AttackObjective o, const char* id, const char* tool, const char* mitigation) {
    const auto hits = taxonomy::query_techniques(kb, {o, std::nullopt});
    return std::any_of(hits.begin(), hits.end(), [&](const taxonomy::TechniqueRecord& t) {
      return t.id == id && has_item(t.tools, tool) && has_item(t.mitigations, mitigation);
    });
  };
  const bool env = triple(taxonomy::AttackObjective::Environment, "env-optical-jamming", "laser", "SPAD array");
  const bool src = triple(taxonomy::AttackObjective::SourceOfPhotons, "src-phase-remapping",
                          "variable optical delay line", "source characterization");
  const bool det = triple(taxonomy::AttackObjective::DetectorsOfPhotons, "det-blinding", "bright light",
                          "asymmetric-splitting-ratio coupler");
  return {violations.empty() && env && src && det,
          fmt("%zu violations; environment %s, source %s, detectors %s", violations.size(), env ? "ok" : "missing",
              src ? "ok" : "missing", det ? "ok" : "missing")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"intercept-resend signature", intercept_resend},
      {"phase-remap calibration", phase_remap},
      {"blinding stealth and detection", blinding},
      {"PNS leakage", pns},
      {"power thresholds", power_thresholds},
      {"photocurrent bound", photocurrent_bound},
      {"photon statistics", photon_stats},
      {"after-gate detectability", after_gate},
      {"false-positive budget", false_positives},
      {"detection coverage", coverage},
      {"determinism", determinism},
      {"taxonomy fidelity", taxonomy_fidelity},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
