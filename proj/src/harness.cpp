#include "qkdioc/harness.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "qkdioc/errors.hpp"
#include "qkdioc/rng.hpp"
#include "qkdioc/serialization.hpp"

namespace qkdioc::harness {

using nlohmann::json;

void Scenario::validate() const {
  static const std::regex kName("[A-Za-z0-9._-]+");
  if (!std::regex_match(name, kName))
    throw ValidationError("scenario.name must be non-empty and use only letters, digits, '.', '_' or '-'");
  source.validate();
  channel.validate();
  detector.validate();
  protocol.validate();
  monitors.validate();
  if (protocol.qber_window_bits != monitors.qber_window_bits)
    throw ValidationError("protocol.qber_window_bits and monitors.qber_window_bits disagree");
  if (attack) attacks::validate_attack(*attack, channel, detector);
}

json scenario_to_json(const Scenario& s) {
  return {{"schema", std::string(kScenarioSchema)},
          {"name", s.name},
          {"seed", s.seed},
          {"source", serial::to_json(s.source)},
          {"channel", serial::to_json(s.channel)},
          {"detector", serial::to_json(s.detector)},
          {"protocol", serial::to_json(s.protocol)},
          {"attack", s.attack ? serial::to_json(*s.attack) : json(nullptr)},
          {"monitors", serial::to_json(s.monitors)},
          {"calibration_run", s.calibration_run}};
}

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("scenario: top level must be an object");
  static const std::set<std::string> kKeys{"schema",  "name",   "seed",     "source",         "channel",
                                           "detector", "protocol", "attack", "monitors", "calibration_run"};
  for (const auto& [key, _] : j.items())
    if (!kKeys.contains(key)) throw ValidationError("scenario." + key + ": is not a recognised field");
  if (j.contains("schema") && j["schema"] != kScenarioSchema)
    throw ValidationError("scenario.schema: expected '" + std::string(kScenarioSchema) + "'");
  if (!j.contains("name") || !j["name"].is_string()) throw ValidationError("scenario.name: required string");
  Scenario s;
  s.name = j["name"].get<std::string>();
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ValidationError("scenario.seed: must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("source")) s.source = serial::source_from_json(j["source"]);
  if (j.contains("channel")) s.channel = serial::channel_from_json(j["channel"]);
  if (j.contains("detector")) s.detector = serial::detector_from_json(j["detector"]);
  if (j.contains("protocol")) s.protocol = serial::protocol_from_json(j["protocol"]);
  if (j.contains("attack") && !j["attack"].is_null()) s.attack = serial::attack_from_json(j["attack"]);
  if (j.contains("monitors")) s.monitors = serial::monitors_from_json(j["monitors"]);
  if (j.contains("calibration_run")) {
    if (!j["calibration_run"].is_boolean()) throw ValidationError("scenario.calibration_run: must be a boolean");
    s.calibration_run = j["calibration_run"].get<bool>();
  }
  // One QBER window size: whichever side states it wins; both stating it must agree.
  const bool in_protocol = j.contains("protocol") && j["protocol"].contains("qber_window_bits");
  const bool in_monitors = j.contains("monitors") && j["monitors"].contains("qber_window_bits");
  if (in_protocol && !in_monitors) s.monitors.qber_window_bits = s.protocol.qber_window_bits;
  if (in_monitors && !in_protocol) s.protocol.qber_window_bits = s.monitors.qber_window_bits;
  s.validate();
  return s;
}

Scenario parse_scenario(std::string_view text) { return scenario_from_json(serial::parse_document(text, "scenario")); }

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(serial::read_document(path.string(), "scenario"));
}

std::uint64_t link_hash(const Scenario& s) {
  const json link{{"source", serial::to_json(s.source)},
                  {"channel", serial::to_json(s.channel)},
                  {"detector", serial::to_json(s.detector)},
                  {"protocol", serial::to_json(s.protocol)}};
  return fnv1a64(link.dump());
}

Scenario calibration_twin(const Scenario& s) {
  Scenario twin = s;
  twin.attack.reset();
  twin.name = s.name + ".calibration";
  twin.seed = RngStreams(s.seed).stream("calibration")();
  return twin;
}

ioc::Baseline calibrate(const Scenario& s) {
  s.validate();
  const Scenario twin = calibration_twin(s);
  const auto rec = protocol::run_session(twin.protocol, twin.source, twin.channel, twin.detector, std::nullopt, twin.seed);
  return ioc::make_baseline(rec, s.detector, s.monitors, link_hash(s));
}

std::filesystem::path baseline_path(const std::filesystem::path& dir, std::uint64_t hash) {
  return dir / (serial::hex64(hash) + ".json");
}

void save_baseline(const ioc::Baseline& b, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write baseline '" + path.string() + "'");
  out << serial::to_json(b).dump(2) << "\n";
  if (!out) throw IoError("cannot write baseline '" + path.string() + "'");
}

ioc::Baseline load_baseline(const std::filesystem::path& path) {
  return serial::baseline_from_json(serial::read_document(path.string(), "baseline"));
}

SessionSummary summarize(const protocol::SessionRecord& rec, const ioc::MonitorConfig& cfg) {
  SessionSummary s;
  s.num_slots = rec.num_slots;
  s.sifted_length = rec.sifted_key.size();
  s.disclosed_bits = rec.qber.total_bits();
  s.error_bits = rec.qber.error_bits();
  s.pooled_qber = rec.qber.pooled_qber();
  s.qber_windows = rec.qber.windows.size();
  s.double_clicks = rec.double_click_count;
  s.clicks_per_detector = rec.clicks_per_detector;
  for (const auto& w : rec.power_by_window)
    s.power.push_back({w.window, w.total_power, w.classical_power,
                       std::string(ioc::power_class_token(ioc::classify_power(w.classical_power, cfg))),
                       std::string(optics::damage_token(w.damage_after))});
  s.final_damage = optics::damage_token(rec.final_damage);
  s.eve_log_entries = rec.eve_log.size();

  // Eve's log is slot-ordered with at most one entry per slot.
  std::uint64_t known = 0;
  std::uint64_t agree = 0;
  auto it = rec.eve_log.begin();
  for (std::size_t k = 0; k < rec.sifted_key.size(); ++k) {
    const auto slot = rec.sifted_key.indices[k];
    while (it != rec.eve_log.end() && it->slot < slot) ++it;
    if (it == rec.eve_log.end() || it->slot != slot || !it->learned_bit) continue;
    ++known;
    if (*it->learned_bit == rec.sifted_key.bob_bits[k]) ++agree;
  }
  if (s.sifted_length > 0) s.eve_known_fraction = static_cast<double>(known) / static_cast<double>(s.sifted_length);
  if (known > 0) s.eve_agreement = static_cast<double>(agree) / static_cast<double>(known);
  return s;
}

bool verdict_from(const std::vector<CandidateEntry>& candidates, const std::string& ground_truth, int k) {
  const auto limit = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(std::max(k, 0)));
  for (std::size_t i = 0; i < limit; ++i)
    if (candidates[i].id == ground_truth) return true;
  return false;
}

RunResult run_scenario(const Scenario& s, const RunOptions& opts) {
  s.validate();
  const std::uint64_t hash = link_hash(s);
  ioc::Baseline baseline;
  if (s.calibration_run) {
    baseline = calibrate(s);
    if (opts.baseline_dir) save_baseline(baseline, baseline_path(*opts.baseline_dir, hash));
  } else {
    if (!opts.baseline_dir)
      throw MissingBaseline("scenario '" + s.name + "' has calibration_run=false and no baseline directory was given");
    const auto path = baseline_path(*opts.baseline_dir, hash);
    if (!std::filesystem::exists(path))
      throw MissingBaseline("no baseline for link " + serial::hex64(hash) + " in '" + opts.baseline_dir->string() +
                            "'; run `qkdioc calibrate` first");
    baseline = load_baseline(path);
    if (baseline.link_hash != hash)
      throw ValidationError("baseline '" + path.string() + "' was recorded for a different link");
  }

  RunResult out;
  out.record = protocol::run_session(s.protocol, s.source, s.channel, s.detector, s.attack, s.seed);
  const auto monitors = ioc::run_all_monitors(out.record, baseline, {s.source, s.detector}, s.monitors);
  const auto kb = taxonomy::load_kb(opts.kb_path.value_or(taxonomy::canonical_kb_path()));
  const auto ranked = taxonomy::rank_candidates(kb, monitors.findings);

  ForensicReport& r = out.report;
  r.scenario = s;
  r.baseline = baseline;
  r.summary = summarize(out.record, s.monitors);
  r.findings = monitors.findings;
  r.inconclusive = monitors.notes;
  r.diagnostics = monitors.diagnostics;
  r.top_k = opts.top_k;
  int rank = 0;
  for (const auto& c : ranked) {
    CandidateEntry e;
    e.rank = ++rank;
    e.id = c.technique.id;
    e.name = c.technique.name;
    e.objective = taxonomy::objective_token(c.technique.objective);
    e.score = c.score;
    for (const auto& m : c.matched) e.matched.emplace_back(m.token());
    e.tools = c.technique.tools;
    e.mitigations = c.technique.mitigations;
    r.candidates.push_back(std::move(e));
  }
  if (s.attack) {
    r.ground_truth = std::string(attacks::technique_id(*s.attack));
    r.verdict_match = verdict_from(r.candidates, *r.ground_truth, r.top_k);
  }
  return out;
}

json report_to_json(const ForensicReport& r) {
  const SessionSummary& s = r.summary;
  json power = json::array();
  for (const auto& p : s.power)
    power.push_back({{"begin", p.window.begin},
                     {"end", p.window.end},
                     {"total_power_w", p.total_power},
                     {"classical_power_w", p.classical_power},
                     {"classification", p.classification},
                     {"damage_after", p.damage_after}});
  json summary{{"num_slots", s.num_slots},
               {"sifted_length", s.sifted_length},
               {"disclosed_bits", s.disclosed_bits},
               {"error_bits", s.error_bits},
               {"pooled_qber", s.pooled_qber},
               {"qber_windows", s.qber_windows},
               {"double_clicks", s.double_clicks},
               {"clicks_per_detector", s.clicks_per_detector},
               {"received_power", power},
               {"final_damage", s.final_damage},
               {"eve_log_entries", s.eve_log_entries},
               {"eve_known_fraction", s.eve_known_fraction},
               {"eve_agreement", s.eve_agreement}};
  json findings = json::array();
  for (const auto& f : r.findings) findings.push_back(serial::to_json(f));
  json candidates = json::array();
  for (const auto& c : r.candidates)
    candidates.push_back({{"rank", c.rank},
                          {"id", c.id},
                          {"name", c.name},
                          {"objective", c.objective},
                          {"score", c.score},
                          {"matched", c.matched},
                          {"tools", c.tools},
                          {"mitigations", c.mitigations}});
  json diagnostics = json::object();
  for (const auto& [k, v] : r.diagnostics) diagnostics[k] = v;
  return {{"schema", std::string(kReportSchema)},
          {"scenario", scenario_to_json(r.scenario)},
          {"baseline", r.baseline ? serial::to_json(*r.baseline) : json(nullptr)},
          {"summary", summary},
          {"findings", findings},
          {"inconclusive", r.inconclusive},
          {"diagnostics", diagnostics},
          {"candidates", candidates},
          {"ground_truth", r.ground_truth ? json(*r.ground_truth) : json(nullptr)},
          {"top_k", r.top_k},
          {"verdict_match", r.verdict_match ? json(*r.verdict_match) : json(nullptr)}};
}

std::string report_to_struct_text(const ForensicReport& r) { return report_to_json(r).dump(2) + "\n"; }

namespace {

std::string num(const json& v) {
  std::ostringstream os;
  os.precision(6);
  os << v.get<double>();
  return os.str();
}

std::string join(const json& arr, std::string_view sep = ", ") {
  std::string out;
  for (const auto& e : arr) {
    if (!out.empty()) out += sep;
    out += e.is_string() ? e.get<std::string>() : e.dump();
  }
  return out.empty() ? "-" : out;
}

void require_report(const json& r) {
  if (!r.is_object() || r.value("schema", std::string()) != kReportSchema)
    throw ValidationError("report: expected a '" + std::string(kReportSchema) + "' document");
  for (const char* key : {"scenario", "summary", "findings", "candidates", "top_k"})
    if (!r.contains(key)) throw ValidationError(std::string("report: missing field '") + key + "'");
}

std::string finding_line(const json& f) {
  std::ostringstream os;
  os << std::string(f["severity"]) << "  " << std::string(f["class"]) << "  measured " << num(f["measured"]) << " "
     << std::string(f["unit"]) << " [" << std::string(f["comparison"]) << " " << num(f["threshold"]);
  const std::string cmp = f["comparison"];
  if (cmp == "excess_gt" || cmp == "abs_dev_gt") os << " vs ref " << num(f["reference"]);
  os << "]  slots " << f["window"]["begin"].get<std::uint64_t>() << ".." << f["window"]["end"].get<std::uint64_t>();
  return os.str();
}

}  // namespace

std::string render_text(const json& r) {
  require_report(r);
  std::ostringstream os;
  const json& sc = r["scenario"];
  const json& s = r["summary"];
  os << "Forensic report: " << std::string(sc["name"]) << " (seed " << sc["seed"].get<std::uint64_t>() << ")\n";
  os << "Attack configured: " << (sc["attack"].is_null() ? std::string("none") : std::string(sc["attack"]["type"]))
     << "\n\n";
  os << "Session\n";
  os << "  slots                " << s["num_slots"].get<std::uint64_t>() << "\n";
  os << "  sifted bits          " << s["sifted_length"].get<std::uint64_t>() << "\n";
  os << "  disclosed / errors   " << s["disclosed_bits"].get<std::uint64_t>() << " / "
     << s["error_bits"].get<std::uint64_t>() << "\n";
  os << "  pooled QBER          " << num(s["pooled_qber"]) << "\n";
  os << "  double clicks        " << s["double_clicks"].get<std::uint64_t>() << "\n";
  os << "  clicks per detector  " << join(s["clicks_per_detector"], " / ") << "\n";
  os << "  final damage         " << std::string(s["final_damage"]) << "\n";
  double peak = 0.0;
  std::string peak_class = "nominal";
  for (const auto& p : s["received_power"]) {
    if (p["classical_power_w"].get<double>() >= peak) {
      peak = p["classical_power_w"].get<double>();
      peak_class = p["classification"].get<std::string>();
    }
  }
  os << "  peak classical power " << peak << " W (" << peak_class << ")\n";
  if (s["eve_log_entries"].get<std::uint64_t>() > 0)
    os << "  Eve known fraction   " << num(s["eve_known_fraction"]) << " (agreement " << num(s["eve_agreement"])
       << ")\n";

  os << "\nFindings (" << r["findings"].size() << ")\n";
  if (r["findings"].empty()) os << "  none\n";
  for (const auto& f : r["findings"]) os << "  " << finding_line(f) << "\n    " << std::string(f["detail"]) << "\n";

  if (r.contains("inconclusive") && !r["inconclusive"].empty()) {
    os << "\nInconclusive\n";
    for (const auto& n : r["inconclusive"]) os << "  " << std::string(n) << "\n";
  }

  os << "\nCandidate techniques\n";
  if (r["candidates"].empty()) os << "  none\n";
  for (const auto& c : r["candidates"])
    os << "  " << c["rank"].get<int>() << ". " << std::string(c["id"]) << " (" << std::string(c["objective"])
       << ") score " << c["score"].get<int>() << "  matched: " << join(c["matched"]) << "\n";

  if (!r["ground_truth"].is_null()) {
    os << "\nGround truth: " << std::string(r["ground_truth"]) << "  top-" << r["top_k"].get<int>() << " match: "
       << (r["verdict_match"].get<bool>() ? "yes" : "no") << "\n";
  }
  return os.str();
}

std::string explain_report(const json& r, const taxonomy::KnowledgeBase& kb) {
  require_report(r);
  std::ostringstream os;
  os << "Report " << std::string(r["scenario"]["name"]) << ": " << r["findings"].size() << " finding(s)\n";
  if (r["findings"].empty()) {
    os << "No indicator of compromise was observed; there is nothing to investigate.\n";
    return os.str();
  }
  std::size_t i = 0;
  for (const auto& jf : r["findings"]) {
    const IoCFinding f = serial::finding_from_json(jf);
    os << "\n[" << ++i << "] " << finding_line(jf) << "\n";
    os << "    rule re-check: " << (f.holds() ? "holds" : "DOES NOT HOLD") << "\n";
    const auto& linked = kb.by_ioc_class(f.ioc_class);
    if (linked.empty()) {
      os << "    no technique in the knowledge base lists IoC class " << f.ioc_class.token() << "\n";
      continue;
    }
    for (auto idx : linked) {
      const auto& t = kb.techniques()[idx];
      os << "    -> " << f.ioc_class.token() << " is an indicator of " << t.id << " (" << t.name << ")\n";
      os << "       objective " << taxonomy::objective_token(t.objective);
      os << "; tools: " << (t.tools.empty() ? std::string("-") : join(json(t.tools)));
      os << "; mitigations: " << (t.mitigations.empty() ? std::string("-") : join(json(t.mitigations))) << "\n";
    }
  }
  os << "\nRanking (score = distinct observed IoC classes a technique is linked to)\n";
  for (const auto& c : r["candidates"])
    os << "  " << c["rank"].get<int>() << ". " << std::string(c["id"]) << " score " << c["score"].get<int>()
       << " via " << join(c["matched"]) << "\n";
  if (!r["ground_truth"].is_null()) {
    std::vector<CandidateEntry> cands;
    for (const auto& c : r["candidates"]) cands.push_back({c["rank"], c["id"], "", "", c["score"], {}, {}, {}});
    const bool match = verdict_from(cands, r["ground_truth"], r["top_k"]);
    os << "\nConfigured attack " << std::string(r["ground_truth"]) << (match ? " is" : " is not") << " among the top "
       << r["top_k"].get<int>() << " candidates";
    if (r["verdict_match"].is_boolean() && r["verdict_match"].get<bool>() != match)
      os << " (stored verdict_match disagrees)";
    os << ".\n";
  }
  return os.str();
}

}  // namespace qkdioc::harness
