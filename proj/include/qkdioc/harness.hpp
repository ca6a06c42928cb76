#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qkdioc/attacks.hpp"
#include "qkdioc/ioc.hpp"
#include "qkdioc/optics.hpp"
#include "qkdioc/protocol.hpp"
#include "qkdioc/taxonomy.hpp"

namespace qkdioc::harness {

inline constexpr std::string_view kScenarioSchema = "qkdioc.scenario/1";
inline constexpr std::string_view kReportSchema = "qkdioc.report/1";
inline constexpr std::string_view kBaselineSchema = "qkdioc.baseline/1";
inline constexpr std::string_view kSessionSchema = "qkdioc.session/1";

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  optics::SourceParams source;
  optics::ChannelParams channel;
  optics::DetectorParams detector;
  protocol::Bb84Config protocol;
  std::optional<attacks::AttackConfig> attack;
  ioc::MonitorConfig monitors;
  bool calibration_run = true;

  /// All parameter invariants plus attack-vs-detector cross checks.
  void validate() const;
};

nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Content hash of the attack-free link (source, channel, detector, protocol).
std::uint64_t link_hash(const Scenario& s);

/// Attack-free twin of a scenario, with its own derived seed.
Scenario calibration_twin(const Scenario& s);

ioc::Baseline calibrate(const Scenario& s);
std::filesystem::path baseline_path(const std::filesystem::path& dir, std::uint64_t hash);
void save_baseline(const ioc::Baseline& b, const std::filesystem::path& path);
ioc::Baseline load_baseline(const std::filesystem::path& path);

struct PowerSummary {
  SlotRange window;
  double total_power = 0.0;
  double classical_power = 0.0;
  std::string classification;
  std::string damage_after;
};

struct SessionSummary {
  std::uint64_t num_slots = 0;
  std::uint64_t sifted_length = 0;
  std::uint64_t disclosed_bits = 0;
  std::uint64_t error_bits = 0;
  double pooled_qber = 0.0;
  std::uint64_t qber_windows = 0;
  std::uint64_t double_clicks = 0;
  std::array<std::uint64_t, 2> clicks_per_detector{0, 0};
  std::vector<PowerSummary> power;
  std::string final_damage;
  std::uint64_t eve_log_entries = 0;
  /// Sifted slots for which Eve's log holds a learned bit.
  double eve_known_fraction = 0.0;
  /// Of those, the fraction where her bit equals Bob's.
  double eve_agreement = 0.0;
};

SessionSummary summarize(const protocol::SessionRecord& rec, const ioc::MonitorConfig& cfg);

struct CandidateEntry {
  int rank = 0;
  std::string id;
  std::string name;
  std::string objective;
  int score = 0;
  std::vector<std::string> matched;
  std::vector<std::string> tools;
  std::vector<std::string> mitigations;
};

struct ForensicReport {
  Scenario scenario;
  std::optional<ioc::Baseline> baseline;
  SessionSummary summary;
  std::vector<IoCFinding> findings;
  std::vector<std::string> inconclusive;
  std::map<std::string, double> diagnostics;
  std::vector<CandidateEntry> candidates;
  std::optional<std::string> ground_truth;
  int top_k = 3;
  std::optional<bool> verdict_match;
};

/// True when ground_truth is among the first k candidates.
bool verdict_from(const std::vector<CandidateEntry>& candidates, const std::string& ground_truth, int k);

struct RunOptions {
  /// Where baselines are read from (and written to after a calibration run).
  std::optional<std::filesystem::path> baseline_dir;
  std::optional<std::filesystem::path> kb_path;
  int top_k = 3;
};

struct RunResult {
  ForensicReport report;
  protocol::SessionRecord record;
};

/// Session, monitors and candidate ranking for one scenario. Throws MissingBaseline
/// when calibration_run is off and no stored baseline matches the link.
RunResult run_scenario(const Scenario& s, const RunOptions& opts = {});

nlohmann::json report_to_json(const ForensicReport& r);
std::string report_to_struct_text(const ForensicReport& r);
std::string render_text(const nlohmann::json& report);

/// Finding -> IoC class -> technique reasoning chains for a stored report.
std::string explain_report(const nlohmann::json& report, const taxonomy::KnowledgeBase& kb);

}  // namespace qkdioc::harness
