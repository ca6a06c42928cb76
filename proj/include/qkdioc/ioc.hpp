#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qkdioc/ioc_types.hpp"
#include "qkdioc/optics.hpp"
#include "qkdioc/protocol.hpp"

namespace qkdioc::ioc {

struct MonitorConfig {
  double qber_advisory = 0.08;
  double qber_alarm = 0.12;
  std::uint64_t qber_window_bits = 1000;
  double photocurrent_max = 8100;
  double power_noise_floor = 1.0e-15;  // W
  double power_thermal = 1.0e-3;       // W
  double power_melt = 1.0e3;           // W
  double noise_photons_per_pulse_limit = 3.0e-5;
  double afterpulse_sigma = 3.0;
  std::uint32_t deadtime_gap_adc_periods = 2;
  double photon_stats_significance = 0.01;
  std::uint64_t afterpulse_min_pairs = 100;
  double starvation_min_expected = 100.0;
  std::uint64_t photon_stats_min_samples = 10000;
  /// Mean photon number the operator believes the source runs at; defaults to the source mu.
  std::optional<double> declared_mu;

  void validate() const;
};

/// Outcome of one monitor: findings, or an explicit inconclusive verdict.
struct MonitorResult {
  std::vector<IoCFinding> findings;
  bool inconclusive = false;
  std::string note;
};

std::vector<IoCFinding> qber_monitor(std::span<const protocol::QberWindow> windows, const MonitorConfig& cfg);

/// Per-detector counts behind the afterpulse estimate.
struct AfterpulseCounts {
  std::uint64_t opportunities = 0;  // gates inside post-click windows, up to the first click
  std::uint64_t successes = 0;      // windows that contained a click
  std::uint64_t independent_gates = 0;
  std::uint64_t independent_clicks = 0;

  double conditional_rate() const noexcept;   // successes / opportunities
  double independent_rate() const noexcept;   // independent_clicks / independent_gates
};

struct AfterpulseEstimate {
  double estimate = 0.0;  // post-click click probability minus the independent click probability
  double standard_error = 0.0;
  std::uint64_t click_pairs = 0;
  std::array<AfterpulseCounts, 2> detectors{};
  bool valid = false;
};

/// Estimator over a click stream (clicks only, slot-ordered, both detectors mixed).
/// Detectors are estimated separately and combined weighted by opportunities.
AfterpulseEstimate estimate_afterpulse(std::span<const optics::DetectionEvent> clicks, std::uint64_t num_slots,
                                       const optics::DetectorParams& params, const MonitorConfig& cfg);

/// Alarm when the session's post-click click probability exceeds the calibration run's by more
/// than afterpulse_sigma standard errors. Expected independent clicks come from the calibration.
MonitorResult afterpulse_monitor(std::span<const optics::DetectionEvent> clicks, std::uint64_t num_slots,
                                 const optics::DetectorParams& params,
                                 const std::optional<AfterpulseEstimate>& baseline, const MonitorConfig& cfg);

struct DeadtimeContext {
  std::uint64_t num_slots = 0;
  double pulse_rate = 1.0;
  std::uint64_t window_slots = 10000;
  std::optional<double> expected_clicks_per_slot;  // from an attack-free calibration
};

/// Minimum same-detector inter-click interval vs. the specified deadtime, plus
/// count starvation over monitor windows.
MonitorResult deadtime_monitor(std::span<const optics::DetectionEvent> clicks, const DeadtimeContext& ctx,
                               const optics::DetectorParams& params, const MonitorConfig& cfg);

/// One Alarm per maximal run of samples above photocurrent_max. Throws ValidationError on negatives.
std::vector<IoCFinding> photocurrent_monitor(std::span<const std::int64_t> samples, const MonitorConfig& cfg);
std::vector<IoCFinding> photocurrent_monitor(std::span<const std::uint32_t> samples, const MonitorConfig& cfg);

struct PhotonStatsResult {
  MonitorResult result;
  double chi_square = 0.0;
  double chi_square_critical = 0.0;
  int degrees_of_freedom = 0;
  bool goodness_of_fit_passed = true;
  double mean_estimate = 0.0;
  double ci_half_width = 0.0;
  double multiphoton_fraction = 0.0;  // empirical P(n >= 2)
  std::uint64_t samples = 0;
};

PhotonStatsResult photon_stats_monitor(std::span<const std::uint32_t> photon_counts, double declared_mu,
                                       const MonitorConfig& cfg);

enum class PowerClass { Nominal, NoiseSaturated, ThermalBlinding, Melting };

std::string_view power_class_token(PowerClass c) noexcept;

/// Inclusive lower bounds; monotone in p. Throws ValidationError for p < 0.
PowerClass classify_power(double p_recv, const MonitorConfig& cfg);

struct PowerVerdict {
  PowerClass classification = PowerClass::Nominal;
  std::optional<IoCFinding> finding;
};

PowerVerdict power_monitor(double p_recv, const MonitorConfig& cfg, SlotRange window = {});

/// Reference values from an attack-free calibration run of the same link.
struct Baseline {
  std::uint64_t link_hash = 0;
  AfterpulseEstimate afterpulse;
  double clicks_per_slot = 0.0;
  double pooled_qber = 0.0;
  std::uint64_t sifted_length = 0;
  std::uint64_t num_slots = 0;
};

Baseline make_baseline(const protocol::SessionRecord& record, const optics::DetectorParams& detector,
                       const MonitorConfig& cfg, std::uint64_t link_hash);

struct MonitorReport {
  std::vector<IoCFinding> findings;
  std::vector<std::string> notes;  // inconclusive monitors and diagnostics
  std::map<std::string, double> diagnostics;
};

struct LinkContext {
  optics::SourceParams source;
  optics::DetectorParams detector;
};

/// Every monitor over one session, ordered by (window start, class).
MonitorReport run_all_monitors(const protocol::SessionRecord& record, const std::optional<Baseline>& baseline,
                               const LinkContext& link, const MonitorConfig& cfg);

/// Stable canonical ordering used by every monitor output.
void sort_findings(std::vector<IoCFinding>& findings);

}  // namespace qkdioc::ioc
