#include "qkdioc/ioc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "qkdioc/errors.hpp"

namespace qkdioc {

// ---------------------------------------------------------------------------
// IoC value types

int IoCClass::ordinal() const noexcept {
  switch (kind_) {
    case Kind::Qber: return 0;
    case Kind::RealTime: return 1 + static_cast<int>(sub_.value_or(RealTimeKind::Afterpulse));
    case Kind::ReceivedPower: return 5;
  }
  return 0;
}

IoCClass IoCClass::from_ordinal(int ordinal) {
  switch (ordinal) {
    case 0: return qber();
    case 1: return real_time(RealTimeKind::Afterpulse);
    case 2: return real_time(RealTimeKind::Deadtime);
    case 3: return real_time(RealTimeKind::Photocurrent);
    case 4: return real_time(RealTimeKind::PhotonStatistics);
    case 5: return received_power();
    default: throw ValidationError("IoC class ordinal out of range: " + std::to_string(ordinal));
  }
}

namespace {
constexpr std::array<std::string_view, IoCClass::kCount> kClassTokens{
    "qber",
    "real_time.afterpulse",
    "real_time.deadtime",
    "real_time.photocurrent",
    "real_time.photon_statistics",
    "received_power",
};
}  // namespace

std::string_view IoCClass::token() const noexcept { return kClassTokens[static_cast<std::size_t>(ordinal())]; }

std::optional<IoCClass> IoCClass::from_token(std::string_view token) noexcept {
  for (int i = 0; i < kCount; ++i) {
    if (kClassTokens[static_cast<std::size_t>(i)] == token) return from_ordinal(i);
  }
  return std::nullopt;
}

std::string_view severity_token(Severity s) noexcept {
  switch (s) {
    case Severity::Advisory: return "advisory";
    case Severity::Alarm: return "alarm";
    case Severity::Damage: return "damage";
  }
  return "advisory";
}

std::optional<Severity> severity_from_token(std::string_view token) noexcept {
  for (Severity s : {Severity::Advisory, Severity::Alarm, Severity::Damage})
    if (severity_token(s) == token) return s;
  return std::nullopt;
}

std::string_view comparison_token(Comparison c) noexcept {
  switch (c) {
    case Comparison::Greater: return "gt";
    case Comparison::AtLeast: return "ge";
    case Comparison::Less: return "lt";
    case Comparison::ExcessOver: return "excess_gt";
    case Comparison::AbsDeviationGreater: return "abs_dev_gt";
  }
  return "gt";
}

std::optional<Comparison> comparison_from_token(std::string_view token) noexcept {
  for (Comparison c : {Comparison::Greater, Comparison::AtLeast, Comparison::Less, Comparison::ExcessOver,
                       Comparison::AbsDeviationGreater})
    if (comparison_token(c) == token) return c;
  return std::nullopt;
}

bool IoCFinding::holds() const noexcept {
  switch (comparison) {
    case Comparison::Greater: return measured > threshold;
    case Comparison::AtLeast: return measured >= threshold;
    case Comparison::Less: return measured < threshold;
    case Comparison::ExcessOver: return measured - reference > threshold;
    case Comparison::AbsDeviationGreater: return std::abs(measured - reference) > threshold;
  }
  return false;
}

}  // namespace qkdioc

namespace qkdioc::ioc {

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

void MonitorConfig::validate() const {
  if (!(qber_advisory > 0.0 && qber_advisory <= qber_alarm && qber_alarm < 1.0))
    throw ValidationError("monitors: require 0 < qber_advisory <= qber_alarm < 1");
  if (!(power_noise_floor < power_thermal && power_thermal < power_melt) || !(power_noise_floor > 0.0))
    throw ValidationError("monitors: require 0 < power_noise_floor < power_thermal < power_melt");
  if (qber_window_bits < 1) throw ValidationError("monitors.qber_window_bits must be >= 1");
  if (!(photocurrent_max >= 0.0)) throw ValidationError("monitors.photocurrent_max must be >= 0");
  if (!(afterpulse_sigma > 0.0)) throw ValidationError("monitors.afterpulse_sigma must be > 0");
  if (!(photon_stats_significance > 0.0 && photon_stats_significance < 1.0))
    throw ValidationError("monitors.photon_stats_significance must lie in (0,1)");
  if (declared_mu && !(*declared_mu >= 0.0)) throw ValidationError("monitors.declared_mu must be >= 0");
}

void sort_findings(std::vector<IoCFinding>& findings) {
  std::stable_sort(findings.begin(), findings.end(), [](const IoCFinding& a, const IoCFinding& b) {
    if (a.window.begin != b.window.begin) return a.window.begin < b.window.begin;
    return a.ioc_class < b.ioc_class;
  });
}

std::vector<IoCFinding> qber_monitor(std::span<const protocol::QberWindow> windows, const MonitorConfig& cfg) {
  std::vector<IoCFinding> out;
  for (const auto& w : windows) {
    double bound = 0.0;
    Severity severity = Severity::Advisory;
    if (w.qber > cfg.qber_alarm) {
      bound = cfg.qber_alarm;
      severity = Severity::Alarm;
    } else if (w.qber > cfg.qber_advisory) {
      bound = cfg.qber_advisory;
    } else {
      continue;
    }
    IoCFinding f;
    f.ioc_class = IoCClass::qber();
    f.severity = severity;
    f.window = w.slot_range;
    f.measured = w.qber;
    f.unit = "ratio";
    f.threshold = bound;
    f.comparison = Comparison::Greater;
    f.detail = "window " + std::to_string(w.window_id) + ": " + std::to_string(w.error_bits) + "/" +
               std::to_string(w.total_bits) + " disclosed bits in error";
    out.push_back(std::move(f));
  }
  sort_findings(out);
  return out;
}

double AfterpulseCounts::conditional_rate() const noexcept {
  return opportunities == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(opportunities);
}

double AfterpulseCounts::independent_rate() const noexcept {
  return independent_gates == 0 ? 0.0
                                : static_cast<double>(independent_clicks) / static_cast<double>(independent_gates);
}

namespace {

double binomial_variance(double p, std::uint64_t n) {
  return n == 0 ? 0.0 : p * (1.0 - p) / static_cast<double>(n);
}

}  // namespace

AfterpulseEstimate estimate_afterpulse(std::span<const optics::DetectionEvent> clicks, std::uint64_t num_slots,
                                       const optics::DetectorParams& params, const MonitorConfig& cfg) {
  AfterpulseEstimate est;
  const std::uint64_t lead = std::max<std::uint64_t>(params.deadtime_gates, 1);
  const std::uint64_t span = params.afterpulse_decay_gates;

  for (int d = 0; d < 2; ++d) {
    AfterpulseCounts& c = est.detectors[static_cast<std::size_t>(d)];
    std::vector<std::uint64_t> t;
    for (const auto& ev : clicks)
      if (ev.click && ev.detector_id == d) t.push_back(ev.slot);
    if (t.empty()) {
      c.independent_gates += num_slots;
      continue;
    }
    est.click_pairs += t.size() - 1;
    // Gates before the first click are independent opportunities; the first click lands in them.
    c.independent_gates += t.front() + 1;
    c.independent_clicks += 1;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::uint64_t open = t[i] + lead;
      const std::uint64_t close = open + span;  // exclusive
      const bool has_next = i + 1 < t.size();
      if (has_next && t[i + 1] < close) {
        c.opportunities += t[i + 1] - open + 1;
        c.successes += 1;
        continue;
      }
      const std::uint64_t window_end = std::min(close, num_slots);
      if (window_end > open) c.opportunities += window_end - open;
      if (has_next) {
        c.independent_gates += t[i + 1] - close + 1;
        c.independent_clicks += 1;
      } else if (num_slots > close) {
        c.independent_gates += num_slots - close;
      }
    }
  }

  if (est.click_pairs < cfg.afterpulse_min_pairs) return est;
  double weight_total = 0.0;
  for (const auto& c : est.detectors)
    if (c.opportunities > 0 && c.independent_gates > 0) weight_total += static_cast<double>(c.opportunities);
  if (weight_total == 0.0) return est;
  double variance = 0.0;
  for (const auto& c : est.detectors) {
    if (c.opportunities == 0 || c.independent_gates == 0) continue;
    const double w = static_cast<double>(c.opportunities) / weight_total;
    const double a = c.conditional_rate();
    const double r = c.independent_rate();
    est.estimate += w * (a - r);
    variance += w * w * (binomial_variance(a, c.opportunities) + binomial_variance(r, c.independent_gates));
  }
  est.standard_error = std::sqrt(variance);
  est.valid = true;
  return est;
}

MonitorResult afterpulse_monitor(std::span<const optics::DetectionEvent> clicks, std::uint64_t num_slots,
                                 const optics::DetectorParams& params,
                                 const std::optional<AfterpulseEstimate>& baseline, const MonitorConfig& cfg) {
  MonitorResult out;
  if (!baseline || !baseline->valid) {
    out.inconclusive = true;
    out.note = "afterpulse: no valid calibration baseline";
    return out;
  }
  const AfterpulseEstimate est = estimate_afterpulse(clicks, num_slots, params, cfg);
  if (est.click_pairs < cfg.afterpulse_min_pairs) {
    out.inconclusive = true;
    out.note = "afterpulse: insufficient click pairs (" + std::to_string(est.click_pairs) + ")";
    return out;
  }

  // Both sides use the calibration's independent click rate and the session's detector weights.
  double weight_total = 0.0;
  for (std::size_t d = 0; d < 2; ++d) {
    const auto& s = est.detectors[d];
    const auto& b = baseline->detectors[d];
    if (s.opportunities > 0 && b.opportunities > 0 && b.independent_gates > 0)
      weight_total += static_cast<double>(s.opportunities);
  }
  if (weight_total == 0.0) {
    out.inconclusive = true;
    out.note = "afterpulse: no detector has post-click windows in both session and calibration";
    return out;
  }
  double measured = 0.0;
  double reference = 0.0;
  double variance = 0.0;
  for (std::size_t d = 0; d < 2; ++d) {
    const auto& s = est.detectors[d];
    const auto& b = baseline->detectors[d];
    if (s.opportunities == 0 || b.opportunities == 0 || b.independent_gates == 0) continue;
    const double w = static_cast<double>(s.opportunities) / weight_total;
    const double r = b.independent_rate();
    measured += w * (s.conditional_rate() - r);
    reference += w * (b.conditional_rate() - r);
    variance += w * w *
                (binomial_variance(s.conditional_rate(), s.opportunities) +
                 binomial_variance(b.conditional_rate(), b.opportunities));
  }
  const double se = std::sqrt(variance);
  const double bound = cfg.afterpulse_sigma * se;
  if (measured - reference > bound) {
    IoCFinding f;
    f.ioc_class = IoCClass::real_time(RealTimeKind::Afterpulse);
    f.severity = Severity::Alarm;
    f.window = {0, num_slots};
    f.measured = measured;
    f.unit = "probability";
    f.reference = reference;
    f.threshold = bound;
    f.comparison = Comparison::ExcessOver;
    f.detail = "afterpulse estimate " + format_double(measured) + " exceeds calibration " + format_double(reference) +
               " by " + format_double((measured - reference) / se) + " standard errors";
    out.findings.push_back(std::move(f));
  }
  return out;
}

MonitorResult deadtime_monitor(std::span<const optics::DetectionEvent> clicks, const DeadtimeContext& ctx,
                               const optics::DetectorParams& params, const MonitorConfig& cfg) {
  MonitorResult out;
  const double tolerance = cfg.deadtime_gap_adc_periods * params.adc_period;

  for (int d = 0; d < 2; ++d) {
    std::optional<double> last;
    std::optional<double> min_interval;
    std::uint64_t count = 0;
    for (const auto& ev : clicks) {
      if (!ev.click || ev.detector_id != d) continue;
      if (last) {
        const double gap = ev.timetag - *last;
        if (!min_interval || gap < *min_interval) min_interval = gap;
      }
      last = ev.timetag;
      ++count;
    }
    if (!min_interval) continue;  // < 2 clicks: left to the starvation check
    const double measured = std::round(*min_interval / params.adc_period) * params.adc_period;
    if (std::abs(measured - params.spec_deadtime) > tolerance) {
      IoCFinding f;
      f.ioc_class = IoCClass::real_time(RealTimeKind::Deadtime);
      f.severity = Severity::Alarm;
      f.window = {0, ctx.num_slots};
      f.measured = measured;
      f.unit = "s";
      f.reference = params.spec_deadtime;
      f.threshold = tolerance;
      f.comparison = Comparison::AbsDeviationGreater;
      f.detail = "detector " + std::to_string(d) + ": measured deadtime " + format_double(measured) +
                 " s vs specified " + format_double(params.spec_deadtime) + " s over " + std::to_string(count) +
                 " clicks";
      out.findings.push_back(std::move(f));
    }
  }

  if (!ctx.expected_clicks_per_slot) {
    out.inconclusive = true;
    out.note = "deadtime: no calibrated click rate, count-starvation check skipped";
  } else if (ctx.window_slots > 0) {
    std::vector<std::uint64_t> per_window((ctx.num_slots + ctx.window_slots - 1) / ctx.window_slots, 0);
    for (const auto& ev : clicks)
      if (ev.click && ev.slot < ctx.num_slots) ++per_window[ev.slot / ctx.window_slots];
    std::optional<std::uint64_t> run_begin;
    double run_expected = 0.0;
    auto flush = [&](std::uint64_t end) {
      if (!run_begin) return;
      IoCFinding f;
      f.ioc_class = IoCClass::real_time(RealTimeKind::Deadtime);
      f.severity = Severity::Alarm;
      f.window = {*run_begin, end};
      f.measured = 0.0;
      f.unit = "clicks";
      f.reference = run_expected;
      f.threshold = 1.0;
      f.comparison = Comparison::Less;
      f.detail = "count starvation: 0 clicks where " + format_double(run_expected) + " were expected";
      out.findings.push_back(std::move(f));
      run_begin.reset();
      run_expected = 0.0;
    };
    for (std::size_t w = 0; w < per_window.size(); ++w) {
      const std::uint64_t begin = w * ctx.window_slots;
      const std::uint64_t end = std::min(begin + ctx.window_slots, ctx.num_slots);
      const double expected = *ctx.expected_clicks_per_slot * static_cast<double>(end - begin);
      if (per_window[w] == 0 && expected >= cfg.starvation_min_expected) {
        if (!run_begin) run_begin = begin;
        run_expected += expected;
      } else {
        flush(begin);
      }
    }
    flush(ctx.num_slots);
  }
  sort_findings(out.findings);
  return out;
}

std::vector<IoCFinding> photocurrent_monitor(std::span<const std::int64_t> samples, const MonitorConfig& cfg) {
  for (auto s : samples)
    if (s < 0) throw ValidationError("photocurrent_monitor: negative readout sample");
  std::vector<IoCFinding> out;
  std::optional<std::uint64_t> run_begin;
  std::int64_t peak = 0;
  auto flush = [&](std::uint64_t end) {
    if (!run_begin) return;
    IoCFinding f;
    f.ioc_class = IoCClass::real_time(RealTimeKind::Photocurrent);
    f.severity = Severity::Alarm;
    f.window = {*run_begin, end};
    f.measured = static_cast<double>(peak);
    f.unit = "counts";
    f.threshold = cfg.photocurrent_max;
    f.comparison = Comparison::Greater;
    f.detail = "photocurrent readout above " + format_double(cfg.photocurrent_max) + " for " +
               std::to_string(end - *run_begin) + " samples, peak " + std::to_string(peak);
    out.push_back(std::move(f));
    run_begin.reset();
    peak = 0;
  };
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<double>(samples[i]) > cfg.photocurrent_max) {
      if (!run_begin) run_begin = i;
      peak = std::max(peak, samples[i]);
    } else {
      flush(i);
    }
  }
  flush(samples.size());
  return out;
}

std::vector<IoCFinding> photocurrent_monitor(std::span<const std::uint32_t> samples, const MonitorConfig& cfg) {
  std::vector<std::int64_t> wide(samples.begin(), samples.end());
  return photocurrent_monitor(std::span<const std::int64_t>(wide), cfg);
}

PhotonStatsResult photon_stats_monitor(std::span<const std::uint32_t> photon_counts, double declared_mu,
                                       const MonitorConfig& cfg) {
  PhotonStatsResult r;
  r.samples = photon_counts.size();
  if (r.samples < cfg.photon_stats_min_samples) {
    r.result.inconclusive = true;
    r.result.note = "photon statistics: " + std::to_string(r.samples) + " samples, need " +
                    std::to_string(cfg.photon_stats_min_samples);
    return r;
  }
  const double n = static_cast<double>(r.samples);

  // Observed histogram over n = 0..5 with the tail pooled at 5.
  constexpr std::size_t kBins = 6;
  std::array<double, kBins> observed{};
  double sum = 0.0;
  double sum_sq = 0.0;
  std::uint64_t multi = 0;
  for (auto c : photon_counts) {
    observed[std::min<std::size_t>(c, kBins - 1)] += 1.0;
    sum += c;
    sum_sq += static_cast<double>(c) * c;
    if (c >= 2) ++multi;
  }
  r.mean_estimate = sum / n;
  r.multiphoton_fraction = static_cast<double>(multi) / n;

  std::array<double, kBins> expected{};
  double pmf = std::exp(-declared_mu);
  double cumulative = 0.0;
  for (std::size_t k = 0; k + 1 < kBins; ++k) {
    expected[k] = n * pmf;
    cumulative += pmf;
    pmf *= declared_mu / static_cast<double>(k + 1);
  }
  expected[kBins - 1] = n * std::max(0.0, 1.0 - cumulative);

  // Pool trailing bins until every expected count is at least 5.
  std::vector<double> obs(observed.begin(), observed.end());
  std::vector<double> exp(expected.begin(), expected.end());
  while (exp.size() > 1 && exp.back() < 5.0) {
    exp[exp.size() - 2] += exp.back();
    obs[obs.size() - 2] += obs.back();
    exp.pop_back();
    obs.pop_back();
  }

  namespace bm = boost::math;
  if (exp.size() >= 2) {
    double chi = 0.0;
    for (std::size_t k = 0; k < exp.size(); ++k) {
      const double diff = obs[k] - exp[k];
      chi += diff * diff / exp[k];
    }
    r.chi_square = chi;
    r.degrees_of_freedom = static_cast<int>(exp.size()) - 1;
    r.chi_square_critical =
        bm::quantile(bm::complement(bm::chi_squared(r.degrees_of_freedom), cfg.photon_stats_significance));
    r.goodness_of_fit_passed = chi <= r.chi_square_critical;
  } else {
    // Degenerate declared distribution (all mass in one bin): any count elsewhere is a misfit.
    r.goodness_of_fit_passed = obs[0] == n;
    r.chi_square_critical = 0.0;
  }
  if (!r.goodness_of_fit_passed) {
    IoCFinding f;
    f.ioc_class = IoCClass::real_time(RealTimeKind::PhotonStatistics);
    f.severity = Severity::Advisory;
    f.window = {0, r.samples};
    f.measured = r.chi_square;
    f.unit = "chi_square";
    f.threshold = r.chi_square_critical;
    f.comparison = Comparison::Greater;
    f.detail = "photon-number histogram rejects Poisson(" + format_double(declared_mu) + ") at significance " +
               format_double(cfg.photon_stats_significance);
    if (exp.size() < 2) f.measured = std::max(1.0, r.chi_square);
    r.result.findings.push_back(std::move(f));
  }

  // Mean photon number with a two-sided confidence interval at 1 - significance.
  const double variance = std::max(0.0, (sum_sq - n * r.mean_estimate * r.mean_estimate) / (n - 1.0));
  const double z = bm::quantile(bm::normal(), 1.0 - cfg.photon_stats_significance / 2.0);
  r.ci_half_width = z * std::sqrt(variance / n);
  if (std::abs(r.mean_estimate - declared_mu) > r.ci_half_width) {
    IoCFinding f;
    f.ioc_class = IoCClass::real_time(RealTimeKind::PhotonStatistics);
    f.severity = Severity::Alarm;
    f.window = {0, r.samples};
    f.measured = r.mean_estimate;
    f.unit = "photons_per_pulse";
    f.reference = declared_mu;
    f.threshold = r.ci_half_width;
    f.comparison = Comparison::AbsDeviationGreater;
    f.detail = "mean photon number " + format_double(r.mean_estimate) + " +/- " + format_double(r.ci_half_width) +
               " excludes declared " + format_double(declared_mu) + "; estimated P(n>=2) " +
               format_double(r.multiphoton_fraction);
    r.result.findings.push_back(std::move(f));
  }
  return r;
}

std::string_view power_class_token(PowerClass c) noexcept {
  switch (c) {
    case PowerClass::Nominal: return "nominal";
    case PowerClass::NoiseSaturated: return "noise_saturated";
    case PowerClass::ThermalBlinding: return "thermal_blinding";
    case PowerClass::Melting: return "melting";
  }
  return "nominal";
}

PowerClass classify_power(double p_recv, const MonitorConfig& cfg) {
  if (!(p_recv >= 0.0)) throw ValidationError("power_monitor: received power must be >= 0");
  if (p_recv >= cfg.power_melt) return PowerClass::Melting;
  if (p_recv >= cfg.power_thermal) return PowerClass::ThermalBlinding;
  if (p_recv >= cfg.power_noise_floor) return PowerClass::NoiseSaturated;
  return PowerClass::Nominal;
}

PowerVerdict power_monitor(double p_recv, const MonitorConfig& cfg, SlotRange window) {
  PowerVerdict v;
  v.classification = classify_power(p_recv, cfg);
  if (v.classification == PowerClass::Nominal) return v;
  IoCFinding f;
  f.ioc_class = IoCClass::received_power();
  f.window = window;
  f.measured = p_recv;
  f.unit = "W";
  f.comparison = Comparison::AtLeast;
  switch (v.classification) {
    case PowerClass::NoiseSaturated:
      f.severity = Severity::Alarm;
      f.threshold = cfg.power_noise_floor;
      f.detail = "received classical power above the noise floor";
      break;
    case PowerClass::ThermalBlinding:
      f.severity = Severity::Damage;
      f.threshold = cfg.power_thermal;
      f.detail = "received power at thermal-blinding level";
      break;
    case PowerClass::Melting:
      f.severity = Severity::Damage;
      f.threshold = cfg.power_melt;
      f.detail = "received power at melting level";
      break;
    case PowerClass::Nominal:
      break;
  }
  f.detail += " (" + std::string(power_class_token(v.classification)) + ")";
  v.finding = std::move(f);
  return v;
}

Baseline make_baseline(const protocol::SessionRecord& record, const optics::DetectorParams& detector,
                       const MonitorConfig& cfg, std::uint64_t link_hash) {
  Baseline b;
  b.link_hash = link_hash;
  b.afterpulse = estimate_afterpulse(record.detection_events, record.num_slots, detector, cfg);
  b.clicks_per_slot = record.num_slots == 0 ? 0.0
                                            : static_cast<double>(record.detection_events.size()) /
                                                  static_cast<double>(record.num_slots);
  b.pooled_qber = record.qber.pooled_qber();
  b.sifted_length = record.sifted_key.size();
  b.num_slots = record.num_slots;
  return b;
}

MonitorReport run_all_monitors(const protocol::SessionRecord& record, const std::optional<Baseline>& baseline,
                               const LinkContext& link, const MonitorConfig& cfg) {
  MonitorReport report;
  auto take = [&](MonitorResult&& r) {
    for (auto& f : r.findings) report.findings.push_back(std::move(f));
    if (r.inconclusive) report.notes.push_back(std::move(r.note));
  };

  if (record.qber.windows.empty()) {
    report.notes.push_back("qber: no sifted bits, nothing to estimate");
  } else {
    for (auto& f : qber_monitor(record.qber.windows, cfg)) report.findings.push_back(std::move(f));
  }

  std::optional<AfterpulseEstimate> ap_base;
  if (baseline) ap_base = baseline->afterpulse;
  take(afterpulse_monitor(record.detection_events, record.num_slots, link.detector, ap_base, cfg));
  {
    const auto est = estimate_afterpulse(record.detection_events, record.num_slots, link.detector, cfg);
    if (est.valid) {
      report.diagnostics["afterpulse.estimate"] = est.estimate;
      report.diagnostics["afterpulse.standard_error"] = est.standard_error;
    }
  }

  DeadtimeContext dctx;
  dctx.num_slots = record.num_slots;
  dctx.pulse_rate = record.pulse_rate;
  dctx.window_slots = record.power_by_window.empty() ? record.num_slots : record.power_by_window.front().window.size();
  if (baseline) dctx.expected_clicks_per_slot = baseline->clicks_per_slot;
  take(deadtime_monitor(record.detection_events, dctx, link.detector, cfg));

  for (auto& f : photocurrent_monitor(std::span<const std::uint32_t>(record.photocurrent_samples), cfg))
    report.findings.push_back(std::move(f));

  if (link.source.statistics == optics::PhotonStatistics::Poissonian) {
    const double declared = cfg.declared_mu.value_or(link.source.mu);
    PhotonStatsResult ps = photon_stats_monitor(record.source_tap, declared, cfg);
    report.diagnostics["photon_stats.mean_estimate"] = ps.mean_estimate;
    report.diagnostics["photon_stats.multiphoton_fraction"] = ps.multiphoton_fraction;
    report.diagnostics["photon_stats.chi_square"] = ps.chi_square;
    take(std::move(ps.result));
  } else {
    report.notes.push_back("photon statistics: source is not weak-coherent, monitor not applicable");
  }

  // Consecutive windows in the same power class collapse into one finding at the peak.
  double peak_classical = 0.0;
  std::optional<IoCFinding> run;
  PowerClass run_class = PowerClass::Nominal;
  for (const auto& w : record.power_by_window) {
    peak_classical = std::max(peak_classical, w.classical_power);
    PowerVerdict v = power_monitor(w.classical_power, cfg, w.window);
    if (run && v.finding && v.classification == run_class && run->window.end == w.window.begin) {
      run->window.end = w.window.end;
      if (v.finding->measured > run->measured) run->measured = v.finding->measured;
      continue;
    }
    if (run) report.findings.push_back(std::move(*run));
    run = std::move(v.finding);
    run_class = v.classification;
  }
  if (run) report.findings.push_back(std::move(*run));
  // Stray photons per gate implied by the peak classical power, against the per-pulse noise budget.
  const double gate_photons =
      optics::stray_photons_per_gate(peak_classical, link.detector,
                                     {link.source.pulse_rate, link.source.photon_energy}) * 2.0;
  report.diagnostics["power.peak_classical_w"] = peak_classical;
  report.diagnostics["power.noise_photons_per_gate"] = gate_photons;
  report.diagnostics["power.noise_photons_limit"] = cfg.noise_photons_per_pulse_limit;

  sort_findings(report.findings);
  return report;
}

}  // namespace qkdioc::ioc
