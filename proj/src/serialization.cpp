#include "qkdioc/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "qkdioc/errors.hpp"

namespace qkdioc::serial {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

/// Strict object reader: every key must be consumed by exactly one field.
class Reader {
 public:
  Reader(const json& j, std::string_view where) : j_(j), where_(where) {
    if (!j.is_object()) fail("", "must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(key, "must be a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) fail(key, "must be an integer");
        if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
          fail(key, "must be non-negative");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) fail(key, "must be a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail(key, "must be a string");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T value{};
    get(key, value);
    out = value;
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.contains(key)) fail(key, "is not a recognised field");
  }

  [[noreturn]] void fail(std::string_view key, std::string_view msg) const {
    std::string path(where_);
    if (!key.empty()) path += "." + std::string(key);
    throw ValidationError(path + ": " + std::string(msg));
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class E, std::size_t N>
E enum_from(Reader& r, const char* key, E fallback, const std::array<std::pair<E, std::string_view>, N>& table) {
  std::optional<std::string> token;
  r.get(key, token);
  if (!token) return fallback;
  for (const auto& [e, t] : table)
    if (t == *token) return e;
  r.fail(key, "unknown value '" + *token + "'");
}

constexpr std::array<std::pair<optics::PhotonStatistics, std::string_view>, 2> kStatistics{
    {{optics::PhotonStatistics::Poissonian, "poissonian"}, {optics::PhotonStatistics::SinglePhoton, "single_photon"}}};
constexpr std::array<std::pair<optics::Medium, std::string_view>, 2> kMedium{
    {{optics::Medium::Fiber, "fiber"}, {optics::Medium::FreeSpace, "free_space"}}};
constexpr std::array<std::pair<attacks::ShiftDirection, std::string_view>, 2> kShift{
    {{attacks::ShiftDirection::Early, "early"}, {attacks::ShiftDirection::Late, "late"}}};

template <class E, std::size_t N>
std::string token_of(E e, const std::array<std::pair<E, std::string_view>, N>& table) {
  for (const auto& [v, t] : table)
    if (v == e) return std::string(t);
  return {};
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(std::string_view s) {
  if (s.size() != 16) throw ValidationError("expected 16 hex digits, got '" + std::string(s) + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw ValidationError("expected 16 hex digits, got '" + std::string(s) + "'");
  }
  return v;
}

json parse_document(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

json read_document(const std::string& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + std::string(what) + " '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_document(buf.str(), std::string(what) + " '" + path + "'");
}

// ---------------------------------------------------------------------------
// Link parameters

json to_json(const optics::SourceParams& p) {
  return {{"statistics", token_of(p.statistics, kStatistics)},
          {"mu", p.mu},
          {"pulse_rate", p.pulse_rate},
          {"photon_energy", p.photon_energy}};
}

optics::SourceParams source_from_json(const json& j, std::string_view where) {
  Reader r(j, where);
  optics::SourceParams p;
  p.statistics = enum_from(r, "statistics", p.statistics, kStatistics);
  r.get("mu", p.mu);
  r.get("pulse_rate", p.pulse_rate);
  r.get("photon_energy", p.photon_energy);
  r.finish();
  return p;
}

json to_json(const optics::ChannelParams& p) {
  return {{"loss_db", p.loss_db},
          {"medium", token_of(p.medium, kMedium)},
          {"background_click_prob", p.background_click_prob}};
}

optics::ChannelParams channel_from_json(const json& j, std::string_view where) {
  Reader r(j, where);
  optics::ChannelParams p;
  r.get("loss_db", p.loss_db);
  p.medium = enum_from(r, "medium", p.medium, kMedium);
  r.get("background_click_prob", p.background_click_prob);
  r.finish();
  return p;
}

json to_json(const optics::DetectorParams& p) {
  return {{"efficiency", p.efficiency},
          {"dark_count_prob", p.dark_count_prob},
          {"misalignment_error", p.misalignment_error},
          {"afterpulse_prob", p.afterpulse_prob},
          {"afterpulse_decay_gates", p.afterpulse_decay_gates},
          {"deadtime_gates", p.deadtime_gates},
          {"gate_width", p.gate_width},
          {"adc_period", p.adc_period},
          {"spec_deadtime", p.spec_deadtime},
          {"blinding_power", p.blinding_power},
          {"trigger_power", p.trigger_power},
          {"photocurrent_per_watt", p.photocurrent_per_watt},
          {"photocurrent_cap", p.photocurrent_cap},
          {"thermal_damage_power", p.thermal_damage_power},
          {"melt_power", p.melt_power},
          {"early_shift_efficiency", p.early_shift_efficiency},
          {"late_shift_efficiency", p.late_shift_efficiency}};
}

optics::DetectorParams detector_from_json(const json& j, std::string_view where) {
  Reader r(j, where);
  optics::DetectorParams p;
  r.get("efficiency", p.efficiency);
  r.get("dark_count_prob", p.dark_count_prob);
  r.get("misalignment_error", p.misalignment_error);
  r.get("afterpulse_prob", p.afterpulse_prob);
  r.get("afterpulse_decay_gates", p.afterpulse_decay_gates);
  r.get("deadtime_gates", p.deadtime_gates);
  r.get("gate_width", p.gate_width);
  r.get("adc_period", p.adc_period);
  r.get("spec_deadtime", p.spec_deadtime);
  r.get("blinding_power", p.blinding_power);
  r.get("trigger_power", p.trigger_power);
  r.get("photocurrent_per_watt", p.photocurrent_per_watt);
  r.get("photocurrent_cap", p.photocurrent_cap);
  r.get("thermal_damage_power", p.thermal_damage_power);
  r.get("melt_power", p.melt_power);
  for (const char* key : {"early_shift_efficiency", "late_shift_efficiency"}) {
    if (!r.has(key)) continue;
    const json& v = r.raw(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      r.fail(key, "must be an array of two numbers");
    auto& dst = std::string_view(key) == "early_shift_efficiency" ? p.early_shift_efficiency : p.late_shift_efficiency;
    dst = {v[0].get<double>(), v[1].get<double>()};
  }
  r.finish();
  return p;
}

json to_json(const protocol::Bb84Config& p) {
  return {{"num_pulses", p.num_pulses},
          {"basis_bias", p.basis_bias},
          {"qber_sample_fraction", p.qber_sample_fraction},
          {"qber_window_bits", p.qber_window_bits},
          {"monitor_window_slots", p.monitor_window_slots}};
}

protocol::Bb84Config protocol_from_json(const json& j, std::string_view where) {
  Reader r(j, where);
  protocol::Bb84Config p;
  r.get("num_pulses", p.num_pulses);
  r.get("basis_bias", p.basis_bias);
  r.get("qber_sample_fraction", p.qber_sample_fraction);
  r.get("qber_window_bits", p.qber_window_bits);
  r.get("monitor_window_slots", p.monitor_window_slots);
  r.finish();
  return p;
}

json to_json(const attacks::AttackConfig& a) {
  json j{{"type", std::string(attacks::attack_token(a))}};
  std::visit(Overloaded{
                 [&](const attacks::InterceptResend& c) { j["eve_basis_bias"] = c.eve_basis_bias; },
                 [&](const attacks::Pns& c) { j["block_single_photons"] = c.block_single_photons; },
                 [&](const attacks::PhaseRemap& c) { j["remap_delta"] = c.remap_delta; },
                 [&](const attacks::BlindingFakedState& c) {
                   j["cw_power"] = c.cw_power;
                   j["faked_pulse_power"] = c.faked_pulse_power;
                   j["lead_in_slots"] = c.lead_in_slots;
                   j["target_qber"] = c.target_qber;
                 },
                 [&](const attacks::AfterGate& c) {
                   j["injection_offset_gates"] = c.injection_offset_gates;
                   j["multiphoton_n"] = c.multiphoton_n;
                 },
                 [&](const attacks::TimeShiftAttack& c) { j["shift_direction"] = token_of(c.shift_direction, kShift); },
                 [&](const attacks::JammingDos& c) {
                   j["laser_power"] = c.laser_power;
                   j["duty"] = c.duty;
                 },
             },
             a);
  return j;
}

attacks::AttackConfig attack_from_json(const json& j, std::string_view where) {
  Reader r(j, where);
  std::string type;
  if (!r.has("type")) r.fail("type", "is required");
  r.get("type", type);
  attacks::AttackConfig out;
  if (type == "intercept_resend") {
    attacks::InterceptResend c;
    r.get("eve_basis_bias", c.eve_basis_bias);
    out = c;
  } else if (type == "pns") {
    attacks::Pns c;
    r.get("block_single_photons", c.block_single_photons);
    out = c;
  } else if (type == "phase_remap") {
    attacks::PhaseRemap c;
    r.get("remap_delta", c.remap_delta);
    out = c;
  } else if (type == "blinding_faked_state") {
    attacks::BlindingFakedState c;
    r.get("cw_power", c.cw_power);
    r.get("faked_pulse_power", c.faked_pulse_power);
    r.get("lead_in_slots", c.lead_in_slots);
    r.get("target_qber", c.target_qber);
    out = c;
  } else if (type == "after_gate") {
    attacks::AfterGate c;
    r.get("injection_offset_gates", c.injection_offset_gates);
    r.get("multiphoton_n", c.multiphoton_n);
    out = c;
  } else if (type == "time_shift") {
    attacks::TimeShiftAttack c;
    c.shift_direction = enum_from(r, "shift_direction", c.shift_direction, kShift);
    out = c;
  } else if (type == "jamming_dos") {
    attacks::JammingDos c;
    r.get("laser_power", c.laser_power);
    r.get("duty", c.duty);
    out = c;
  } else {
    r.fail("type", "unknown attack '" + type + "'");
  }
  r.finish();
  return out;
}

json to_json(const ioc::MonitorConfig& m) {
  json j{{"qber_advisory", m.qber_advisory},
         {"qber_alarm", m.qber_alarm},
         {"qber_window_bits", m.qber_window_bits},
         {"photocurrent_max", m.photocurrent_max},
         {"power_noise_floor", m.power_noise_floor},
         {"power_thermal", m.power_thermal},
         {"power_melt", m.power_melt},
         {"noise_photons_per_pulse_limit", m.noise_photons_per_pulse_limit},
         {"afterpulse_sigma", m.afterpulse_sigma},
         {"deadtime_gap_adc_periods", m.deadtime_gap_adc_periods},
         {"photon_stats_significance", m.photon_stats_significance},
         {"afterpulse_min_pairs", m.afterpulse_min_pairs},
         {"starvation_min_expected", m.starvation_min_expected},
         {"photon_stats_min_samples", m.photon_stats_min_samples}};
  j["declared_mu"] = m.declared_mu ? json(*m.declared_mu) : json(nullptr);
  return j;
}

ioc::MonitorConfig monitors_from_json(const json& j, std::string_view where) {
  Reader r(j, where);
  ioc::MonitorConfig m;
  r.get("qber_advisory", m.qber_advisory);
  r.get("qber_alarm", m.qber_alarm);
  r.get("qber_window_bits", m.qber_window_bits);
  r.get("photocurrent_max", m.photocurrent_max);
  r.get("power_noise_floor", m.power_noise_floor);
  r.get("power_thermal", m.power_thermal);
  r.get("power_melt", m.power_melt);
  r.get("noise_photons_per_pulse_limit", m.noise_photons_per_pulse_limit);
  r.get("afterpulse_sigma", m.afterpulse_sigma);
  r.get("deadtime_gap_adc_periods", m.deadtime_gap_adc_periods);
  r.get("photon_stats_significance", m.photon_stats_significance);
  r.get("afterpulse_min_pairs", m.afterpulse_min_pairs);
  r.get("starvation_min_expected", m.starvation_min_expected);
  r.get("photon_stats_min_samples", m.photon_stats_min_samples);
  r.get("declared_mu", m.declared_mu);
  r.finish();
  return m;
}

// ---------------------------------------------------------------------------
// Findings, baselines, session log

json to_json(const IoCFinding& f) {
  return {{"class", std::string(f.ioc_class.token())},
          {"severity", std::string(severity_token(f.severity))},
          {"window", {{"begin", f.window.begin}, {"end", f.window.end}}},
          {"measured", f.measured},
          {"unit", f.unit},
          {"threshold", f.threshold},
          {"reference", f.reference},
          {"comparison", std::string(comparison_token(f.comparison))},
          {"detail", f.detail}};
}

IoCFinding finding_from_json(const json& j, std::string_view where) {
  Reader r(j, where);
  IoCFinding f;
  std::string cls, sev, cmp;
  r.get("class", cls);
  r.get("severity", sev);
  r.get("comparison", cmp);
  auto c = IoCClass::from_token(cls);
  if (!c) r.fail("class", "unknown IoC class '" + cls + "'");
  auto s = severity_from_token(sev);
  if (!s) r.fail("severity", "unknown severity '" + sev + "'");
  auto k = comparison_from_token(cmp);
  if (!k) r.fail("comparison", "unknown comparison '" + cmp + "'");
  f.ioc_class = *c;
  f.severity = *s;
  f.comparison = *k;
  if (r.has("window")) {
    Reader w(r.raw("window"), std::string(where) + ".window");
    w.get("begin", f.window.begin);
    w.get("end", f.window.end);
    w.finish();
  }
  r.get("measured", f.measured);
  r.get("unit", f.unit);
  r.get("threshold", f.threshold);
  r.get("reference", f.reference);
  r.get("detail", f.detail);
  r.finish();
  return f;
}

json to_json(const ioc::AfterpulseEstimate& e) {
  json detectors = json::array();
  for (const auto& c : e.detectors)
    detectors.push_back({{"opportunities", c.opportunities},
                         {"successes", c.successes},
                         {"independent_gates", c.independent_gates},
                         {"independent_clicks", c.independent_clicks}});
  return {{"estimate", e.estimate},
          {"standard_error", e.standard_error},
          {"click_pairs", e.click_pairs},
          {"detectors", detectors},
          {"valid", e.valid}};
}

ioc::AfterpulseEstimate afterpulse_from_json(const json& j, std::string_view where) {
  Reader r(j, where);
  ioc::AfterpulseEstimate e;
  r.get("estimate", e.estimate);
  r.get("standard_error", e.standard_error);
  r.get("click_pairs", e.click_pairs);
  r.get("valid", e.valid);
  if (r.has("detectors")) {
    const json& list = r.raw("detectors");
    if (!list.is_array() || list.size() != 2) r.fail("detectors", "must be an array of two objects");
    for (std::size_t d = 0; d < 2; ++d) {
      Reader c(list[d], std::string(where) + ".detectors[" + std::to_string(d) + "]");
      auto& dst = e.detectors[d];
      c.get("opportunities", dst.opportunities);
      c.get("successes", dst.successes);
      c.get("independent_gates", dst.independent_gates);
      c.get("independent_clicks", dst.independent_clicks);
      c.finish();
    }
  }
  r.finish();
  return e;
}

json to_json(const ioc::Baseline& b) {
  return {{"schema", "qkdioc.baseline/1"},
          {"link_hash", hex64(b.link_hash)},
          {"afterpulse", to_json(b.afterpulse)},
          {"clicks_per_slot", b.clicks_per_slot},
          {"pooled_qber", b.pooled_qber},
          {"sifted_length", b.sifted_length},
          {"num_slots", b.num_slots}};
}

ioc::Baseline baseline_from_json(const json& j, std::string_view where) {
  Reader r(j, where);
  std::string schema, hash;
  r.get("schema", schema);
  if (schema != "qkdioc.baseline/1") r.fail("schema", "expected 'qkdioc.baseline/1'");
  ioc::Baseline b;
  r.get("link_hash", hash);
  b.link_hash = parse_hex64(hash);
  if (!r.has("afterpulse")) r.fail("afterpulse", "is required");
  b.afterpulse = afterpulse_from_json(r.raw("afterpulse"), std::string(where) + ".afterpulse");
  r.get("clicks_per_slot", b.clicks_per_slot);
  r.get("pooled_qber", b.pooled_qber);
  r.get("sifted_length", b.sifted_length);
  r.get("num_slots", b.num_slots);
  r.finish();
  return b;
}

json to_json(const attacks::EveLogEntry& e) {
  json j{{"slot", e.slot}, {"action", std::string(attacks::action_token(e.action))}};
  if (e.learned_bit) j["learned_bit"] = *e.learned_bit;
  if (e.learned_basis) j["learned_basis"] = std::string(optics::basis_token(*e.learned_basis));
  if (e.injected_power) j["injected_power"] = *e.injected_power;
  return j;
}

json session_to_json(const protocol::SessionRecord& rec) {
  json key{{"indices", rec.sifted_key.indices},
           {"alice_bits", rec.sifted_key.alice_bits},
           {"bob_bits", rec.sifted_key.bob_bits}};
  json windows = json::array();
  for (const auto& w : rec.qber.windows)
    windows.push_back({{"window_id", w.window_id},
                       {"slot_range", {{"begin", w.slot_range.begin}, {"end", w.slot_range.end}}},
                       {"error_bits", w.error_bits},
                       {"total_bits", w.total_bits},
                       {"qber", w.qber}});
  json clicks = json::array();
  for (const auto& ev : rec.detection_events)
    clicks.push_back({{"slot", ev.slot},
                      {"detector", ev.detector_id},
                      {"cause", std::string(optics::cause_token(ev.cause))},
                      {"timetag", ev.timetag},
                      {"photocurrent", ev.photocurrent}});
  json power = json::array();
  for (const auto& p : rec.power_by_window)
    power.push_back({{"begin", p.window.begin},
                     {"end", p.window.end},
                     {"total_power", p.total_power},
                     {"classical_power", p.classical_power},
                     {"damage_after", std::string(optics::damage_token(p.damage_after))}});
  json eve = json::array();
  for (const auto& e : rec.eve_log) eve.push_back(to_json(e));
  return {{"schema", "qkdioc.session/1"},
          {"num_slots", rec.num_slots},
          {"pulse_rate", rec.pulse_rate},
          {"sifted_key", key},
          {"double_click_count", rec.double_click_count},
          {"disclosed_positions", rec.qber.disclosed_positions},
          {"qber_windows", windows},
          {"detection_events", clicks},
          {"photocurrent_samples", rec.photocurrent_samples},
          {"source_tap", rec.source_tap},
          {"power_by_window", power},
          {"eve_log", eve},
          {"clicks_per_detector", rec.clicks_per_detector},
          {"final_damage", std::string(optics::damage_token(rec.final_damage))}};
}

}  // namespace qkdioc::serial
