#include "qkdioc/protocol.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "qkdioc/errors.hpp"

namespace qkdioc::protocol {

using optics::Basis;

void Bb84Config::validate() const {
  if (num_pulses < 1) throw ValidationError("protocol.num_pulses must be >= 1");
  if (!(basis_bias > 0.0 && basis_bias < 1.0)) throw ValidationError("protocol.basis_bias must lie in (0,1)");
  if (!(qber_sample_fraction > 0.0 && qber_sample_fraction <= 1.0))
    throw ValidationError("protocol.qber_sample_fraction must lie in (0,1]");
  if (qber_window_bits < 1) throw ValidationError("protocol.qber_window_bits must be >= 1");
  if (monitor_window_slots < 1) throw ValidationError("protocol.monitor_window_slots must be >= 1");
}

SiftResult sift(const BasisRecord& alice, const BasisRecord& bob,
                std::span<const optics::DetectionEvent> clicks) {
  if (alice.size() != bob.size() || alice.bits.size() != alice.bases.size())
    throw ValidationError("sift: Alice and Bob records cover different slot ranges");
  SiftResult result;
  std::size_t i = 0;
  while (i < clicks.size()) {
    const std::uint64_t slot = clicks[i].slot;
    if (slot >= alice.size()) throw ValidationError("sift: detection event outside the recorded slot range");
    std::size_t j = i;
    std::array<bool, 2> fired{false, false};
    while (j < clicks.size() && clicks[j].slot == slot) {
      if (clicks[j].click) fired[clicks[j].detector_id & 1] = true;
      ++j;
    }
    const bool matched = alice.bases[slot] == bob.bases[slot];
    if (fired[0] && fired[1]) {
      ++result.double_click_count;
    } else if (matched && (fired[0] || fired[1])) {
      result.key.indices.push_back(slot);
      result.key.alice_bits.push_back(alice.bits[slot]);
      result.key.bob_bits.push_back(fired[1] ? 1 : 0);
    }
    i = j;
  }
  return result;
}

std::uint64_t QberEstimate::error_bits() const noexcept {
  std::uint64_t n = 0;
  for (const auto& w : windows) n += w.error_bits;
  return n;
}

std::uint64_t QberEstimate::total_bits() const noexcept {
  std::uint64_t n = 0;
  for (const auto& w : windows) n += w.total_bits;
  return n;
}

double QberEstimate::pooled_qber() const noexcept {
  const auto total = total_bits();
  return total == 0 ? 0.0 : static_cast<double>(error_bits()) / static_cast<double>(total);
}

QberEstimate estimate_qber(const SiftedKey& key, double sample_fraction, std::uint64_t window_size,
                           Engine& rng) {
  if (key.empty()) throw InsufficientData("estimate_qber: sifted key is empty");
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
    throw ValidationError("estimate_qber: sample_fraction must lie in (0,1]");
  if (window_size < 1) throw ValidationError("estimate_qber: window_size must be >= 1");

  const std::size_t n = key.size();
  const auto disclosed_count =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(sample_fraction * static_cast<double>(n))));

  QberEstimate est;
  std::vector<std::uint64_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::uint64_t{0});
  if (disclosed_count < n) {
    std::vector<std::uint64_t> chosen;
    chosen.reserve(disclosed_count);
    std::sample(positions.begin(), positions.end(), std::back_inserter(chosen), disclosed_count, rng);
    est.disclosed_positions = std::move(chosen);
  } else {
    est.disclosed_positions = positions;
  }

  std::vector<bool> disclosed(n, false);
  for (auto p : est.disclosed_positions) disclosed[p] = true;
  for (std::size_t p = 0; p < n; ++p) {
    if (disclosed[p]) continue;
    est.remaining_key.indices.push_back(key.indices[p]);
    est.remaining_key.alice_bits.push_back(key.alice_bits[p]);
    est.remaining_key.bob_bits.push_back(key.bob_bits[p]);
  }

  // Window boundaries over the disclosed sample, in slot order.
  const std::size_t m = est.disclosed_positions.size();
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < m; s += window_size) starts.push_back(s);
  if (starts.size() > 1 && m - starts.back() < (window_size + 1) / 2) starts.pop_back();

  for (std::size_t w = 0; w < starts.size(); ++w) {
    const std::size_t begin = starts[w];
    const std::size_t end = w + 1 < starts.size() ? starts[w + 1] : m;
    QberWindow win;
    win.window_id = w;
    win.total_bits = end - begin;
    for (std::size_t k = begin; k < end; ++k) {
      const auto p = est.disclosed_positions[k];
      if (key.alice_bits[p] != key.bob_bits[p]) ++win.error_bits;
    }
    win.slot_range = {key.indices[est.disclosed_positions[begin]],
                      key.indices[est.disclosed_positions[end - 1]] + 1};
    win.qber = static_cast<double>(win.error_bits) / static_cast<double>(win.total_bits);
    est.windows.push_back(win);
  }
  return est;
}

SessionRecord run_session(const Bb84Config& cfg, const optics::SourceParams& source,
                          const optics::ChannelParams& channel, const optics::DetectorParams& detector,
                          const std::optional<attacks::AttackConfig>& attack, std::uint64_t seed) {
  cfg.validate();
  source.validate();
  channel.validate();
  detector.validate();
  if (attack) attacks::validate_attack(*attack, channel, detector);

  const RngStreams streams(seed);
  Engine alice_rng = streams.stream("alice");
  Engine source_rng = streams.stream("source");
  Engine channel_rng = streams.stream("channel");
  Engine bob_rng = streams.stream("bob");
  Engine detector_rng = streams.stream("detector");
  Engine sample_rng = streams.stream("qber-sample");

  std::optional<attacks::Attacker> eve;
  if (attack) eve.emplace(*attack, source, streams.stream("eve"));

  const std::uint64_t n = cfg.num_pulses;
  SessionRecord rec;
  rec.num_slots = n;
  rec.pulse_rate = source.pulse_rate;
  rec.alice.bits.reserve(n);
  rec.alice.bases.reserve(n);
  rec.bob.bases.reserve(n);
  rec.bob.bits.reserve(n);
  rec.source_tap.reserve(n);
  rec.photocurrent_samples.reserve(n);

  std::bernoulli_distribution fair(0.5);
  std::bernoulli_distribution rectilinear(cfg.basis_bias);
  const optics::GateContext ctx{source.pulse_rate, source.photon_energy};
  optics::ReceiverState receiver{};

  long double window_total = 0.0;
  long double window_classical = 0.0;
  std::uint64_t window_begin = 0;

  for (std::uint64_t slot = 0; slot < n; ++slot) {
    optics::Pulse pulse;
    pulse.slot = slot;
    pulse.bit = fair(alice_rng) ? 1 : 0;
    pulse.basis = rectilinear(alice_rng) ? Basis::Rectilinear : Basis::Diagonal;
    pulse.photon_number = optics::sample_photon_number(source, source_rng);
    pulse.power = source.power_of(pulse.photon_number);
    rec.alice.bits.push_back(pulse.bit);
    rec.alice.bases.push_back(pulse.basis);
    rec.source_tap.push_back(pulse.photon_number);

    if (eve) pulse = eve->transform(pulse);
    pulse = optics::apply_channel_loss(pulse, channel, channel_rng);

    const Basis bob_basis = rectilinear(bob_rng) ? Basis::Rectilinear : Basis::Diagonal;
    rec.bob.bases.push_back(bob_basis);
    const optics::GateOutcome gate =
        optics::detect_gate(pulse, bob_basis, channel, detector, ctx, receiver, detector_rng);
    rec.photocurrent_samples.push_back(gate.photocurrent);
    std::uint8_t bob_bit = 0;
    for (const auto& ev : gate.events) {
      if (!ev.click) continue;
      rec.detection_events.push_back(ev);
      ++rec.clicks_per_detector[ev.detector_id];
      bob_bit = ev.detector_id;
    }
    rec.bob.bits.push_back(bob_bit);

    window_total += pulse.power;
    window_classical += pulse.classical_power();
    const bool window_done = (slot + 1 - window_begin) == cfg.monitor_window_slots || slot + 1 == n;
    if (window_done) {
      const long double len = static_cast<long double>(slot + 1 - window_begin);
      PowerWindow pw;
      pw.window = {window_begin, slot + 1};
      pw.total_power = static_cast<double>(window_total / len);
      pw.classical_power = static_cast<double>(window_classical / len);
      optics::apply_window_damage(receiver, pw.total_power, detector);
      pw.damage_after = receiver[0].damage;
      rec.power_by_window.push_back(pw);
      window_total = 0.0L;
      window_classical = 0.0L;
      window_begin = slot + 1;
    }
  }
  rec.final_damage = receiver[0].damage;

  SiftResult sifted = sift(rec.alice, rec.bob, rec.detection_events);
  rec.sifted_key = std::move(sifted.key);
  rec.double_click_count = sifted.double_click_count;
  if (!rec.sifted_key.empty())
    rec.qber = estimate_qber(rec.sifted_key, cfg.qber_sample_fraction, cfg.qber_window_bits, sample_rng);
  if (eve) rec.eve_log = eve->take_log();
  return rec;
}

}  // namespace qkdioc::protocol
