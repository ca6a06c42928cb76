#include "qkdioc/attacks.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "qkdioc/errors.hpp"

namespace qkdioc::attacks {

using optics::Basis;
using optics::Pulse;

namespace {

constexpr double kRemapCalibrationError = 0.197;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool coin(double p, Engine& rng) { return std::bernoulli_distribution(p)(rng); }

Basis pick_basis(double rectilinear_bias, Engine& rng) {
  return coin(rectilinear_bias, rng) ? Basis::Rectilinear : Basis::Diagonal;
}

/// Ideal projective measurement of a qubit prepared as (bit, basis).
std::uint8_t measure(const Pulse& in, Basis basis, Engine& rng) {
  if (basis == in.basis) return in.bit;
  return coin(0.5, rng) ? 1 : 0;
}

Pulse vacuum_like(const Pulse& in) {
  Pulse out = in;
  out.photon_number = 0;
  out.phase_offset = 0.0;
  out.power = in.classical_power();
  return out;
}

}  // namespace

double phase_remap_error(double remap_delta) noexcept {
  const double s = std::sin(remap_delta / 2.0);
  return s * s;
}

double calibrated_remap_delta() noexcept {
  return 2.0 * std::asin(std::sqrt(kRemapCalibrationError));
}

std::string_view technique_id(const AttackConfig& cfg) noexcept {
  return std::visit(Overloaded{
                        [](const InterceptResend&) { return std::string_view("env-intercept-resend"); },
                        [](const Pns&) { return std::string_view("src-photon-number-splitting"); },
                        [](const PhaseRemap&) { return std::string_view("src-phase-remapping"); },
                        [](const BlindingFakedState&) { return std::string_view("det-blinding"); },
                        [](const AfterGate&) { return std::string_view("det-after-gate"); },
                        [](const TimeShiftAttack&) { return std::string_view("det-time-shift"); },
                        [](const JammingDos&) { return std::string_view("env-optical-jamming"); },
                    },
                    cfg);
}

std::string_view attack_token(const AttackConfig& cfg) noexcept {
  return std::visit(Overloaded{
                        [](const InterceptResend&) { return std::string_view("intercept_resend"); },
                        [](const Pns&) { return std::string_view("pns"); },
                        [](const PhaseRemap&) { return std::string_view("phase_remap"); },
                        [](const BlindingFakedState&) { return std::string_view("blinding_faked_state"); },
                        [](const AfterGate&) { return std::string_view("after_gate"); },
                        [](const TimeShiftAttack&) { return std::string_view("time_shift"); },
                        [](const JammingDos&) { return std::string_view("jamming_dos"); },
                    },
                    cfg);
}

void validate_attack(const AttackConfig& cfg, const optics::ChannelParams& channel,
                     const optics::DetectorParams& detector) {
  const double t = channel.transmittance();
  std::visit(
      Overloaded{
          [](const InterceptResend& c) {
            if (!(c.eve_basis_bias >= 0.0 && c.eve_basis_bias <= 1.0))
              throw ValidationError("intercept_resend.eve_basis_bias must lie in [0,1]");
          },
          [](const Pns&) {},
          [](const PhaseRemap& c) {
            if (!std::isfinite(c.remap_delta)) throw ValidationError("phase_remap.remap_delta must be finite");
          },
          [&](const BlindingFakedState& c) {
            if (!(c.cw_power >= detector.blinding_power))
              throw ValidationError("blinding_faked_state.cw_power " + std::to_string(c.cw_power) +
                                    " W is below detector.blinding_power " +
                                    std::to_string(detector.blinding_power) + " W");
            if (!(c.faked_pulse_power >= c.cw_power))
              throw ValidationError("blinding_faked_state.faked_pulse_power must be >= cw_power");
            if (!(c.cw_power * t >= detector.blinding_power))
              throw ValidationError("blinding_faked_state.cw_power after channel loss is below detector.blinding_power");
            if (!(c.faked_pulse_power * t >= detector.trigger_power))
              throw ValidationError(
                  "blinding_faked_state.faked_pulse_power after channel loss is below detector.trigger_power");
            if (!(c.target_qber >= 0.0 && c.target_qber <= 0.5))
              throw ValidationError("blinding_faked_state.target_qber must lie in [0,0.5]");
          },
          [](const AfterGate& c) {
            if (c.injection_offset_gates < 1)
              throw ValidationError("after_gate.injection_offset_gates must be positive");
            if (c.multiphoton_n < 2) throw ValidationError("after_gate.multiphoton_n must be >= 2");
          },
          [](const TimeShiftAttack&) {},
          [](const JammingDos& c) {
            if (!(c.laser_power >= 0.0)) throw ValidationError("jamming_dos.laser_power must be >= 0");
            if (!(c.duty > 0.0 && c.duty <= 1.0)) throw ValidationError("jamming_dos.duty must lie in (0,1]");
          },
      },
      cfg);
}

std::string_view action_token(EveAction a) noexcept {
  switch (a) {
    case EveAction::Intercept: return "intercept";
    case EveAction::Split: return "split";
    case EveAction::Block: return "block";
    case EveAction::Remap: return "remap";
    case EveAction::Blind: return "blind";
    case EveAction::FakedState: return "faked_state";
    case EveAction::Inject: return "inject";
    case EveAction::Shift: return "shift";
    case EveAction::Jam: return "jam";
  }
  return "intercept";
}

Attacker::Attacker(AttackConfig cfg, optics::SourceParams source, Engine rng)
    : cfg_(std::move(cfg)), source_(source), rng_(std::move(rng)) {}

void Attacker::record(EveLogEntry entry) { log_.push_back(std::move(entry)); }

Pulse Attacker::transform(const Pulse& in) {
  return std::visit(Overloaded{
                        [&](const InterceptResend& c) { return intercept_resend(in, c); },
                        [&](const Pns& c) { return pns(in, c); },
                        [&](const PhaseRemap& c) { return phase_remap(in, c); },
                        [&](const BlindingFakedState& c) { return blinding(in, c); },
                        [&](const AfterGate& c) { return after_gate(in, c); },
                        [&](const TimeShiftAttack& c) { return time_shift(in, c); },
                        [&](const JammingDos& c) { return jamming(in, c); },
                    },
                    cfg_);
}

Pulse Attacker::intercept_resend(const Pulse& in, const InterceptResend& c) {
  if (in.photon_number == 0) return in;
  const Basis eve_basis = pick_basis(c.eve_basis_bias, rng_);
  const std::uint8_t result = measure(in, eve_basis, rng_);
  Pulse out = in;
  out.photon_number = 1;
  out.bit = result;
  out.basis = eve_basis;
  out.phase_offset = 0.0;
  out.power = source_.power_of(1) + in.classical_power();
  record({in.slot, EveAction::Intercept, result, eve_basis, std::nullopt});
  return out;
}

Pulse Attacker::pns(const Pulse& in, const Pns& c) {
  if (in.photon_number >= 2) {
    Pulse out = in;
    out.photon_number = in.photon_number - 1;
    out.power = source_.power_of(out.photon_number) + in.classical_power();
    // Ideal quantum memory: the stored photon is read in the revealed basis.
    record({in.slot, EveAction::Split, in.bit, in.basis, std::nullopt});
    return out;
  }
  if (in.photon_number == 1 && c.block_single_photons) {
    record({in.slot, EveAction::Block, std::nullopt, std::nullopt, std::nullopt});
    return vacuum_like(in);
  }
  return in;
}

Pulse Attacker::phase_remap(const Pulse& in, const PhaseRemap& c) {
  if (in.photon_number == 0) return in;
  const double err = phase_remap_error(c.remap_delta);
  const std::uint8_t learned = coin(err, rng_) ? std::uint8_t(in.bit ^ 1) : in.bit;
  Pulse out = in;
  out.photon_number = 1;
  out.phase_offset = std::fmod(std::fmod(in.phase_offset + c.remap_delta, 2.0 * std::numbers::pi) +
                                   2.0 * std::numbers::pi,
                               2.0 * std::numbers::pi);
  out.power = source_.power_of(1) + in.classical_power();
  record({in.slot, EveAction::Remap, learned, in.basis, std::nullopt});
  return out;
}

Pulse Attacker::blinding(const Pulse& in, const BlindingFakedState& c) {
  Pulse out = vacuum_like(in);
  out.cw_power += c.cw_power;
  if (in.slot < c.lead_in_slots || in.photon_number == 0) {
    out.power = out.classical_power();
    record({in.slot, EveAction::Blind, std::nullopt, std::nullopt, c.cw_power});
    return out;
  }
  const Basis eve_basis = pick_basis(0.5, rng_);
  std::uint8_t sent = measure(in, eve_basis, rng_);
  if (c.target_qber > 0.0 && coin(c.target_qber, rng_)) sent ^= 1;
  out.bit = sent;
  out.basis = eve_basis;
  out.bright_power += c.faked_pulse_power;
  out.power = out.classical_power();
  // Bob's outcome equals the faked bit whenever he clicks, so Eve knows it.
  record({in.slot, EveAction::FakedState, sent, eve_basis, c.cw_power + c.faked_pulse_power});
  return out;
}

Pulse Attacker::after_gate(const Pulse& in, const AfterGate& c) {
  pending_injections_[in.slot + c.injection_offset_gates - 1] += c.multiphoton_n;
  Pulse out = in;
  auto it = pending_injections_.find(in.slot);
  if (it != pending_injections_.end()) {
    out.after_gate_photons += it->second;
    record({in.slot, EveAction::Inject, std::nullopt, std::nullopt, source_.power_of(it->second)});
    pending_injections_.erase(it);
  }
  // Stale entries cannot exist: every key is >= the slot that created it.
  return out;
}

Pulse Attacker::time_shift(const Pulse& in, const TimeShiftAttack& c) {
  Pulse out = in;
  out.time_shift =
      c.shift_direction == ShiftDirection::Early ? optics::TimeShift::Early : optics::TimeShift::Late;
  if (in.photon_number > 0) record({in.slot, EveAction::Shift, std::nullopt, std::nullopt, std::nullopt});
  return out;
}

Pulse Attacker::jamming(const Pulse& in, const JammingDos& c) {
  Pulse out = in;
  const double added = c.laser_power * c.duty;
  out.cw_power += added;
  out.power += added;
  record({in.slot, EveAction::Jam, std::nullopt, std::nullopt, added});
  return out;
}

std::pair<std::vector<Pulse>, EveLog> apply_attack(const AttackConfig& cfg, std::span<const Pulse> pulses,
                                                   const optics::SourceParams& source, Engine rng) {
  Attacker eve(cfg, source, std::move(rng));
  std::vector<Pulse> out;
  out.reserve(pulses.size());
  for (const Pulse& p : pulses) out.push_back(eve.transform(p));
  return {std::move(out), eve.take_log()};
}

}  // namespace qkdioc::attacks
