#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "qkdioc/optics.hpp"
#include "qkdioc/rng.hpp"

namespace qkdioc::attacks {

/// Error probability the phase-remapping attacker induces on a sifted bit.
double phase_remap_error(double remap_delta) noexcept;

/// Remap delta at which the induced error equals the 19.7% calibration point.
double calibrated_remap_delta() noexcept;

struct InterceptResend {
  double eve_basis_bias = 0.5;  // probability Eve measures rectilinear
};

struct Pns {
  bool block_single_photons = false;
};

struct PhaseRemap {
  double remap_delta = calibrated_remap_delta();  // radians
};

struct BlindingFakedState {
  double cw_power = 2.0e-5;           // W, at Eve's output
  double faked_pulse_power = 3.0e-4;  // W, at Eve's output
  std::uint64_t lead_in_slots = 20000;
  double target_qber = 0.0;  // deliberate flip rate on resent bits
};

struct AfterGate {
  std::uint32_t injection_offset_gates = 1;
  std::uint32_t multiphoton_n = 4;
};

enum class ShiftDirection { Early, Late };

struct TimeShiftAttack {
  ShiftDirection shift_direction = ShiftDirection::Early;
};

struct JammingDos {
  double laser_power = 1.0e-3;  // W
  double duty = 1.0;
};

using AttackConfig = std::variant<InterceptResend, Pns, PhaseRemap, BlindingFakedState, AfterGate,
                                  TimeShiftAttack, JammingDos>;


/// Knowledge-base technique id exercised by an attack configuration.
std::string_view technique_id(const AttackConfig& cfg) noexcept;
std::string_view attack_token(const AttackConfig& cfg) noexcept;

/// Rejects configurations that cannot work against the given link. Throws ValidationError.
void validate_attack(const AttackConfig& cfg, const optics::ChannelParams& channel,
                     const optics::DetectorParams& detector);

enum class EveAction : std::uint8_t {
  Intercept,
  Split,
  Block,
  Remap,
  Blind,
  FakedState,
  Inject,
  Shift,
  Jam
};

std::string_view action_token(EveAction a) noexcept;

struct EveLogEntry {
  std::uint64_t slot = 0;
  EveAction action = EveAction::Intercept;
  std::optional<std::uint8_t> learned_bit;
  std::optional<optics::Basis> learned_basis;
  std::optional<double> injected_power;

  bool operator==(const EveLogEntry&) const = default;
};

/// Audit trail, ordered by slot, at most one entry per slot.
using EveLog = std::vector<EveLogEntry>;

/// Stateful per-run transformer, fed one slot at a time in slot order.
class Attacker {
 public:
  Attacker(AttackConfig cfg, optics::SourceParams source, Engine rng);

  optics::Pulse transform(const optics::Pulse& in);

  const EveLog& log() const noexcept { return log_; }
  EveLog take_log() { return std::move(log_); }
  const AttackConfig& config() const noexcept { return cfg_; }

 private:
  optics::Pulse intercept_resend(const optics::Pulse& in, const InterceptResend& c);
  optics::Pulse pns(const optics::Pulse& in, const Pns& c);
  optics::Pulse phase_remap(const optics::Pulse& in, const PhaseRemap& c);
  optics::Pulse blinding(const optics::Pulse& in, const BlindingFakedState& c);
  optics::Pulse after_gate(const optics::Pulse& in, const AfterGate& c);
  optics::Pulse time_shift(const optics::Pulse& in, const TimeShiftAttack& c);
  optics::Pulse jamming(const optics::Pulse& in, const JammingDos& c);

  void record(EveLogEntry entry);

  AttackConfig cfg_;
  optics::SourceParams source_;
  Engine rng_;
  EveLog log_;
  std::map<std::uint64_t, std::uint32_t> pending_injections_;
};

/// Whole-stream form of Attacker. Output slot count equals input slot count.
std::pair<std::vector<optics::Pulse>, EveLog> apply_attack(const AttackConfig& cfg,
                                                           std::span<const optics::Pulse> pulses,
                                                           const optics::SourceParams& source,
                                                           Engine rng);

}  // namespace qkdioc::attacks
