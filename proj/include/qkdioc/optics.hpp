#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "qkdioc/ioc_types.hpp"
#include "qkdioc/rng.hpp"

namespace qkdioc::optics {

enum class Basis : std::uint8_t { Rectilinear, Diagonal };

enum class PhotonStatistics { Poissonian, SinglePhoton };

/// Weak-coherent-pulse laser source (or an ideal single-photon emitter).
struct SourceParams {
  PhotonStatistics statistics = PhotonStatistics::Poissonian;
  double mu = 0.1;                // mean photon number per pulse
  double pulse_rate = 1.0e6;      // Hz
  double photon_energy = 2.55e-19;  // J

  void validate() const;
  /// Optical power of a pulse carrying `photons` photons, averaged over its slot.
  double power_of(std::uint64_t photons) const noexcept {
    return static_cast<double>(photons) * photon_energy * pulse_rate;
  }
};

enum class TimeShift : std::uint8_t { None, Early, Late };

/// One gate slot's worth of light arriving somewhere along the link.
///
/// `power` is the total slot-averaged optical power. The classical parts injected
/// by an attacker are tracked separately: `cw_power` is continuous light shared by
/// both detectors, `bright_power` is a pulsed component routed like a qubit.
struct Pulse {
  std::uint64_t slot = 0;
  std::uint32_t photon_number = 0;
  std::uint8_t bit = 0;
  Basis basis = Basis::Rectilinear;
  double phase_offset = 0.0;  // radians, [0, 2pi)
  double power = 0.0;
  double cw_power = 0.0;
  double bright_power = 0.0;
  std::uint32_t after_gate_photons = 0;
  TimeShift time_shift = TimeShift::None;

  double classical_power() const noexcept { return cw_power + bright_power; }
  bool operator==(const Pulse&) const = default;
};

enum class Medium { Fiber, FreeSpace };

struct ChannelParams {
  double loss_db = 0.0;
  Medium medium = Medium::Fiber;
  double background_click_prob = 0.0;

  void validate() const;
  double transmittance() const noexcept;
};

struct DetectorParams {
  double efficiency = 0.5;
  double dark_count_prob = 1.0e-6;
  double misalignment_error = 0.0;  // decoder flip probability for basis-matched photons
  double afterpulse_prob = 0.0;
  std::uint32_t afterpulse_decay_gates = 5;
  std::uint32_t deadtime_gates = 0;
  double gate_width = 1.0e-9;       // s
  double adc_period = 1.0e-6;       // s
  double spec_deadtime = 0.0;       // s, manufacturer value
  double blinding_power = 1.0e-6;   // W
  double trigger_power = 1.0e-4;    // W, per detector
  double photocurrent_per_watt = 1.0e12;
  std::uint32_t photocurrent_cap = 65535;
  double thermal_damage_power = 1.0e-3;  // W, window average
  double melt_power = 1.0e3;             // W, window average
  /// Efficiency multipliers for detector 0/1 under an early or late arrival shift.
  std::array<double, 2> early_shift_efficiency{1.0, 1.0 / 3.0};
  std::array<double, 2> late_shift_efficiency{1.0 / 3.0, 1.0};

  void validate() const;
  double efficiency_of(int detector, TimeShift shift) const noexcept;
};

enum class DamageState : std::uint8_t { Intact, ThermallyBlinded, Melted };

/// Per-detector mutable state, advanced slot by slot.
struct DetectorState {
  bool blinded = false;
  std::uint64_t dead_until = 0;
  double afterpulse_hazard = 0.0;
  DamageState damage = DamageState::Intact;
};

/// Two-detector receiver: index 0 counts bit 0, index 1 counts bit 1.
using ReceiverState = std::array<DetectorState, 2>;

enum class ClickCause : std::uint8_t { None, Signal, DarkCount, Afterpulse, Forced, Background };

std::string_view cause_token(ClickCause c) noexcept;
std::string_view damage_token(DamageState d) noexcept;
std::string_view basis_token(Basis b) noexcept;

struct DetectionEvent {
  std::uint64_t slot = 0;
  std::uint8_t detector_id = 0;
  bool click = false;
  ClickCause cause = ClickCause::None;
  double timetag = 0.0;
  std::uint32_t photocurrent = 0;

  bool operator==(const DetectionEvent&) const = default;
};

struct GateOutcome {
  std::array<DetectionEvent, 2> events;
  std::uint32_t photocurrent = 0;  // receiver readout for the slot

  int clicks() const noexcept { return int(events[0].click) + int(events[1].click); }
};

/// Things about the light source a receiver needs to turn watts into photons.
struct GateContext {
  double pulse_rate = 1.0e6;
  double photon_energy = 2.55e-19;
};

std::uint32_t sample_photon_number(const SourceParams& source, Engine& rng);

/// Binomial thinning of the photons; every power component scales by transmittance.
Pulse apply_channel_loss(const Pulse& pulse, const ChannelParams& channel, Engine& rng);

/// Error probability of a basis-matched detection: misalignment combined with the
/// interferometric error sin^2(phase/2).
double matched_basis_error(double misalignment, double phase_offset) noexcept;

/// Mean stray photons reaching one detector in one gate from continuous light.
double stray_photons_per_gate(double cw_power, const DetectorParams& params,
                              const GateContext& ctx) noexcept;

/// Per-gate background click probability on one detector, ambient plus stray CW light.
double background_click_probability(const Pulse& pulse, const ChannelParams& channel,
                                    const DetectorParams& params, const GateContext& ctx,
                                    int detector) noexcept;

/// One gate of the two-detector receiver. Updates `state` in place.
GateOutcome detect_gate(const Pulse& pulse, Basis bob_basis, const ChannelParams& channel,
                        const DetectorParams& params, const GateContext& ctx,
                        ReceiverState& state, Engine& rng);

/// Latch damage from a window-averaged received power. Never reverses.
void apply_window_damage(ReceiverState& state, double window_power, const DetectorParams& params);

/// Clears latched blinding (explicit scenario reset). Damage persists.
void reset_blinding(ReceiverState& state) noexcept;

/// Time-averaged power over `window`: sum of slot energies / window duration.
/// Slot powers are already slot averages, so the pulse rate cancels. Pulses outside
/// the window are ignored; slots without a pulse count as vacuum.
/// Throws InsufficientData on an empty window.
double compute_received_power(std::span<const Pulse> pulses, SlotRange window);

}  // namespace qkdioc::optics
