#include "qkdioc/optics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "qkdioc/errors.hpp"

namespace qkdioc::optics {

namespace {

bool is_probability(double p) noexcept { return p >= 0.0 && p <= 1.0; }

std::uint32_t binomial(std::uint32_t trials, double p, Engine& rng) {
  if (trials == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  if (trials == 1) return std::bernoulli_distribution(p)(rng) ? 1u : 0u;
  return std::binomial_distribution<std::uint32_t>(trials, p)(rng);
}

double uniform(Engine& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::uint32_t readout(double watts, const DetectorParams& params) noexcept {
  const double counts = std::round(params.photocurrent_per_watt * watts);
  if (!(counts < static_cast<double>(params.photocurrent_cap))) return params.photocurrent_cap;
  return static_cast<std::uint32_t>(std::max(0.0, counts));
}

}  // namespace

void SourceParams::validate() const {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ValidationError("source.mu must be >= 0");
  if (!(pulse_rate > 0.0)) throw ValidationError("source.pulse_rate must be > 0");
  if (!(photon_energy > 0.0)) throw ValidationError("source.photon_energy must be > 0");
}

void ChannelParams::validate() const {
  if (!(loss_db >= 0.0) || !std::isfinite(loss_db)) throw ValidationError("channel.loss_db must be >= 0");
  if (!is_probability(background_click_prob))
    throw ValidationError("channel.background_click_prob must lie in [0,1]");
}

double ChannelParams::transmittance() const noexcept { return std::pow(10.0, -loss_db / 10.0); }

void DetectorParams::validate() const {
  if (!is_probability(efficiency)) throw ValidationError("detector.efficiency must lie in [0,1]");
  if (!is_probability(dark_count_prob)) throw ValidationError("detector.dark_count_prob must lie in [0,1]");
  if (!is_probability(misalignment_error))
    throw ValidationError("detector.misalignment_error must lie in [0,1]");
  if (!is_probability(afterpulse_prob)) throw ValidationError("detector.afterpulse_prob must lie in [0,1]");
  if (afterpulse_decay_gates == 0) throw ValidationError("detector.afterpulse_decay_gates must be positive");
  if (!(gate_width > 0.0)) throw ValidationError("detector.gate_width must be > 0");
  if (!(adc_period > 0.0)) throw ValidationError("detector.adc_period must be > 0");
  if (!(spec_deadtime >= 0.0)) throw ValidationError("detector.spec_deadtime must be >= 0");
  if (!(blinding_power > 0.0)) throw ValidationError("detector.blinding_power must be > 0");
  if (!(trigger_power > blinding_power))
    throw ValidationError("detector.trigger_power must exceed detector.blinding_power");
  if (!(photocurrent_per_watt >= 0.0)) throw ValidationError("detector.photocurrent_per_watt must be >= 0");
  if (!(thermal_damage_power > 0.0) || !(melt_power > thermal_damage_power))
    throw ValidationError("detector damage thresholds must satisfy 0 < thermal < melt");
  for (double m : early_shift_efficiency)
    if (!is_probability(m)) throw ValidationError("detector.early_shift_efficiency entries must lie in [0,1]");
  for (double m : late_shift_efficiency)
    if (!is_probability(m)) throw ValidationError("detector.late_shift_efficiency entries must lie in [0,1]");
}

double DetectorParams::efficiency_of(int detector, TimeShift shift) const noexcept {
  switch (shift) {
    case TimeShift::Early:
      return efficiency * early_shift_efficiency[detector];
    case TimeShift::Late:
      return efficiency * late_shift_efficiency[detector];
    case TimeShift::None:
      break;
  }
  return efficiency;
}

std::string_view cause_token(ClickCause c) noexcept {
  switch (c) {
    case ClickCause::None: return "none";
    case ClickCause::Signal: return "signal";
    case ClickCause::DarkCount: return "dark_count";
    case ClickCause::Afterpulse: return "afterpulse";
    case ClickCause::Forced: return "forced";
    case ClickCause::Background: return "background";
  }
  return "none";
}

std::string_view damage_token(DamageState d) noexcept {
  switch (d) {
    case DamageState::Intact: return "intact";
    case DamageState::ThermallyBlinded: return "thermally_blinded";
    case DamageState::Melted: return "melted";
  }
  return "intact";
}

std::string_view basis_token(Basis b) noexcept {
  return b == Basis::Rectilinear ? "rectilinear" : "diagonal";
}

std::uint32_t sample_photon_number(const SourceParams& source, Engine& rng) {
  if (source.statistics == PhotonStatistics::SinglePhoton) return 1;
  if (source.mu <= 0.0) return 0;
  return std::poisson_distribution<std::uint32_t>(source.mu)(rng);
}

Pulse apply_channel_loss(const Pulse& pulse, const ChannelParams& channel, Engine& rng) {
  if (channel.loss_db == 0.0) return pulse;
  const double t = channel.transmittance();
  Pulse out = pulse;
  out.photon_number = binomial(pulse.photon_number, t, rng);
  out.after_gate_photons = binomial(pulse.after_gate_photons, t, rng);
  out.power = pulse.power * t;
  out.cw_power = pulse.cw_power * t;
  out.bright_power = pulse.bright_power * t;
  return out;
}

double matched_basis_error(double misalignment, double phase_offset) noexcept {
  const double s = std::sin(phase_offset / 2.0);
  const double phase_err = s * s;
  return misalignment * (1.0 - phase_err) + phase_err * (1.0 - misalignment);
}

double stray_photons_per_gate(double cw_power, const DetectorParams& params,
                              const GateContext& ctx) noexcept {
  return 0.5 * cw_power * params.gate_width / ctx.photon_energy;
}

double background_click_probability(const Pulse& pulse, const ChannelParams& channel,
                                    const DetectorParams& params, const GateContext& ctx,
                                    int detector) noexcept {
  const double eta = params.efficiency_of(detector, pulse.time_shift);
  const double stray = stray_photons_per_gate(pulse.cw_power, params, ctx);
  const double p_stray = -std::expm1(-eta * stray);
  return 1.0 - (1.0 - channel.background_click_prob) * (1.0 - p_stray);
}

GateOutcome detect_gate(const Pulse& pulse, Basis bob_basis, const ChannelParams& channel,
                        const DetectorParams& params, const GateContext& ctx,
                        ReceiverState& state, Engine& rng) {
  GateOutcome out;
  const double timetag = static_cast<double>(pulse.slot) / ctx.pulse_rate;
  for (int d = 0; d < 2; ++d) {
    out.events[d] = DetectionEvent{pulse.slot, static_cast<std::uint8_t>(d), false, ClickCause::None,
                                   timetag, 0};
  }

  const bool matched = pulse.basis == bob_basis;
  const int bit = pulse.bit & 1;

  // Route photons and classical light onto the two detectors.
  std::array<std::uint32_t, 2> photons{0, 0};
  if (pulse.photon_number > 0) {
    if (matched) {
      const std::uint32_t wrong =
          binomial(pulse.photon_number, matched_basis_error(params.misalignment_error, pulse.phase_offset), rng);
      photons[bit] = pulse.photon_number - wrong;
      photons[1 - bit] = wrong;
    } else {
      photons[0] = binomial(pulse.photon_number, 0.5, rng);
      photons[1] = pulse.photon_number - photons[0];
    }
  }
  std::array<double, 2> pulsed{0.0, 0.0};
  if (matched) {
    pulsed[bit] = pulse.bright_power;
  } else {
    pulsed[0] = pulse.bright_power / 2.0;
    pulsed[1] = pulse.bright_power / 2.0;
  }
  const std::array<double, 2> classical{pulse.cw_power / 2.0 + pulsed[0], pulse.cw_power / 2.0 + pulsed[1]};
  const double quantum_power = std::max(0.0, pulse.power - pulse.classical_power());

  const bool melted = state[0].damage == DamageState::Melted;
  if (!melted) {
    out.photocurrent = readout(pulse.power, params);
    for (int d = 0; d < 2; ++d) {
      const double share = pulse.photon_number > 0
                               ? quantum_power * photons[d] / static_cast<double>(pulse.photon_number)
                               : 0.0;
      out.events[d].photocurrent = readout(classical[d] + share, params);
    }
  }

  if (pulse.power >= params.blinding_power) {
    for (auto& s : state) s.blinded = true;
  }

  const double decay = std::exp(-1.0 / static_cast<double>(params.afterpulse_decay_gates));

  for (int d = 0; d < 2; ++d) {
    DetectorState& s = state[d];
    DetectionEvent& ev = out.events[d];
    const double hazard = s.afterpulse_hazard;
    const bool dead = pulse.slot < s.dead_until;

    if (s.damage == DamageState::Melted) {
      // no response
    } else if (s.blinded || s.damage == DamageState::ThermallyBlinded) {
      // Linear mode: a bright pulse above the trigger level registers, steady light does not.
      if (!dead && pulsed[d] >= params.trigger_power) ev.cause = ClickCause::Forced;
    } else if (!dead) {
      const double eta = params.efficiency_of(d, pulse.time_shift);
      const double p_signal = photons[d] > 0 ? 1.0 - std::pow(1.0 - eta, photons[d]) : 0.0;
      if (p_signal > 0.0 && uniform(rng) < p_signal) {
        ev.cause = ClickCause::Signal;
      } else if (params.dark_count_prob > 0.0 && uniform(rng) < params.dark_count_prob) {
        ev.cause = ClickCause::DarkCount;
      } else if (hazard > 0.0 && uniform(rng) < hazard) {
        ev.cause = ClickCause::Afterpulse;
      } else {
        const double p_bg = background_click_probability(pulse, channel, params, ctx, d);
        if (p_bg > 0.0 && uniform(rng) < p_bg) ev.cause = ClickCause::Background;
      }
    }

    double next_hazard = hazard * decay;
    if (ev.cause != ClickCause::None) {
      ev.click = true;
      s.dead_until = pulse.slot + params.deadtime_gates;
      next_hazard += params.afterpulse_prob;
    }
    s.afterpulse_hazard = std::min(1.0, next_hazard);
  }

  // Light landing after the gate avalanches without registering. Outside the gate the
  // avalanche charge, and so the trap filling, grows with the number of absorbed photons.
  if (pulse.after_gate_photons > 0 && params.afterpulse_prob > 0.0 && !melted) {
    const std::uint32_t first = binomial(pulse.after_gate_photons, 0.5, rng);
    const std::array<std::uint32_t, 2> split{first, pulse.after_gate_photons - first};
    for (int d = 0; d < 2; ++d) {
      if (split[d] == 0 || state[d].blinded) continue;
      const std::uint32_t absorbed = binomial(split[d], params.efficiency_of(d, TimeShift::None), rng);
      if (absorbed > 0)
        state[d].afterpulse_hazard =
            std::min(1.0, state[d].afterpulse_hazard + params.afterpulse_prob * static_cast<double>(absorbed));
    }
  }
  return out;
}

void apply_window_damage(ReceiverState& state, double window_power, const DetectorParams& params) {
  DamageState level = DamageState::Intact;
  if (window_power >= params.melt_power) {
    level = DamageState::Melted;
  } else if (window_power >= params.thermal_damage_power) {
    level = DamageState::ThermallyBlinded;
  }
  for (auto& s : state) {
    if (static_cast<int>(level) > static_cast<int>(s.damage)) s.damage = level;
  }
}

void reset_blinding(ReceiverState& state) noexcept {
  for (auto& s : state) s.blinded = false;
}

double compute_received_power(std::span<const Pulse> pulses, SlotRange window) {
  if (window.empty()) throw InsufficientData("received power needs a non-empty slot window");
  double sum = 0.0;
  for (const Pulse& p : pulses) {
    if (p.slot >= window.begin && p.slot < window.end) sum += p.power;
  }
  return sum / static_cast<double>(window.size());
}

}  // namespace qkdioc::optics
