#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qkdioc/attacks.hpp"
#include "qkdioc/ioc_types.hpp"
#include "qkdioc/optics.hpp"
#include "qkdioc/rng.hpp"

namespace qkdioc::protocol {

struct Bb84Config {
  std::uint64_t num_pulses = 100000;
  double basis_bias = 0.5;  // probability of Rectilinear, for Alice and Bob
  double qber_sample_fraction = 1.0;
  std::uint64_t qber_window_bits = 1000;
  std::uint64_t monitor_window_slots = 10000;

  void validate() const;
};

/// Per-slot preparation (Alice) or measurement-basis (Bob) choices.
struct BasisRecord {
  std::vector<std::uint8_t> bits;
  std::vector<optics::Basis> bases;

  std::size_t size() const noexcept { return bases.size(); }
};

struct SiftedKey {
  std::vector<std::uint64_t> indices;
  std::vector<std::uint8_t> alice_bits;
  std::vector<std::uint8_t> bob_bits;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
};

struct SiftResult {
  SiftedKey key;
  std::uint64_t double_click_count = 0;
};

/// Keeps slots where bases match and exactly one detector clicked. `clicks` holds
/// only clicking events, sorted by slot. Throws ValidationError when the two
/// records cover different slot ranges.
SiftResult sift(const BasisRecord& alice, const BasisRecord& bob,
                std::span<const optics::DetectionEvent> clicks);

struct QberWindow {
  std::uint64_t window_id = 0;
  SlotRange slot_range;
  std::uint64_t error_bits = 0;
  std::uint64_t total_bits = 0;
  double qber = 0.0;
};

struct QberEstimate {
  std::vector<QberWindow> windows;
  std::vector<std::uint64_t> disclosed_positions;  // positions into the sifted key, ascending
  SiftedKey remaining_key;                          // sifted key minus disclosed bits

  std::uint64_t error_bits() const noexcept;
  std::uint64_t total_bits() const noexcept;
  double pooled_qber() const noexcept;
};

/// Discloses a seeded uniform sample of the sifted key and computes windowed QBER.
/// A trailing window shorter than window_size/2 is merged into its predecessor.
/// Throws InsufficientData on an empty key, ValidationError on bad parameters.
QberEstimate estimate_qber(const SiftedKey& key, double sample_fraction, std::uint64_t window_size,
                           Engine& rng);

/// Per-window received-power accounting.
struct PowerWindow {
  SlotRange window;
  double total_power = 0.0;      // W, everything incident on the receiver
  double classical_power = 0.0;  // W, attacker or stray classical light only
  optics::DamageState damage_after = optics::DamageState::Intact;
};

struct SessionRecord {
  std::uint64_t num_slots = 0;
  BasisRecord alice;
  BasisRecord bob;
  std::vector<std::uint32_t> source_tap;  // emitted photon numbers, pre-channel
  SiftedKey sifted_key;
  std::uint64_t double_click_count = 0;
  QberEstimate qber;
  std::vector<optics::DetectionEvent> detection_events;  // clicks only, slot-ordered
  std::vector<std::uint32_t> photocurrent_samples;       // one per slot
  std::vector<PowerWindow> power_by_window;
  attacks::EveLog eve_log;
  std::array<std::uint64_t, 2> clicks_per_detector{0, 0};
  optics::DamageState final_damage = optics::DamageState::Intact;
  double pulse_rate = 1.0;
};

/// Runs num_pulses slots: Alice prepares, the source emits, the attack (if any)
/// transforms, the channel attenuates, Bob measures. Deterministic in `seed`.
SessionRecord run_session(const Bb84Config& cfg, const optics::SourceParams& source,
                          const optics::ChannelParams& channel, const optics::DetectorParams& detector,
                          const std::optional<attacks::AttackConfig>& attack, std::uint64_t seed);

}  // namespace qkdioc::protocol
