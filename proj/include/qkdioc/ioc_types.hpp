#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace qkdioc {

/// Half-open range of gate slots [begin, end).
struct SlotRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  std::uint64_t size() const noexcept { return end > begin ? end - begin : 0; }
  bool empty() const noexcept { return end <= begin; }
  auto operator<=>(const SlotRange&) const = default;
};

enum class RealTimeKind { Afterpulse, Deadtime, Photocurrent, PhotonStatistics };

/// The three indicator classes; RealTime carries one of four sub-kinds.
class IoCClass {
 public:
  enum class Kind { Qber, RealTime, ReceivedPower };

  static IoCClass qber() noexcept { return IoCClass(Kind::Qber, std::nullopt); }
  static IoCClass real_time(RealTimeKind sub) noexcept { return IoCClass(Kind::RealTime, sub); }
  static IoCClass received_power() noexcept { return IoCClass(Kind::ReceivedPower, std::nullopt); }

  Kind kind() const noexcept { return kind_; }
  std::optional<RealTimeKind> sub() const noexcept { return sub_; }

  /// Canonical ordering index, 0..5 (Qber, the four real-time kinds, ReceivedPower).
  int ordinal() const noexcept;

  std::string_view token() const noexcept;
  static std::optional<IoCClass> from_token(std::string_view token) noexcept;

  friend bool operator==(const IoCClass& a, const IoCClass& b) noexcept {
    return a.ordinal() == b.ordinal();
  }
  friend std::strong_ordering operator<=>(const IoCClass& a, const IoCClass& b) noexcept {
    return a.ordinal() <=> b.ordinal();
  }

  static constexpr int kCount = 6;
  static IoCClass from_ordinal(int ordinal);

 private:
  IoCClass(Kind kind, std::optional<RealTimeKind> sub) noexcept : kind_(kind), sub_(sub) {}

  Kind kind_;
  std::optional<RealTimeKind> sub_;
};

enum class Severity { Advisory, Alarm, Damage };

std::string_view severity_token(Severity s) noexcept;
std::optional<Severity> severity_from_token(std::string_view token) noexcept;

/// How `measured` is compared against `threshold` (and `reference`, when used).
enum class Comparison {
  Greater,             // measured > threshold
  AtLeast,             // measured >= threshold
  Less,                // measured < threshold
  ExcessOver,          // measured - reference > threshold
  AbsDeviationGreater  // |measured - reference| > threshold
};

std::string_view comparison_token(Comparison c) noexcept;
std::optional<Comparison> comparison_from_token(std::string_view token) noexcept;

/// One detection-engine verdict. Self-verifying: `holds()` re-applies the
/// emitting rule to the stored numbers.
struct IoCFinding {
  IoCClass ioc_class = IoCClass::qber();
  Severity severity = Severity::Advisory;
  SlotRange window;
  double measured = 0.0;
  std::string unit;
  double threshold = 0.0;
  double reference = 0.0;
  Comparison comparison = Comparison::Greater;
  std::string detail;

  bool holds() const noexcept;
};

}  // namespace qkdioc
