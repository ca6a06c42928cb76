#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

#include "qkdioc/attacks.hpp"
#include "qkdioc/ioc.hpp"
#include "qkdioc/optics.hpp"
#include "qkdioc/protocol.hpp"

namespace qkdioc::serial {

using nlohmann::json;

json to_json(const optics::SourceParams& p);
json to_json(const optics::ChannelParams& p);
json to_json(const optics::DetectorParams& p);
json to_json(const protocol::Bb84Config& p);
json to_json(const attacks::AttackConfig& a);
json to_json(const ioc::MonitorConfig& m);
json to_json(const IoCFinding& f);
json to_json(const ioc::AfterpulseEstimate& e);
json to_json(const ioc::Baseline& b);
json to_json(const attacks::EveLogEntry& e);

/// Readers are strict: unknown keys and wrong types raise ValidationError naming
/// `where` and the offending key. Absent keys keep their defaults.
optics::SourceParams source_from_json(const json& j, std::string_view where = "source");
optics::ChannelParams channel_from_json(const json& j, std::string_view where = "channel");
optics::DetectorParams detector_from_json(const json& j, std::string_view where = "detector");
protocol::Bb84Config protocol_from_json(const json& j, std::string_view where = "protocol");
attacks::AttackConfig attack_from_json(const json& j, std::string_view where = "attack");
ioc::MonitorConfig monitors_from_json(const json& j, std::string_view where = "monitors");
IoCFinding finding_from_json(const json& j, std::string_view where = "finding");
ioc::AfterpulseEstimate afterpulse_from_json(const json& j, std::string_view where = "afterpulse");
ioc::Baseline baseline_from_json(const json& j, std::string_view where = "baseline");

/// Full session log: keys, disclosed sample, QBER windows, clicks, power, Eve's log.
json session_to_json(const protocol::SessionRecord& rec);

std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(std::string_view s);

/// Parses JSON text, mapping syntax errors to ParseError.
json parse_document(std::string_view text, std::string_view what);
json read_document(const std::string& path, std::string_view what);

}  // namespace qkdioc::serial
