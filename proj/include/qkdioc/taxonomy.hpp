#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "qkdioc/ioc_types.hpp"

namespace qkdioc::taxonomy {

/// Tactic-level entry point of a physics-based attack.
enum class AttackObjective { Environment, SourceOfPhotons, DetectorsOfPhotons };

std::string_view objective_token(AttackObjective o) noexcept;
std::optional<AttackObjective> objective_from_token(std::string_view token) noexcept;

struct SubTechnique {
  std::string id;
  std::string name;
  std::string description;

  bool operator==(const SubTechnique&) const = default;
};

struct TechniqueRecord {
  std::string id;
  std::string name;
  AttackObjective objective = AttackObjective::Environment;
  std::vector<SubTechnique> sub_techniques;
  std::vector<std::string> tools;
  std::vector<std::string> mitigations;
  std::set<IoCClass> ioc_classes;
  std::vector<std::string> references;

  bool operator==(const TechniqueRecord&) const = default;
};

/// Immutable after construction; indices are rebuilt from the technique list.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  KnowledgeBase(std::string version, std::vector<TechniqueRecord> techniques);

  const std::string& version() const noexcept { return version_; }
  const std::vector<TechniqueRecord>& techniques() const noexcept { return techniques_; }
  const TechniqueRecord* find(std::string_view id) const;

  /// Positions into techniques(), ascending.
  const std::vector<std::size_t>& by_objective(AttackObjective o) const;
  const std::vector<std::size_t>& by_ioc_class(const IoCClass& c) const;

  bool operator==(const KnowledgeBase& other) const {
    return version_ == other.version_ && techniques_ == other.techniques_;
  }

 private:
  std::string version_;
  std::vector<TechniqueRecord> techniques_;
  std::map<AttackObjective, std::vector<std::size_t>> objective_index_;
  std::map<IoCClass, std::vector<std::size_t>> ioc_index_;
};

struct Violation {
  std::string record;  // offending technique id (or document path)
  std::string rule;
  std::string message;
};

/// Invariant check over a typed knowledge base (uniqueness rules).
std::vector<Violation> validate_kb(const KnowledgeBase& kb);

/// Structural, enum-token and uniqueness check over a raw document.
std::vector<Violation> validate_kb_document(const nlohmann::json& doc);

/// Throws IoError, ParseError or ValidationError.
KnowledgeBase load_kb(const std::filesystem::path& path);
KnowledgeBase parse_kb(std::string_view text);
std::string serialize_kb(const KnowledgeBase& kb);

std::filesystem::path canonical_kb_path();

struct TechniqueFilter {
  std::optional<AttackObjective> objective;
  std::optional<IoCClass> ioc_class;
};

std::vector<TechniqueRecord> query_techniques(const KnowledgeBase& kb, const TechniqueFilter& filter);

struct Candidate {
  TechniqueRecord technique;
  int score = 0;
  std::vector<IoCClass> matched;
};

/// Score = number of distinct finding classes present in a technique's ioc_classes.
/// Zero scores are dropped; order is descending score, then ascending id.
std::vector<Candidate> rank_candidates(const KnowledgeBase& kb, std::span<const IoCFinding> findings);

}  // namespace qkdioc::taxonomy
