#include "qkdioc/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "qkdioc/errors.hpp"

namespace qkdioc::taxonomy {

using nlohmann::json;

std::string_view objective_token(AttackObjective o) noexcept {
  switch (o) {
    case AttackObjective::Environment: return "environment";
    case AttackObjective::SourceOfPhotons: return "source_of_photons";
    case AttackObjective::DetectorsOfPhotons: return "detectors_of_photons";
  }
  return "environment";
}

std::optional<AttackObjective> objective_from_token(std::string_view token) noexcept {
  for (auto o : {AttackObjective::Environment, AttackObjective::SourceOfPhotons, AttackObjective::DetectorsOfPhotons})
    if (objective_token(o) == token) return o;
  return std::nullopt;
}

KnowledgeBase::KnowledgeBase(std::string version, std::vector<TechniqueRecord> techniques)
    : version_(std::move(version)), techniques_(std::move(techniques)) {
  for (std::size_t i = 0; i < techniques_.size(); ++i) {
    objective_index_[techniques_[i].objective].push_back(i);
    for (const auto& c : techniques_[i].ioc_classes) ioc_index_[c].push_back(i);
  }
}

const TechniqueRecord* KnowledgeBase::find(std::string_view id) const {
  for (const auto& t : techniques_)
    if (t.id == id) return &t;
  return nullptr;
}

const std::vector<std::size_t>& KnowledgeBase::by_objective(AttackObjective o) const {
  static const std::vector<std::size_t> kEmpty;
  auto it = objective_index_.find(o);
  return it == objective_index_.end() ? kEmpty : it->second;
}

const std::vector<std::size_t>& KnowledgeBase::by_ioc_class(const IoCClass& c) const {
  static const std::vector<std::size_t> kEmpty;
  auto it = ioc_index_.find(c);
  return it == ioc_index_.end() ? kEmpty : it->second;
}

namespace {

void check_sub_techniques(const std::string& record, const std::vector<std::string>& ids,
                          const std::vector<std::string>& names, std::vector<Violation>& out) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (ids[i] != ids[j]) continue;
      out.push_back({record, "unique_sub_technique_id",
                     "sub-techniques #" + std::to_string(j) + " '" + names[j] + "' and #" + std::to_string(i) +
                         " '" + names[i] + "' share id '" + ids[i] + "'"});
      break;
    }
  }
}

}  // namespace

std::vector<Violation> validate_kb(const KnowledgeBase& kb) {
  std::vector<Violation> out;
  std::map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < kb.techniques().size(); ++i) {
    const auto& t = kb.techniques()[i];
    if (t.id.empty()) out.push_back({"#" + std::to_string(i), "non_empty_id", "technique id is empty"});
    auto [it, inserted] = seen.emplace(t.id, i);
    if (!inserted)
      out.push_back({t.id, "unique_technique_id",
                     "techniques #" + std::to_string(it->second) + " and #" + std::to_string(i) + " share id '" +
                         t.id + "'"});
    std::vector<std::string> ids;
    std::vector<std::string> names;
    for (const auto& s : t.sub_techniques) {
      ids.push_back(s.id);
      names.push_back(s.name);
      if (s.id.empty()) out.push_back({t.id, "non_empty_id", "sub-technique '" + s.name + "' has an empty id"});
    }
    check_sub_techniques(t.id, ids, names, out);
  }
  return out;
}

namespace {

bool is_string_array(const json& v) {
  return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); });
}

void check_keys(const json& obj, std::initializer_list<std::string_view> required,
                std::initializer_list<std::string_view> optional, const std::string& record,
                std::vector<Violation>& out) {
  for (auto key : required)
    if (!obj.contains(std::string(key)))
      out.push_back({record, "required_field", "missing field '" + std::string(key) + "'"});
  for (const auto& [key, _] : obj.items()) {
    const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                       std::find(optional.begin(), optional.end(), key) != optional.end();
    if (!known) out.push_back({record, "known_field", "unknown field '" + key + "'"});
  }
}

}  // namespace

std::vector<Violation> validate_kb_document(const json& doc) {
  std::vector<Violation> out;
  if (!doc.is_object()) {
    out.push_back({"<document>", "structure", "top level must be an object"});
    return out;
  }
  check_keys(doc, {"version", "techniques"}, {}, "<document>", out);
  if (doc.contains("version") && !doc["version"].is_string())
    out.push_back({"<document>", "type", "'version' must be a string"});
  if (!doc.contains("techniques")) return out;
  if (!doc["techniques"].is_array()) {
    out.push_back({"<document>", "type", "'techniques' must be an array"});
    return out;
  }

  std::map<std::string, std::size_t> seen;
  const auto& list = doc["techniques"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& t = list[i];
    std::string record = "#" + std::to_string(i);
    if (!t.is_object()) {
      out.push_back({record, "structure", "technique must be an object"});
      continue;
    }
    if (t.contains("id") && t["id"].is_string() && !t["id"].get<std::string>().empty())
      record = t["id"].get<std::string>();
    check_keys(t, {"id", "name", "objective"},
               {"sub_techniques", "tools", "mitigations", "ioc_classes", "references"}, record, out);

    if (t.contains("id")) {
      if (!t["id"].is_string() || t["id"].get<std::string>().empty()) {
        out.push_back({record, "type", "'id' must be a non-empty string"});
      } else {
        auto [it, inserted] = seen.emplace(record, i);
        if (!inserted)
          out.push_back({record, "unique_technique_id",
                         "techniques #" + std::to_string(it->second) + " and #" + std::to_string(i) +
                             " share id '" + record + "'"});
      }
    }
    if (t.contains("name") && !t["name"].is_string()) out.push_back({record, "type", "'name' must be a string"});
    if (t.contains("objective")) {
      if (!t["objective"].is_string() || !objective_from_token(t["objective"].get<std::string>()))
        out.push_back({record, "objective_enum", "unknown objective " + t["objective"].dump()});
    }
    for (const char* key : {"tools", "mitigations", "references"})
      if (t.contains(key) && !is_string_array(t[key]))
        out.push_back({record, "type", "'" + std::string(key) + "' must be an array of strings"});
    if (t.contains("ioc_classes")) {
      if (!is_string_array(t["ioc_classes"])) {
        out.push_back({record, "type", "'ioc_classes' must be an array of strings"});
      } else {
        std::set<std::string> tokens;
        for (const auto& c : t["ioc_classes"]) {
          const auto token = c.get<std::string>();
          if (!IoCClass::from_token(token))
            out.push_back({record, "ioc_class_enum", "unknown IoC class '" + token + "'"});
          else if (!tokens.insert(token).second)
            out.push_back({record, "ioc_class_set", "IoC class '" + token + "' listed twice"});
        }
      }
    }
    if (t.contains("sub_techniques")) {
      if (!t["sub_techniques"].is_array()) {
        out.push_back({record, "type", "'sub_techniques' must be an array"});
      } else {
        std::vector<std::string> ids;
        std::vector<std::string> names;
        for (std::size_t k = 0; k < t["sub_techniques"].size(); ++k) {
          const json& s = t["sub_techniques"][k];
          const std::string sub_record = record + "/sub#" + std::to_string(k);
          if (!s.is_object()) {
            out.push_back({sub_record, "structure", "sub-technique must be an object"});
            continue;
          }
          check_keys(s, {"id", "name"}, {"description"}, sub_record, out);
          const bool ok = s.contains("id") && s["id"].is_string() && !s["id"].get<std::string>().empty() &&
                          s.contains("name") && s["name"].is_string() &&
                          (!s.contains("description") || s["description"].is_string());
          if (!ok) {
            out.push_back({sub_record, "type", "sub-technique needs string 'id' (non-empty), 'name', 'description'"});
            continue;
          }
          ids.push_back(s["id"].get<std::string>());
          names.push_back(s["name"].get<std::string>());
        }
        check_sub_techniques(record, ids, names, out);
      }
    }
  }
  return out;
}

namespace {

std::string join_violations(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << v.size() << " knowledge-base violation(s):";
  for (const auto& x : v) os << "\n  [" << x.record << "] " << x.rule << ": " << x.message;
  return os.str();
}

std::vector<std::string> strings_or_empty(const json& t, const char* key) {
  if (!t.contains(key)) return {};
  return t[key].get<std::vector<std::string>>();
}

}  // namespace

KnowledgeBase parse_kb(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("knowledge base: ") + e.what());
  }
  const auto violations = validate_kb_document(doc);
  if (!violations.empty()) throw ValidationError(join_violations(violations));

  std::vector<TechniqueRecord> techniques;
  for (const auto& t : doc["techniques"]) {
    TechniqueRecord r;
    r.id = t["id"].get<std::string>();
    r.name = t["name"].get<std::string>();
    r.objective = *objective_from_token(t["objective"].get<std::string>());
    if (t.contains("sub_techniques"))
      for (const auto& s : t["sub_techniques"])
        r.sub_techniques.push_back({s["id"].get<std::string>(), s["name"].get<std::string>(),
                                    s.value("description", std::string())});
    r.tools = strings_or_empty(t, "tools");
    r.mitigations = strings_or_empty(t, "mitigations");
    r.references = strings_or_empty(t, "references");
    for (const auto& c : strings_or_empty(t, "ioc_classes")) r.ioc_classes.insert(*IoCClass::from_token(c));
    techniques.push_back(std::move(r));
  }
  return KnowledgeBase(doc.value("version", std::string()), std::move(techniques));
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read knowledge base '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kb(buf.str());
}

std::string serialize_kb(const KnowledgeBase& kb) {
  json techniques = json::array();
  for (const auto& t : kb.techniques()) {
    json subs = json::array();
    for (const auto& s : t.sub_techniques) subs.push_back({{"id", s.id}, {"name", s.name}, {"description", s.description}});
    json classes = json::array();
    for (const auto& c : t.ioc_classes) classes.push_back(std::string(c.token()));
    techniques.push_back({{"id", t.id},
                          {"name", t.name},
                          {"objective", std::string(objective_token(t.objective))},
                          {"sub_techniques", subs},
                          {"tools", t.tools},
                          {"mitigations", t.mitigations},
                          {"ioc_classes", classes},
                          {"references", t.references}});
  }
  json doc{{"version", kb.version()}, {"techniques", techniques}};
  return doc.dump(2) + "\n";
}

std::filesystem::path canonical_kb_path() { return std::filesystem::path(QKDIOC_DATA_DIR) / "kb" / "canonical.json"; }

std::vector<TechniqueRecord> query_techniques(const KnowledgeBase& kb, const TechniqueFilter& filter) {
  std::vector<TechniqueRecord> out;
  for (const auto& t : kb.techniques()) {
    if (filter.objective && t.objective != *filter.objective) continue;
    if (filter.ioc_class && !t.ioc_classes.contains(*filter.ioc_class)) continue;
    out.push_back(t);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<Candidate> rank_candidates(const KnowledgeBase& kb, std::span<const IoCFinding> findings) {
  std::set<IoCClass> observed;
  for (const auto& f : findings) observed.insert(f.ioc_class);
  std::vector<Candidate> out;
  for (const auto& t : kb.techniques()) {
    Candidate c;
    for (const auto& cls : observed)
      if (t.ioc_classes.contains(cls)) c.matched.push_back(cls);
    if (c.matched.empty()) continue;
    c.score = static_cast<int>(c.matched.size());
    c.technique = t;
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.technique.id < b.technique.id;
  });
  return out;
}

}  // namespace qkdioc::taxonomy
