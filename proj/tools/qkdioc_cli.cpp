// qkdioc: run attack scenarios, calibrate baselines, query the technique knowledge base.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qkdioc/errors.hpp"
#include "qkdioc/harness.hpp"
#include "qkdioc/serialization.hpp"
#include "qkdioc/taxonomy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qkdioc;

namespace {

enum Exit : int { kOk = 0, kUsage = 2, kIo = 3, kInvalid = 4, kRuntime = 5 };

fs::path default_out_dir() {
  if (const char* env = std::getenv("QKD_IOC_OUT_DIR"); env && *env) return env;
  return "qkdioc-out";
}

void write_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

int classify(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e)) return kIo;
  if (dynamic_cast<const ValidationError*>(&e)) return kInvalid;
  return kRuntime;
}

struct RunArgs {
  std::string scenario;
  std::string out_dir;
  std::string format = "text";
  std::string baselines;
  std::string batch;
  std::string kb;
  bool session_log = false;
  bool quiet = false;
};

int run_one(const fs::path& scenario_path, const RunArgs& a, std::ostream& out) {
  const harness::Scenario s = harness::load_scenario(scenario_path);
  const fs::path out_dir = a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir);
  harness::RunOptions opts;
  opts.baseline_dir = a.baselines.empty() ? out_dir / "baselines" : fs::path(a.baselines);
  if (!a.kb.empty()) opts.kb_path = a.kb;
  const harness::RunResult result = harness::run_scenario(s, opts);
  const json report = harness::report_to_json(result.report);
  const std::string structured = report.dump(2) + "\n";
  const std::string text = harness::render_text(report);
  write_file(out_dir / (s.name + ".report.json"), structured);
  write_file(out_dir / (s.name + ".report.txt"), text);
  if (a.session_log) write_file(out_dir / (s.name + ".session.json"), serial::session_to_json(result.record).dump() + "\n");
  if (!a.quiet) out << (a.format == "struct" ? structured : text);
  return kOk;
}

int cmd_run(const RunArgs& a) {
  if (a.batch.empty()) {
    if (a.scenario.empty()) {
      std::cerr << "run: a scenario file or --batch DIR is required\n";
      return kUsage;
    }
    return run_one(a.scenario, a, std::cout);
  }
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(a.batch, ec))
    if (entry.is_regular_file() && entry.path().extension() == ".scn") files.push_back(entry.path());
  if (ec) throw IoError("cannot list '" + a.batch + "': " + ec.message());
  std::sort(files.begin(), files.end());
  int worst = kOk;
  RunArgs quiet = a;
  quiet.quiet = true;
  for (const auto& f : files) {
    try {
      run_one(f, quiet, std::cout);
      std::cout << "ok    " << f.filename().string() << "\n";
    } catch (const Error& e) {
      std::cerr << "error " << f.filename().string() << ": " << e.what() << "\n";
      worst = std::max(worst, classify(e));
    }
  }
  return worst;
}

int cmd_calibrate(const std::string& scenario, const std::string& out_dir, const std::string& baselines) {
  const harness::Scenario s = harness::load_scenario(scenario);
  const fs::path dir = !baselines.empty() ? fs::path(baselines)
                                          : (out_dir.empty() ? default_out_dir() : fs::path(out_dir)) / "baselines";
  const ioc::Baseline b = harness::calibrate(s);
  const fs::path path = harness::baseline_path(dir, b.link_hash);
  harness::save_baseline(b, path);
  std::cout << path.string() << "\n";
  return kOk;
}

int cmd_kb_validate(const std::string& file) {
  const json doc = serial::read_document(file, "knowledge base");
  const auto violations = taxonomy::validate_kb_document(doc);
  if (violations.empty()) {
    const auto kb = taxonomy::parse_kb(doc.dump());
    std::cout << file << ": valid, " << kb.techniques().size() << " techniques (version " << kb.version() << ")\n";
    return kOk;
  }
  for (const auto& v : violations) std::cout << "[" << v.record << "] " << v.rule << ": " << v.message << "\n";
  std::cerr << file << ": " << violations.size() << " violation(s)\n";
  return kInvalid;
}

int cmd_kb_query(const std::string& objective, const std::string& ioc_class, const std::string& kb_file,
                 const std::string& format) {
  taxonomy::TechniqueFilter filter;
  if (!objective.empty()) {
    filter.objective = taxonomy::objective_from_token(objective);
    if (!filter.objective) throw ValidationError("unknown objective '" + objective + "'");
  }
  if (!ioc_class.empty()) {
    filter.ioc_class = IoCClass::from_token(ioc_class);
    if (!filter.ioc_class) throw ValidationError("unknown IoC class '" + ioc_class + "'");
  }
  const auto kb = taxonomy::load_kb(kb_file.empty() ? taxonomy::canonical_kb_path() : fs::path(kb_file));
  const auto hits = taxonomy::query_techniques(kb, filter);
  if (format == "struct") {
    const json doc = json::parse(taxonomy::serialize_kb(taxonomy::KnowledgeBase(kb.version(), hits)));
    std::cout << doc["techniques"].dump(2) << "\n";
    return kOk;
  }
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : ", ") + e;
    return s.empty() ? std::string("-") : s;
  };
  for (const auto& t : hits) {
    std::vector<std::string> classes;
    for (const auto& c : t.ioc_classes) classes.emplace_back(c.token());
    std::cout << t.id << "  [" << taxonomy::objective_token(t.objective) << "]  " << t.name << "\n"
              << "    tools: " << join(t.tools) << "\n"
              << "    mitigations: " << join(t.mitigations) << "\n"
              << "    ioc classes: " << join(classes) << "\n";
  }
  return kOk;
}

int cmd_explain(const std::string& report_file, const std::string& kb_file) {
  const json report = serial::read_document(report_file, "report");
  const auto kb = taxonomy::load_kb(kb_file.empty() ? taxonomy::canonical_kb_path() : fs::path(kb_file));
  std::cout << harness::explain_report(report, kb);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QKD link simulator with physics-based attacks and an indicator-of-compromise engine"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a scenario and write its forensic report");
  run->add_option("scenario", run_args.scenario, "Scenario file (.scn)");
  run->add_option("--out", run_args.out_dir, "Output directory (default $QKD_IOC_OUT_DIR or ./qkdioc-out)");
  run->add_option("--format", run_args.format, "What to print on stdout")->check(CLI::IsMember({"struct", "text"}));
  run->add_option("--baselines", run_args.baselines, "Baseline directory (default OUT/baselines)");
  run->add_option("--batch", run_args.batch, "Run every .scn file in a directory");
  run->add_option("--kb", run_args.kb, "Knowledge-base file (default: bundled canonical)");
  run->add_flag("--session-log", run_args.session_log, "Also write the full session log");

  std::string cal_scenario, cal_out, cal_baselines;
  auto* cal = app.add_subcommand("calibrate", "Run the attack-free twin of a scenario and store its baseline");
  cal->add_option("scenario", cal_scenario, "Scenario file (.scn)")->required();
  cal->add_option("--out", cal_out, "Output directory (baselines go to OUT/baselines)");
  cal->add_option("--baselines", cal_baselines, "Baseline directory");

  auto* kb = app.add_subcommand("kb", "Knowledge-base tools");
  kb->require_subcommand(1);
  std::string kb_file;
  auto* kb_validate = kb->add_subcommand("validate", "Check a knowledge-base file");
  kb_validate->add_option("file", kb_file, "Knowledge-base file")->required();
  std::string q_objective, q_class, q_kb, q_format = "text";
  auto* kb_query = kb->add_subcommand("query", "List techniques matching every filter");
  kb_query->add_option("--objective", q_objective, "environment | source_of_photons | detectors_of_photons");
  kb_query->add_option("--ioc-class", q_class, "IoC class token, e.g. qber or real_time.photocurrent");
  kb_query->add_option("--kb", q_kb, "Knowledge-base file (default: bundled canonical)");
  kb_query->add_option("--format", q_format, "Output format")->check(CLI::IsMember({"struct", "text"}));

  auto* report = app.add_subcommand("report", "Report tools");
  report->require_subcommand(1);
  std::string r_file, r_kb;
  auto* explain = report->add_subcommand("explain", "Print finding -> technique reasoning chains");
  explain->add_option("report", r_file, "Structured report (.report.json)")->required();
  explain->add_option("--kb", r_kb, "Knowledge-base file (default: bundled canonical)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*cal) return cmd_calibrate(cal_scenario, cal_out, cal_baselines);
    if (*kb_validate) return cmd_kb_validate(kb_file);
    if (*kb_query) return cmd_kb_query(q_objective, q_class, q_kb, q_format);
    if (*explain) return cmd_explain(r_file, r_kb);
  } catch (const Error& e) {
    std::cerr << "qkdioc: " << e.what() << "\n";
    return classify(e);
  } catch (const std::exception& e) {
    std::cerr << "qkdioc: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
