// SPDX-License-Identifier: Apache-2.0
// rastro: command-line front end for a project trail.
//
// Exit codes: 0 success, 1 user or validation error, 2 I/O or corruption.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "rastro/rastro.hpp"

namespace {

using namespace rastro;

struct Globals {
  std::string dir;
};

TrailStore open_store(const Globals& g) {
  std::optional<fs::path> explicit_dir;
  if (!g.dir.empty()) explicit_dir = fs::path(g.dir);
  return TrailStore::open(resolve_project_dir(explicit_dir));
}

Timestamp parse_when(const std::string& text) {
  if (auto t = parse_timestamp(text)) return *t;
  if (auto d = parse_date(text)) return Timestamp(std::chrono::sys_seconds{*d});
  throw InvalidArgument("expected an ISO-8601 timestamp or date: '" + text + "'");
}

std::pair<std::string, std::string> split_assignment(const std::string& text, std::string_view flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InvalidArgument(fmt::format("{} expects name=value, got '{}'", flag, text));
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

/// `true`/`false` become booleans, integers become int, other numbers real,
/// anything else text. A `name:type=value` key forces the type.
std::pair<std::string, HyperValue> parse_param(const std::string& text) {
  auto [name, value] = split_assignment(text, "--param");
  std::string forced;
  if (const auto colon = name.rfind(':'); colon != std::string::npos) {
    forced = name.substr(colon + 1);
    name.resize(colon);
  }
  auto as_int = [&]() -> std::optional<std::int64_t> {
    std::int64_t v = 0;
    const auto* end = value.data() + value.size();
    const auto [p, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || p != end) return std::nullopt;
    return v;
  };
  auto fail = [&] { throw InvalidArgument(fmt::format("--param {}: '{}' is not a valid {}", name, value, forced)); };
  if (forced == "text") return {name, value};
  if (forced == "int") {
    const auto v = as_int();
    if (!v) fail();
    return {name, *v};
  }
  if (forced == "real") {
    const auto v = detail::parse_number(value);
    if (!v) fail();
    return {name, *v};
  }
  if (forced == "bool") {
    if (value != "true" && value != "false") fail();
    return {name, value == "true"};
  }
  if (!forced.empty()) throw InvalidArgument("unknown parameter type '" + forced + "'");
  if (value == "true" || value == "false") return {name, value == "true"};
  if (const auto v = as_int()) return {name, *v};
  if (const auto v = detail::parse_number(value)) return {name, *v};
  return {name, value};
}

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InvalidArgument(origin + ": " + e.what());
  }
}

Json candidate_json(const LessonCandidate& c) {
  Json j;
  j["kind"] = std::string(to_string(c.kind));
  j["description"] = c.description;
  j["evidence"] = c.evidence;
  j["confidence"] = c.confidence;
  j["subjects"] = c.subjects;
  j["figures"] = c.figures;
  return j;
}

Json summary_json(const SummaryStats& s) {
  Json j;
  j["n"] = s.n;
  j["mean"] = s.mean;
  j["std"] = s.sample_std;
  j["min"] = s.min;
  j["q1"] = s.q1;
  j["median"] = s.median;
  j["q3"] = s.q3;
  j["max"] = s.max;
  return j;
}

template <typename Record>
void print_records(const std::vector<Record>& records, bool json) {
  if (json) {
    Json arr = Json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    std::cout << arr.dump(2, ' ', false, Json::error_handler_t::replace) << '\n';
    return;
  }
  for (const auto& r : records) std::cout << summary_line(r) << '\n';
}

// ---------------------------------------------------------------------------

void cmd_init(const Globals& g, const std::string& name) {
  fs::path root = g.dir.empty() ? fs::path() : fs::path(g.dir);
  if (root.empty()) {
    const char* env = std::getenv("RASTRO_DIR");
    root = env != nullptr && *env != '\0' ? fs::path(env) : fs::current_path();
  }
  const auto store = TrailStore::open_or_init(root, name);
  std::cout << "initialized trail '" << store.meta().name << "' at " << store.root().string() << '\n';
}

struct ActionArgs {
  std::string message;
  std::string task;
  std::string resources;
  std::string status = "defined";
  std::string at;
  bool strict = false;
};

int cmd_action_add(const Globals& g, const ActionArgs& args) {
  auto store = open_store(g);
  ActionDefinition a;
  a.description = args.message;
  if (!args.task.empty()) a.task = canonical_task(args.task, store.taxonomy());
  if (!args.resources.empty()) a.resources = args.resources;
  const auto status = parse_action_status(args.status);
  if (!status) throw InvalidArgument("unknown action status '" + args.status + "'");
  a.status = *status;
  if (!args.at.empty()) a.registered_at = parse_when(args.at);
  if (auto report = validate_action(a); !report.empty()) throw ValidationError(std::move(report));

  const auto matches = redundancy_warning(store, a.description);
  for (const auto& m : matches) {
    fmt::print(stderr, "warning: similar to {} {} (jaccard {:.2f}): {}\n", to_string(m.kind), m.code, m.similarity,
               m.description);
  }
  if (args.strict && !matches.empty()) {
    fmt::print(stderr, "not registered: --strict and {} similar record(s) found\n", matches.size());
    return 1;
  }
  std::cout << store.append(std::move(a)) << '\n';
  return 0;
}

struct LessonArgs {
  std::string message;
  std::string task;
  std::string origin = "human";
  std::vector<std::int64_t> trainings;
  std::string at;
};

void cmd_lesson_add(const Globals& g, const LessonArgs& args) {
  auto store = open_store(g);
  Lesson l;
  l.description = args.message;
  if (!args.task.empty()) l.task = canonical_task(args.task, store.taxonomy());
  const auto origin = parse_lesson_origin(args.origin);
  if (!origin) throw InvalidArgument("unknown lesson origin '" + args.origin + "'");
  l.origin = *origin;
  l.related_training_codes = args.trainings;
  if (!args.at.empty()) l.registered_at = parse_when(args.at);
  std::cout << store.append(std::move(l)) << '\n';
}

/// Accepts one JSON object or JSON lines, in the trail's training format.
/// `schema_version` and `code` may be omitted; `registered_at` defaults to
/// the commit time.
void cmd_training_add(const Globals& g, const std::string& path) {
  auto store = open_store(g);
  const auto text = read_input(path);
  std::vector<Json> docs;
  const auto trimmed = text.find_first_not_of(" \t\r\n");
  if (trimmed == std::string::npos) throw InvalidArgument(path + ": no records");
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool jsonl = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(Json::parse(line));
    } catch (const Json::parse_error&) {
      jsonl = false;
      break;
    }
  }
  if (!jsonl) docs = {parse_json_text(text, path)};

  std::vector<TrainingRecord> records;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto& j = docs[i];
    if (!j.is_object()) throw InvalidArgument(fmt::format("{}: record {} is not an object", path, i + 1));
    const bool has_time = j.contains("registered_at");
    if (!j.contains("schema_version")) j["schema_version"] = kSchemaVersion;
    if (!j.contains("code")) j["code"] = 0;
    if (!has_time) j["registered_at"] = Timestamp().iso8601();
    try {
      auto r = training_from_json(j);
      if (!has_time) r.context.registered_at.reset();
      records.push_back(std::move(r));
    } catch (const DecodeError& e) {
      throw InvalidArgument(fmt::format("{}: record {}: {}", path, i + 1, e.what()));
    }
  }
  // Validate everything first so a bad file registers nothing.
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (auto report = validate_training(records[i]); !report.empty()) {
      throw InvalidArgument(fmt::format("{}: record {}: {}", path, i + 1, describe(report)));
    }
  }
  for (auto& r : records) std::cout << store.append(std::move(r)) << '\n';
}

struct RunArgs {
  std::vector<std::string> command;
  std::string spec_file;
  std::string algorithm;
  std::vector<std::string> params;
  std::vector<std::string> libraries;
  std::string hardware;
  std::optional<std::int64_t> seed;
  std::string dataset;
  std::string selection;
  std::vector<std::string> features;
  std::optional<std::int64_t> records;
  std::optional<std::int64_t> classes;
  std::vector<std::string> metric_names;
  std::optional<double> holdout;
  bool stratified = false;
  std::string cross_validation;
  bool quiet = false;
};

RunSpec build_run_spec(const RunArgs& args) {
  RunSpec spec;
  if (!args.spec_file.empty()) {
    auto j = parse_json_text(read_input(args.spec_file), args.spec_file);
    if (!j.is_object()) throw InvalidArgument(args.spec_file + ": expected an object");
    Json full;
    full["schema_version"] = kSchemaVersion;
    full["code"] = 0;
    full["registered_at"] = Timestamp().iso8601();
    full["context"] = Json{{"epochs", 0}, {"duration_seconds", 0.0}, {"status", "succeeded"}};
    full["configuration"] = j.value("configuration", Json{{"program_id", ""}, {"library_versions", Json::object()}});
    full["data_used"] = j.value("data_used", Json{{"dataset_description", ""}, {"feature_names", Json::array()}});
    full["training_params"] =
        j.value("training_params", Json{{"algorithm", ""}, {"hyperparameters", Json::object()}});
    full["test_params"] = j.value("test_params", Json{{"metric_names", Json::array()}});
    full["results"] = Json{{"metrics", Json::object()}};
    for (const auto& [k, _] : j.items()) {
      if (k != "configuration" && k != "data_used" && k != "training_params" && k != "test_params") {
        throw InvalidArgument(args.spec_file + ": unexpected key '" + k + "'");
      }
    }
    TrainingRecord r;
    try {
      r = training_from_json(full);
    } catch (const DecodeError& e) {
      throw InvalidArgument(args.spec_file + ": " + e.what());
    }
    spec = RunSpec{r.configuration, r.data_used, r.training_params, r.test_params};
  }
  if (!args.algorithm.empty()) spec.training_params.algorithm = args.algorithm;
  for (const auto& p : args.params) {
    auto [name, value] = parse_param(p);
    spec.training_params.hyperparameters[name] = value;
  }
  for (const auto& l : args.libraries) {
    auto [name, version] = split_assignment(l, "--library");
    spec.configuration.library_versions[name] = version;
  }
  if (!args.hardware.empty()) spec.configuration.hardware = args.hardware;
  if (args.seed) spec.configuration.random_seed = args.seed;
  if (!args.dataset.empty()) spec.data_used.dataset_description = args.dataset;
  if (!args.selection.empty()) spec.data_used.selection_criteria = args.selection;
  for (const auto& f : args.features) spec.data_used.feature_names.push_back(f);
  if (args.records) spec.data_used.record_count = args.records;
  if (args.classes) spec.data_used.class_count = args.classes;
  for (const auto& m : args.metric_names) spec.test_params.metric_names.push_back(m);
  if (args.holdout && !args.cross_validation.empty()) {
    throw InvalidArgument("--holdout and --cv are mutually exclusive");
  }
  if (args.holdout) spec.test_params.evaluation_procedure = Holdout{*args.holdout, args.stratified};
  if (!args.cross_validation.empty()) {
    const auto x = args.cross_validation.find('x');
    std::int64_t p = 0, r = 0;
    const auto& s = args.cross_validation;
    const bool ok = x != std::string::npos &&
                    std::from_chars(s.data(), s.data() + x, p).ptr == s.data() + x &&
                    std::from_chars(s.data() + x + 1, s.data() + s.size(), r).ptr == s.data() + s.size();
    if (!ok) throw InvalidArgument("--cv expects PARTITIONSxREPETITIONS, e.g. 7x2");
    spec.test_params.evaluation_procedure = CrossValidation{p, r};
  }
  return spec;
}

int cmd_run(const Globals& g, const RunArgs& args) {
  auto store = open_store(g);
  auto spec = build_run_spec(args);
  WrapOptions options;
  options.tee_stderr = !args.quiet;
  const auto result = wrap_command(store, args.command, std::move(spec), options);
  std::cout << result.code << '\n';
  if (result.status != RunStatus::succeeded) {
    fmt::print(stderr, "training {} registered as {}\n", result.code, to_string(result.status));
    return 1;
  }
  return 0;
}

void cmd_query(const Globals& g, const std::string& kind_text, const std::vector<std::string>& atoms,
               const std::string& top_metric, std::size_t top_count, bool json) {
  const auto kind = parse_record_kind(kind_text);
  if (!kind) throw InvalidArgument("unknown record kind '" + kind_text + "' (action, training, lesson)");
  std::string text;
  for (const auto& a : atoms) {
    if (!text.empty()) text += ' ';
    text += a;
  }
  const auto predicate = parse_predicate(text);
  const auto store = open_store(g);
  auto run = [&]<typename Record>(std::vector<Record> records) {
    records = filter(records, predicate);
    if (!top_metric.empty()) records = top_k(records, FieldSelector::parse(top_metric), top_count);
    print_records(records, json);
  };
  switch (*kind) {
    case RecordKind::action: run(store.actions()); break;
    case RecordKind::training: run(store.trainings()); break;
    case RecordKind::lesson: run(store.lessons()); break;
  }
}

void cmd_stats(const Globals& g, const std::string& group_by, const std::string& metric, const std::string& where,
               bool json) {
  const auto key = FieldSelector::parse(group_by);
  const auto value = FieldSelector::parse(metric);
  const auto predicate = parse_predicate(where);
  const auto store = open_store(g);
  const auto records = filter(store.trainings(), predicate);
  const auto stats = group_stats(records, key, value);
  if (json) {
    Json j;
    j["group_by"] = key.text();
    j["metric"] = value.text();
    j["groups"] = Json::array();
    for (const auto& [label, s] : stats.groups) {
      Json ordered;
      ordered["value"] = label;
      const auto summary = summary_json(s);
      for (const auto& [k, v] : summary.items()) ordered[k] = v;
      j["groups"].push_back(std::move(ordered));
    }
    j["skipped"] = stats.skipped;
    std::cout << j.dump(2) << '\n';
    return;
  }
  fmt::print("{}\tn\tmean\tstd\tmin\tq1\tmedian\tq3\tmax\n", key.text());
  for (const auto& [label, s] : stats.groups) {
    fmt::print("{}\t{}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\n", label, s.n, s.mean, s.sample_std,
               s.min, s.q1, s.median, s.q3, s.max);
  }
  if (stats.skipped > 0) fmt::print("skipped: {} record(s) without {}\n", stats.skipped, value.text());
}

void cmd_report(const Globals& g, const std::string& task, bool chrono) {
  if (task.empty() == !chrono) throw InvalidArgument("report needs exactly one of --task or --chronology");
  const auto store = open_store(g);
  if (chrono) {
    std::cout << chronology(store);
    return;
  }
  std::cout << task_report(store, canonical_task(task, store.taxonomy()));
}

struct SynthArgs {
  std::string kind;
  std::string metric;
  std::string vary;
  std::string param;
  std::string draft;
  std::string where;
  std::optional<double> tolerance;
  std::optional<double> min_delta;
  std::optional<double> threshold;
  bool json = false;
};

void cmd_synthesize(const Globals& g, const SynthArgs& args) {
  std::optional<CandidateKind> only;
  if (!args.kind.empty()) {
    only = parse_candidate_kind(args.kind);
    if (!only) throw InvalidArgument("unknown candidate kind '" + args.kind + "'");
    if (*only == CandidateKind::drift) throw InvalidArgument("drift candidates come from 'rastro monitor'");
  }
  auto wanted = [&](CandidateKind k) { return !only || *only == k; };
  auto require = [&](CandidateKind k, const std::string& value, std::string_view flag) {
    if (only && *only == k && value.empty()) {
      throw InvalidArgument(fmt::format("--kind {} needs {}", to_string(k), flag));
    }
    return wanted(k) && !value.empty();
  };

  const auto store = open_store(g);
  const auto& config = store.meta().config;
  const auto trainings = filter(store.trainings(), parse_predicate(args.where));
  std::vector<LessonCandidate> out;

  if (wanted(CandidateKind::equal_metrics)) {
    const auto found = detect_equal_metrics(trainings, args.tolerance.value_or(config.equal_tolerance));
    out.insert(out.end(), found.begin(), found.end());
  }
  const bool improvement = require(CandidateKind::improvement, args.vary, "--vary");
  const bool best = require(CandidateKind::best_setting, args.param, "--param");
  if ((improvement || best) && args.metric.empty()) throw InvalidArgument("--vary and --param need --metric");
  if (improvement) {
    const auto found = attribute_improvement(trainings, FieldSelector::parse(args.vary),
                                             FieldSelector::parse(args.metric),
                                             args.min_delta.value_or(config.min_delta_points));
    out.insert(out.end(), found.begin(), found.end());
  }
  if (best) {
    if (auto c = best_setting(trainings, FieldSelector::parse(args.param), FieldSelector::parse(args.metric))) {
      out.push_back(std::move(*c));
    }
  }
  if (require(CandidateKind::redundancy, args.draft, "--draft")) {
    for (const auto& m : redundancy_warning(store, args.draft, args.threshold)) out.push_back(to_candidate(m));
  }

  if (args.json) {
    Json arr = Json::array();
    for (const auto& c : out) arr.push_back(candidate_json(c));
    std::cout << arr.dump(2) << '\n';
    return;
  }
  if (out.empty()) {
    std::cout << "no candidates\n";
    return;
  }
  for (const auto& c : out) {
    fmt::print("[{}] {}\n", to_string(c.kind), c.description);
    if (!c.evidence.empty()) fmt::print("  evidence: {}\n", fmt::join(c.evidence, ", "));
    fmt::print("  confidence: {}\n", c.confidence);
  }
}

int cmd_monitor(double baseline, double threshold, const std::string& series_path, bool json, bool fail_on_degraded) {
  std::istringstream in(read_input(series_path));
  const auto series = parse_series(in);
  const auto report = monitor_performance(series, baseline, threshold);
  if (json) {
    Json j;
    j["status"] = std::string(to_string(report.status));
    j["baseline"] = baseline;
    j["threshold"] = threshold;
    j["floor"] = report.floor;
    j["flagged"] = Json::array();
    for (const auto& p : report.flagged) j["flagged"].push_back(Json{{"at", p.at.iso8601()}, {"accuracy", p.accuracy}});
    j["message"] = report.message;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << report.message << '\n';
    for (const auto& p : report.flagged) fmt::print("flagged: {} {:.4f}\n", p.at.iso8601(), p.accuracy);
  }
  return fail_on_degraded && report.status == Health::degraded ? 1 : 0;
}

void cmd_export(const Globals& g, std::int64_t code) {
  const auto store = open_store(g);
  std::cout << render_mlschema(store.read<TrainingRecord>(code));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Record and query the trail of a data mining project"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--dir", g.dir, "Project directory (default: $RASTRO_DIR)");

  std::string init_name;
  auto* init = app.add_subcommand("init", "Create a trail in the project directory (default: $RASTRO_DIR or .)");
  init->add_option("--name", init_name, "Project name (default: directory name)");

  ActionArgs action_args;
  auto* action = app.add_subcommand("action", "Definitions of action");
  action->require_subcommand(1);
  auto* action_add = action->add_subcommand("add", "Register a definition of action");
  action_add->add_option("-m,--message", action_args.message, "What was decided or done")->required();
  action_add->add_option("--task", action_args.task, "Methodology task, e.g. \"Format Data\"");
  action_add->add_option("--resources", action_args.resources, "Resources involved");
  action_add->add_option("--status", action_args.status, "defined, executed or abandoned");
  action_add->add_option("--at", action_args.at, "Registration time (ISO-8601; default now)");
  action_add->add_flag("--strict", action_args.strict, "Refuse to register when similar records exist");

  LessonArgs lesson_args;
  auto* lesson = app.add_subcommand("lesson", "Lessons learned");
  lesson->require_subcommand(1);
  auto* lesson_add = lesson->add_subcommand("add", "Register a lesson learned");
  lesson_add->add_option("-m,--message", lesson_args.message, "The lesson")->required();
  lesson_add->add_option("--task", lesson_args.task, "Methodology task");
  lesson_add->add_option("--origin", lesson_args.origin, "human or synthesized");
  lesson_add->add_option("--training", lesson_args.trainings, "Related training code (repeatable)");
  lesson_add->add_option("--at", lesson_args.at, "Registration time (ISO-8601; default now)");

  std::string record_file;
  auto* training = app.add_subcommand("training", "Registrations of training");
  training->require_subcommand(1);
  auto* training_add = training->add_subcommand("add", "Register trainings from a JSON or JSON-lines file");
  training_add->add_option("--record", record_file, "File with the record(s), or - for stdin")->required();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a command and register it as a training");
  run->add_option("command", run_args.command, "Command line, after --")->required();
  run->add_option("--spec", run_args.spec_file, "JSON with configuration/data_used/training_params/test_params");
  run->add_option("--algorithm", run_args.algorithm, "Algorithm name");
  run->add_option("--param", run_args.params, "Hyperparameter name[:type]=value (repeatable)");
  run->add_option("--library", run_args.libraries, "Library version name=version (repeatable)");
  run->add_option("--hardware", run_args.hardware, "Hardware description");
  run->add_option("--seed", run_args.seed, "Random seed");
  run->add_option("--dataset", run_args.dataset, "Dataset description");
  run->add_option("--selection", run_args.selection, "Selection criteria");
  run->add_option("--feature", run_args.features, "Feature name (repeatable)");
  run->add_option("--records", run_args.records, "Number of records used");
  run->add_option("--classes", run_args.classes, "Number of classes");
  run->add_option("--metric-name", run_args.metric_names, "Declared metric (repeatable)");
  run->add_option("--holdout", run_args.holdout, "Holdout fraction");
  run->add_flag("--stratified", run_args.stratified, "Stratified holdout");
  run->add_option("--cv", run_args.cross_validation, "Cross-validation PARTITIONSxREPETITIONS");
  run->add_flag("--quiet", run_args.quiet, "Do not echo the command's standard error");

  std::string query_kind;
  std::vector<std::string> query_atoms;
  std::string query_top;
  std::size_t query_count = 1;
  bool query_json = false;
  auto* query = app.add_subcommand("query", "List records matching a predicate");
  query->add_option("kind", query_kind, "action, training or lesson")->required();
  query->add_option("predicate", query_atoms, "Atoms such as 'training_params.algorithm = MLP'");
  query->add_option("--top", query_top, "Keep the best records by this metric path");
  query->add_option("-k", query_count, "How many records --top keeps")->check(CLI::PositiveNumber);
  query->add_flag("--json", query_json, "Emit records as a JSON array");

  std::string stats_group, stats_metric, stats_where;
  bool stats_json = false;
  auto* stats = app.add_subcommand("stats", "Summary statistics of a metric per group of trainings");
  stats->add_option("--group-by", stats_group, "Field path to group by")->required();
  stats->add_option("--metric", stats_metric, "Metric field path, e.g. results.accuracy")->required();
  stats->add_option("--where", stats_where, "Predicate restricting the trainings");
  stats->add_flag("--json", stats_json, "Emit JSON");

  std::string report_task;
  bool report_chrono = false;
  auto* report = app.add_subcommand("report", "Task report or chronology");
  report->add_option("--task", report_task, "Task name");
  report->add_flag("--chronology", report_chrono, "Every record in time order");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synthesize", "Propose lesson candidates from the trail");
  synth->add_option("--kind", synth_args.kind, "equal-metrics, improvement, best-setting or redundancy");
  synth->add_option("--metric", synth_args.metric, "Metric path for improvement and best-setting");
  synth->add_option("--vary", synth_args.vary, "Setting path whose effect is measured (improvement)");
  synth->add_option("--param", synth_args.param, "Setting path to rank (best-setting)");
  synth->add_option("--draft", synth_args.draft, "Draft text checked for redundancy");
  synth->add_option("--where", synth_args.where, "Predicate restricting the trainings");
  synth->add_option("--tolerance", synth_args.tolerance, "Equality tolerance (default from project.json)");
  synth->add_option("--min-delta", synth_args.min_delta, "Minimum improvement in points (default from project.json)");
  synth->add_option("--threshold", synth_args.threshold, "Jaccard threshold (default from project.json)");
  synth->add_flag("--json", synth_args.json, "Emit JSON");

  double baseline = 0.0, threshold = 0.0;
  std::string series_path;
  bool monitor_json = false, fail_on_degraded = false;
  auto* monitor = app.add_subcommand("monitor", "Check an evaluation series against a baseline");
  monitor->add_option("--baseline", baseline, "Accuracy of the deployed model")->required();
  monitor->add_option("--threshold", threshold, "Tolerated drop")->required();
  monitor->add_option("--series", series_path, "File of timestamp,accuracy lines, or - for stdin")->required();
  monitor->add_flag("--json", monitor_json, "Emit JSON");
  monitor->add_flag("--fail-on-degraded", fail_on_degraded, "Exit 1 when degraded");

  std::int64_t export_code = 0;
  auto* exp = app.add_subcommand("export", "Export a training");
  exp->add_option("--mlschema", export_code, "Training code to export as ML Schema JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (init->parsed()) cmd_init(g, init_name);
    else if (action_add->parsed()) return cmd_action_add(g, action_args);
    else if (lesson_add->parsed()) cmd_lesson_add(g, lesson_args);
    else if (training_add->parsed()) cmd_training_add(g, record_file);
    else if (run->parsed()) return cmd_run(g, run_args);
    else if (query->parsed()) cmd_query(g, query_kind, query_atoms, query_top, query_count, query_json);
    else if (stats->parsed()) cmd_stats(g, stats_group, stats_metric, stats_where, stats_json);
    else if (report->parsed()) cmd_report(g, report_task, report_chrono);
    else if (synth->parsed()) cmd_synthesize(g, synth_args);
    else if (monitor->parsed()) return cmd_monitor(baseline, threshold, series_path, monitor_json, fail_on_degraded);
    else if (exp->parsed()) cmd_export(g, export_code);
  } catch (const UserError& e) {
    fmt::print(stderr, "rastro: {}\n", e.what());
    return 1;
  } catch (const EnvironmentError& e) {
    fmt::print(stderr, "rastro: {}\n", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "rastro: {}\n", e.what());
    return 2;
  }
  return 0;
}
