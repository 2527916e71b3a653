// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON encoding of trail records. One record per line; keys are emitted in a
// fixed order so that encoding is byte-deterministic.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "rastro/core.hpp"

namespace rastro {

using Json = nlohmann::ordered_json;

inline constexpr std::int64_t kSchemaVersion = 1;

/// Raised by the decoders. The store rethrows it as CorruptionError with the
/// file and line attached.
class DecodeError : public UserError {
 public:
  using UserError::UserError;
};

namespace detail {

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DecodeError((path_.empty() ? std::string("record") : path_) + ": " + msg);
  }

  std::string child_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  const Json& at(std::string_view key) const {
    const auto it = j_.find(std::string(key));
    if (it == j_.end()) throw DecodeError(child_path(key) + ": missing");
    return *it;
  }

  Reader object(std::string_view key) const { return Reader(at(key), child_path(key)); }

  std::string text(std::string_view key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw DecodeError(child_path(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::optional<std::string> opt_text(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return text(key);
  }

  std::int64_t integer(std::string_view key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) throw DecodeError(child_path(key) + ": expected an integer");
    return v.get<std::int64_t>();
  }

  std::optional<std::int64_t> opt_integer(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return integer(key);
  }

  double real(std::string_view key) const {
    const auto& v = at(key);
    if (!v.is_number()) throw DecodeError(child_path(key) + ": expected a number");
    return v.get<double>();
  }

  bool boolean(std::string_view key) const {
    const auto& v = at(key);
    if (!v.is_boolean()) throw DecodeError(child_path(key) + ": expected a boolean");
    return v.get<bool>();
  }

  Timestamp timestamp(std::string_view key) const {
    const auto s = text(key);
    const auto t = parse_timestamp(s);
    if (!t) throw DecodeError(child_path(key) + ": not an ISO-8601 timestamp");
    return *t;
  }

  std::vector<std::string> text_list(std::string_view key) const {
    const auto& v = at(key);
    if (!v.is_array()) throw DecodeError(child_path(key) + ": expected an array");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw DecodeError(child_path(key) + ": expected strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  /// Rejects keys outside `allowed` so typos in hand-edited trails surface.
  void only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [k, _] : j_.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || a == k;
      if (!ok) fail("unexpected key '" + k + "'");
    }
  }

  const Json& json() const noexcept { return j_; }
  const std::string& path() const noexcept { return path_; }

 private:
  const Json& j_;
  std::string path_;
};

inline Json encode_task(const TaskRef& t) {
  Json j;
  j["phase"] = std::string(to_string(t.phase));
  j["name"] = t.task;
  return j;
}

inline TaskRef decode_task(const Reader& r) {
  r.only({"phase", "name"});
  const auto phase = parse_phase(r.text("phase"));
  if (!phase) r.fail("unknown phase");
  return TaskRef{*phase, r.text("name")};
}

inline void check_header(const Reader& r) {
  const auto version = r.integer("schema_version");
  if (version > kSchemaVersion) {
    throw SchemaVersionError("record schema_version " + std::to_string(version) +
                             " is newer than supported version " + std::to_string(kSchemaVersion));
  }
  if (version < 1) r.fail("schema_version must be positive");
}

inline Json header(std::int64_t code, const std::optional<Timestamp>& at) {
  if (!at) throw InvalidArgument("registered_at must be assigned before encoding");
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["code"] = code;
  j["registered_at"] = at->iso8601();
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Hyperparameters, metrics, evaluation procedures

inline Json encode_hyper(const HyperValue& v) {
  Json j;
  j["type"] = std::string(type_tag(v));
  std::visit([&](const auto& x) { j["value"] = x; }, v);
  return j;
}

inline HyperValue decode_hyper(const detail::Reader& r) {
  r.only({"type", "value"});
  const auto tag = r.text("type");
  if (tag == "text") return r.text("value");
  if (tag == "int") return r.integer("value");
  if (tag == "real") return r.real("value");
  if (tag == "bool") return r.boolean("value");
  r.fail("unknown hyperparameter type '" + tag + "'");
}

inline Json encode_metric(const MetricResult& m) {
  if (const auto* s = std::get_if<double>(&m.value)) return Json(*s);
  Json arr = Json::array();
  for (double x : std::get<std::vector<double>>(m.value)) arr.push_back(x);
  return arr;
}

inline MetricResult decode_metric(const Json& j, const std::string& path) {
  if (j.is_number()) return MetricResult::scalar(j.get<double>());
  if (!j.is_array()) throw DecodeError(path + ": expected a number or an array of numbers");
  std::vector<double> xs;
  for (const auto& e : j) {
    if (!e.is_number()) throw DecodeError(path + ": expected numbers");
    xs.push_back(e.get<double>());
  }
  return MetricResult::samples(std::move(xs));
}

inline Json encode_procedure(const EvaluationProcedure& p) {
  Json j;
  if (const auto* h = std::get_if<Holdout>(&p)) {
    j["type"] = "holdout";
    j["fraction"] = h->fraction;
    j["stratified"] = h->stratified;
  } else {
    const auto& cv = std::get<CrossValidation>(p);
    j["type"] = "cross_validation";
    j["partitions"] = cv.partitions;
    j["repetitions"] = cv.repetitions;
  }
  return j;
}

inline EvaluationProcedure decode_procedure(const detail::Reader& r) {
  const auto type = r.text("type");
  if (type == "holdout") {
    r.only({"type", "fraction", "stratified"});
    return Holdout{r.real("fraction"), r.boolean("stratified")};
  }
  if (type == "cross_validation") {
    r.only({"type", "partitions", "repetitions"});
    return CrossValidation{r.integer("partitions"), r.integer("repetitions")};
  }
  r.fail("unknown evaluation procedure '" + type + "'");
}

// ---------------------------------------------------------------------------
// Records

inline Json to_json(const ActionDefinition& a) {
  auto j = detail::header(a.code, a.registered_at);
  j["description"] = a.description;
  if (a.task) j["task"] = detail::encode_task(*a.task);
  if (a.resources) j["resources"] = *a.resources;
  j["status"] = std::string(to_string(a.status));
  return j;
}

inline Json to_json(const Lesson& l) {
  auto j = detail::header(l.code, l.registered_at);
  j["description"] = l.description;
  if (l.task) j["task"] = detail::encode_task(*l.task);
  j["origin"] = std::string(to_string(l.origin));
  j["related_training_codes"] = l.related_training_codes;
  return j;
}

inline Json to_json(const TrainingRecord& r) {
  auto j = detail::header(r.context.code, r.context.registered_at);

  Json ctx;
  ctx["epochs"] = r.context.epochs;
  ctx["duration_seconds"] = r.context.duration_seconds;
  ctx["status"] = std::string(to_string(r.context.status));
  if (r.context.error_message) ctx["error_message"] = *r.context.error_message;
  j["context"] = std::move(ctx);

  Json cfg;
  cfg["program_id"] = r.configuration.program_id;
  cfg["library_versions"] = Json::object();
  for (const auto& [k, v] : r.configuration.library_versions) cfg["library_versions"][k] = v;
  if (r.configuration.hardware) cfg["hardware"] = *r.configuration.hardware;
  if (r.configuration.random_seed) cfg["random_seed"] = *r.configuration.random_seed;
  j["configuration"] = std::move(cfg);

  Json data;
  data["dataset_description"] = r.data_used.dataset_description;
  if (r.data_used.selection_criteria) data["selection_criteria"] = *r.data_used.selection_criteria;
  data["feature_names"] = r.data_used.feature_names;
  if (r.data_used.record_count) data["record_count"] = *r.data_used.record_count;
  if (r.data_used.class_count) data["class_count"] = *r.data_used.class_count;
  j["data_used"] = std::move(data);

  Json tp;
  tp["algorithm"] = r.training_params.algorithm;
  tp["hyperparameters"] = Json::object();
  for (const auto& [k, v] : r.training_params.hyperparameters) tp["hyperparameters"][k] = encode_hyper(v);
  j["training_params"] = std::move(tp);

  Json test;
  if (r.test_params.evaluation_procedure) {
    test["evaluation_procedure"] = encode_procedure(*r.test_params.evaluation_procedure);
  }
  test["metric_names"] = r.test_params.metric_names;
  j["test_params"] = std::move(test);

  Json res;
  res["metrics"] = Json::object();
  for (const auto& [k, v] : r.results.metrics) res["metrics"][k] = encode_metric(v);
  if (r.results.model_ref) res["model_ref"] = *r.results.model_ref;
  j["results"] = std::move(res);
  return j;
}

inline ActionDefinition action_from_json(const Json& j) {
  const detail::Reader r(j, "");
  r.only({"schema_version", "code", "registered_at", "description", "task", "resources", "status"});
  detail::check_header(r);
  ActionDefinition a;
  a.code = r.integer("code");
  a.registered_at = r.timestamp("registered_at");
  a.description = r.text("description");
  if (r.has("task")) a.task = detail::decode_task(r.object("task"));
  a.resources = r.opt_text("resources");
  const auto status = parse_action_status(r.text("status"));
  if (!status) r.fail("unknown action status");
  a.status = *status;
  return a;
}

inline Lesson lesson_from_json(const Json& j) {
  const detail::Reader r(j, "");
  r.only({"schema_version", "code", "registered_at", "description", "task", "origin",
          "related_training_codes"});
  detail::check_header(r);
  Lesson l;
  l.code = r.integer("code");
  l.registered_at = r.timestamp("registered_at");
  l.description = r.text("description");
  if (r.has("task")) l.task = detail::decode_task(r.object("task"));
  const auto origin = parse_lesson_origin(r.text("origin"));
  if (!origin) r.fail("unknown lesson origin");
  l.origin = *origin;
  const auto& codes = r.at("related_training_codes");
  if (!codes.is_array()) r.fail("related_training_codes must be an array");
  for (const auto& c : codes) {
    if (!c.is_number_integer()) r.fail("related_training_codes must hold integers");
    l.related_training_codes.push_back(c.get<std::int64_t>());
  }
  return l;
}

inline TrainingRecord training_from_json(const Json& j) {
  const detail::Reader r(j, "");
  r.only({"schema_version", "code", "registered_at", "context", "configuration", "data_used",
          "training_params", "test_params", "results"});
  detail::check_header(r);
  TrainingRecord t;
  t.context.code = r.integer("code");
  t.context.registered_at = r.timestamp("registered_at");

  const auto ctx = r.object("context");
  ctx.only({"epochs", "duration_seconds", "status", "error_message"});
  t.context.epochs = ctx.integer("epochs");
  t.context.duration_seconds = ctx.real("duration_seconds");
  const auto status = parse_run_status(ctx.text("status"));
  if (!status) ctx.fail("unknown run status");
  t.context.status = *status;
  t.context.error_message = ctx.opt_text("error_message");

  const auto cfg = r.object("configuration");
  cfg.only({"program_id", "library_versions", "hardware", "random_seed"});
  t.configuration.program_id = cfg.text("program_id");
  const auto libs = cfg.object("library_versions");
  for (const auto& [k, _] : libs.json().items()) t.configuration.library_versions[k] = libs.text(k);
  t.configuration.hardware = cfg.opt_text("hardware");
  t.configuration.random_seed = cfg.opt_integer("random_seed");

  const auto data = r.object("data_used");
  data.only({"dataset_description", "selection_criteria", "feature_names", "record_count", "class_count"});
  t.data_used.dataset_description = data.text("dataset_description");
  t.data_used.selection_criteria = data.opt_text("selection_criteria");
  t.data_used.feature_names = data.text_list("feature_names");
  t.data_used.record_count = data.opt_integer("record_count");
  t.data_used.class_count = data.opt_integer("class_count");

  const auto tp = r.object("training_params");
  tp.only({"algorithm", "hyperparameters"});
  t.training_params.algorithm = tp.text("algorithm");
  const auto hypers = tp.object("hyperparameters");
  for (const auto& [k, _] : hypers.json().items()) {
    t.training_params.hyperparameters[k] = decode_hyper(hypers.object(k));
  }

  const auto test = r.object("test_params");
  test.only({"evaluation_procedure", "metric_names"});
  if (test.has("evaluation_procedure")) {
    t.test_params.evaluation_procedure = decode_procedure(test.object("evaluation_procedure"));
  }
  t.test_params.metric_names = test.text_list("metric_names");

  const auto res = r.object("results");
  res.only({"metrics", "model_ref"});
  const auto metrics = res.object("metrics");
  for (const auto& [k, v] : metrics.json().items()) {
    t.results.metrics[k] = decode_metric(v, metrics.child_path(k));
  }
  t.results.model_ref = res.opt_text("model_ref");
  return t;
}

/// Compact single-line form used for trail lines. Invalid UTF-8 is replaced
/// with U+FFFD rather than aborting a commit.
inline std::string encode_line(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

// ---------------------------------------------------------------------------
// Project metadata

/// Tunables stored in project.json under "config".
struct ProjectConfig {
  double equal_tolerance = 1e-9;
  double min_delta_points = 0.5;
  double jaccard_threshold = 0.5;
  /// Extra task names, normalized name -> phase.
  std::map<std::string, Phase> tasks;

  Taxonomy taxonomy() const {
    Taxonomy t = Taxonomy::builtin();
    for (const auto& [name, phase] : tasks) t.add(name, phase);
    return t;
  }

  friend bool operator==(const ProjectConfig&, const ProjectConfig&) = default;
};

struct ProjectMeta {
  std::int64_t schema_version = kSchemaVersion;
  std::string name;
  Timestamp created_at;
  ProjectConfig config;
};

inline Json to_json(const ProjectMeta& m) {
  Json j;
  j["schema_version"] = m.schema_version;
  j["name"] = m.name;
  j["created_at"] = m.created_at.iso8601();
  Json cfg;
  cfg["equal_tolerance"] = m.config.equal_tolerance;
  cfg["min_delta_points"] = m.config.min_delta_points;
  cfg["jaccard_threshold"] = m.config.jaccard_threshold;
  cfg["tasks"] = Json::object();
  for (const auto& [k, v] : m.config.tasks) cfg["tasks"][k] = std::string(to_string(v));
  j["config"] = std::move(cfg);
  return j;
}

inline ProjectMeta project_meta_from_json(const Json& j) {
  const detail::Reader r(j, "project");
  detail::check_header(r);
  ProjectMeta m;
  m.schema_version = r.integer("schema_version");
  m.name = r.text("name");
  m.created_at = r.timestamp("created_at");
  if (r.has("config")) {
    const auto cfg = r.object("config");
    if (cfg.has("equal_tolerance")) m.config.equal_tolerance = cfg.real("equal_tolerance");
    if (cfg.has("min_delta_points")) m.config.min_delta_points = cfg.real("min_delta_points");
    if (cfg.has("jaccard_threshold")) m.config.jaccard_threshold = cfg.real("jaccard_threshold");
    if (cfg.has("tasks")) {
      const auto tasks = cfg.object("tasks");
      for (const auto& [k, _] : tasks.json().items()) {
        const auto phase = parse_phase(tasks.text(k));
        if (!phase) tasks.fail("unknown phase for task '" + k + "'");
        m.config.tasks[normalize_task_text(k)] = *phase;
      }
    }
  }
  return m;
}

}  // namespace rastro
