// SPDX-License-Identifier: Apache-2.0
#pragma once

// Documents generated from the trail. Every function here is a pure function
// of the records it is given: the same trail renders to the same bytes.

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "rastro/core.hpp"
#include "rastro/query.hpp"
#include "rastro/serialize.hpp"
#include "rastro/stats.hpp"
#include "rastro/store.hpp"

namespace rastro {

namespace detail {

/// Descriptions render on one line; embedded line breaks become spaces.
inline std::string one_line(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

template <typename Record>
std::vector<Record> chronological(std::vector<Record> records) {
  std::stable_sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
    return std::pair(registered_at_of(a), code_of(a)) < std::pair(registered_at_of(b), code_of(b));
  });
  return records;
}

inline std::string metric_brief(const MetricResult& m) {
  if (!m.is_samples()) return fmt::format("{:.4f}", m.center());
  const auto s = summarize(m.flattened());
  return fmt::format("{:.4f} +- {:.4f} (n={})", s.mean, s.sample_std, s.n);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Task report

/// Markdown report for one task: its action definitions, its lessons, and a
/// summary of the trainings those lessons reference.
inline std::string task_report(std::span<const ActionDefinition> actions, std::span<const Lesson> lessons,
                               std::span<const TrainingRecord> trainings, const TaskRef& task) {
  std::vector<ActionDefinition> tagged_actions;
  for (const auto& a : actions) {
    if (a.task && *a.task == task) tagged_actions.push_back(a);
  }
  std::vector<Lesson> tagged_lessons;
  for (const auto& l : lessons) {
    if (l.task && *l.task == task) tagged_lessons.push_back(l);
  }
  tagged_actions = detail::chronological(std::move(tagged_actions));
  tagged_lessons = detail::chronological(std::move(tagged_lessons));

  std::string out;
  out += fmt::format("# Task report: {}\n\nPhase: {}\n\n", task.task, to_string(task.phase));

  out += "## Action definitions\n\n";
  if (tagged_actions.empty()) out += "(none)\n";
  for (const auto& a : tagged_actions) {
    out += fmt::format("- {} action {}: {}", registered_at_of(a).iso8601(), a.code, detail::one_line(a.description));
    if (a.status != ActionStatus::defined) out += fmt::format(" [{}]", to_string(a.status));
    if (a.resources) out += fmt::format(" (resources: {})", detail::one_line(*a.resources));
    out += "\n";
  }

  out += "\n## Lessons learned\n\n";
  if (tagged_lessons.empty()) out += "(none)\n";
  std::set<std::int64_t> referenced;
  for (const auto& l : tagged_lessons) {
    out += fmt::format("- {} lesson {}: {}", registered_at_of(l).iso8601(), l.code, detail::one_line(l.description));
    if (!l.related_training_codes.empty()) {
      out += fmt::format(" (trainings {})", fmt::join(l.related_training_codes, ", "));
    }
    out += "\n";
    referenced.insert(l.related_training_codes.begin(), l.related_training_codes.end());
  }

  std::vector<TrainingRecord> related;
  for (const auto& t : trainings) {
    if (referenced.contains(t.context.code)) related.push_back(t);
  }
  out += "\n## Training summary\n\n";
  out += fmt::format("Trainings referenced: {}", related.size());
  if (!related.empty()) {
    std::vector<std::int64_t> codes;
    for (const auto& t : related) codes.push_back(t.context.code);
    out += fmt::format(" (codes {})", fmt::join(codes, ", "));
  }
  out += "\n";

  std::set<std::string> metric_names;
  for (const auto& t : related) {
    for (const auto& [name, _] : t.results.metrics) metric_names.insert(name);
  }
  if (!metric_names.empty()) {
    out += "\n| metric | n | mean | std | min | q1 | median | q3 | max | best |\n";
    out += "|---|---|---|---|---|---|---|---|---|---|\n";
  }
  for (const auto& name : metric_names) {
    std::vector<double> samples;
    for (const auto& t : related) {
      if (const auto it = t.results.metrics.find(name); it != t.results.metrics.end()) {
        const auto xs = it->second.flattened();
        samples.insert(samples.end(), xs.begin(), xs.end());
      }
    }
    const auto s = summarize(samples);
    const auto best = top_k(std::span<const TrainingRecord>(related), FieldSelector::parse("results.metrics." + name), 1);
    out += fmt::format("| {} | {} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | training {} ({:.4f}) |\n",
                       name, s.n, s.mean, s.sample_std, s.min, s.q1, s.median, s.q3, s.max,
                       best.front().context.code, best.front().results.metrics.at(name).center());
  }
  return out;
}

inline std::string task_report(const TrailStore& store, const TaskRef& task) {
  const auto actions = store.actions();
  const auto lessons = store.lessons();
  const auto trainings = store.trainings();
  return task_report(actions, lessons, trainings, task);
}

// ---------------------------------------------------------------------------
// Chronology

/// One-line rendering of a record, as used by the chronology and `query`.
inline std::string summary_line(const ActionDefinition& a) {
  return fmt::format("{} action {}{} {}", registered_at_of(a).iso8601(), a.code,
                     a.task ? fmt::format(" [{}]", a.task->task) : std::string(), detail::one_line(a.description));
}

inline std::string summary_line(const Lesson& l) {
  return fmt::format("{} lesson {}{} {}", registered_at_of(l).iso8601(), l.code,
                     l.task ? fmt::format(" [{}]", l.task->task) : std::string(), detail::one_line(l.description));
}

inline std::string summary_line(const TrainingRecord& t) {
  std::string line = fmt::format("{} training {} [{}] {}", registered_at_of(t).iso8601(), t.context.code,
                                 t.training_params.algorithm, to_string(t.context.status));
  std::vector<std::string> metrics;
  for (const auto& [name, m] : t.results.metrics) metrics.push_back(name + "=" + detail::metric_brief(m));
  if (!metrics.empty()) line += fmt::format(" {}", fmt::join(metrics, "; "));
  return line;
}

/// Every record of the trail, one line each, ordered by timestamp, then kind
/// (action, training, lesson), then code.
inline std::string chronology(std::span<const ActionDefinition> actions, std::span<const Lesson> lessons,
                              std::span<const TrainingRecord> trainings) {
  using Key = std::tuple<Timestamp, int, std::int64_t>;
  std::vector<std::pair<Key, std::string>> entries;
  entries.reserve(actions.size() + lessons.size() + trainings.size());
  for (const auto& a : actions) entries.emplace_back(Key{registered_at_of(a), 0, a.code}, summary_line(a));
  for (const auto& t : trainings) entries.emplace_back(Key{registered_at_of(t), 1, t.context.code}, summary_line(t));
  for (const auto& l : lessons) entries.emplace_back(Key{registered_at_of(l), 2, l.code}, summary_line(l));
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::string out = "# Chronology\n\n";
  if (entries.empty()) out += "(none)\n";
  for (const auto& [_, line] : entries) out += line + "\n";
  return out;
}

inline std::string chronology(const TrailStore& store) {
  const auto actions = store.actions();
  const auto lessons = store.lessons();
  const auto trainings = store.trainings();
  return chronology(actions, lessons, trainings);
}

// ---------------------------------------------------------------------------
// ML Schema export

/// Where each training field lands in the ML Schema document.
struct SchemaMapping {
  std::string_view field;
  std::string_view destination;
};

inline constexpr std::array<SchemaMapping, 22> kMlSchemaMapping{{
    {"code", "Run.id"},
    {"registered_at", "Run.registered_at"},
    {"context.epochs", "Run.epochs"},
    {"context.duration_seconds", "Run.duration_seconds"},
    {"context.status", "Run.status"},
    {"context.error_message", "Run.error_message"},
    {"configuration.program_id", "Run.Implementation.name"},
    {"configuration.library_versions", "Run.Implementation.Software"},
    {"configuration.hardware", "Run.Implementation.hardware"},
    {"configuration.random_seed", "Run.Implementation.random_seed"},
    {"data_used.dataset_description", "Run.Data.Dataset.description"},
    {"data_used.selection_criteria", "Run.Data.Dataset.selection_criteria"},
    {"data_used.feature_names", "Run.Data.Dataset.Feature"},
    {"data_used.record_count", "Run.Data.Dataset.DataCharacteristic"},
    {"data_used.class_count", "Run.Data.Dataset.DataCharacteristic"},
    {"training_params.algorithm", "Run.Algorithm.name"},
    {"training_params.hyperparameters", "Run.HyperParameterSetting"},
    {"test_params.evaluation_procedure", "Run.EvaluationSpecification.EvaluationProcedure"},
    {"test_params.metric_names", "Run.EvaluationSpecification.EvaluationMeasure"},
    {"results.metrics", "Run.ModelEvaluation"},
    {"results.model_ref", "Run.Model.locator"},
    {"schema_version", "(unmapped: storage format version)"},
}};

namespace detail {

inline constexpr std::array<std::string_view, 4> kSplitPrefixes{"validation_", "training_", "train_", "test_"};

/// `validation_accuracy` -> {"accuracy", "validation"}.
inline std::pair<std::string, std::string> split_measure(const std::string& metric) {
  for (auto prefix : kSplitPrefixes) {
    if (metric.size() > prefix.size() && metric.starts_with(prefix)) {
      return {metric.substr(prefix.size()), std::string(prefix.substr(0, prefix.size() - 1))};
    }
  }
  return {metric, ""};
}

}  // namespace detail

/// Maps a training record onto ML Schema concepts (Run, Algorithm,
/// HyperParameterSetting, Implementation/Software, Data/Dataset/Feature,
/// EvaluationSpecification/EvaluationProcedure/EvaluationMeasure,
/// ModelEvaluation, Model).
inline Json export_mlschema(const TrainingRecord& r) {
  if (auto report = validate_training(r); !report.empty()) throw ValidationError(std::move(report));
  if (!r.context.registered_at) throw InvalidArgument("export needs a registered record");

  Json run;
  run["id"] = r.context.code;
  run["registered_at"] = r.context.registered_at->iso8601();
  run["epochs"] = r.context.epochs;
  run["duration_seconds"] = r.context.duration_seconds;
  run["status"] = std::string(to_string(r.context.status));
  if (r.context.error_message) run["error_message"] = *r.context.error_message;

  run["Algorithm"] = Json{{"name", r.training_params.algorithm}};

  Json settings = Json::array();
  for (const auto& [name, value] : r.training_params.hyperparameters) {
    Json s;
    s["HyperParameter"] = name;
    s["type"] = std::string(type_tag(value));
    std::visit([&](const auto& x) { s["value"] = x; }, value);
    settings.push_back(std::move(s));
  }
  run["HyperParameterSetting"] = std::move(settings);

  Json impl;
  impl["name"] = r.configuration.program_id;
  impl["Software"] = Json::array();
  for (const auto& [name, version] : r.configuration.library_versions) {
    impl["Software"].push_back(Json{{"name", name}, {"version", version}});
  }
  if (r.configuration.hardware) impl["hardware"] = *r.configuration.hardware;
  if (r.configuration.random_seed) impl["random_seed"] = *r.configuration.random_seed;
  run["Implementation"] = std::move(impl);

  Json dataset;
  dataset["description"] = r.data_used.dataset_description;
  if (r.data_used.selection_criteria) dataset["selection_criteria"] = *r.data_used.selection_criteria;
  dataset["Feature"] = Json::array();
  for (const auto& f : r.data_used.feature_names) dataset["Feature"].push_back(Json{{"name", f}});
  Json characteristics = Json::array();
  if (r.data_used.record_count) {
    characteristics.push_back(Json{{"name", "record_count"}, {"value", *r.data_used.record_count}});
  }
  if (r.data_used.class_count) {
    characteristics.push_back(Json{{"name", "class_count"}, {"value", *r.data_used.class_count}});
  }
  if (!characteristics.empty()) dataset["DataCharacteristic"] = std::move(characteristics);
  run["Data"] = Json{{"Dataset", std::move(dataset)}};

  Json spec;
  if (r.test_params.evaluation_procedure) {
    spec["EvaluationProcedure"] = encode_procedure(*r.test_params.evaluation_procedure);
  }
  spec["EvaluationMeasure"] = r.test_params.metric_names;
  run["EvaluationSpecification"] = std::move(spec);

  Json evaluations = Json::array();
  for (const auto& [name, metric] : r.results.metrics) {
    const auto [measure, split] = detail::split_measure(name);
    Json e;
    e["EvaluationMeasure"] = measure;
    if (!split.empty()) e["dataset"] = split;
    if (metric.is_samples()) e["values"] = encode_metric(metric);
    else e["value"] = metric.center();
    evaluations.push_back(std::move(e));
  }
  run["ModelEvaluation"] = std::move(evaluations);

  if (r.results.model_ref) run["Model"] = Json{{"locator", *r.results.model_ref}};
  return Json{{"Run", std::move(run)}};
}

inline std::string render_mlschema(const TrainingRecord& r) { return export_mlschema(r).dump(2) + "\n"; }

/// Inverse of export_mlschema.
inline TrainingRecord import_mlschema(const Json& doc) {
  const detail::Reader top(doc, "");
  top.only({"Run"});
  const auto run = top.object("Run");
  run.only({"id", "registered_at", "epochs", "duration_seconds", "status", "error_message", "Algorithm",
            "HyperParameterSetting", "Implementation", "Data", "EvaluationSpecification", "ModelEvaluation", "Model"});
  TrainingRecord r;
  r.context.code = run.integer("id");
  r.context.registered_at = run.timestamp("registered_at");
  r.context.epochs = run.integer("epochs");
  r.context.duration_seconds = run.real("duration_seconds");
  const auto status = parse_run_status(run.text("status"));
  if (!status) run.fail("unknown status");
  r.context.status = *status;
  r.context.error_message = run.opt_text("error_message");

  r.training_params.algorithm = run.object("Algorithm").text("name");
  const auto& settings = run.at("HyperParameterSetting");
  if (!settings.is_array()) run.fail("HyperParameterSetting must be an array");
  for (const auto& s : settings) {
    const detail::Reader reader(s, run.child_path("HyperParameterSetting"));
    reader.only({"HyperParameter", "type", "value"});
    Json tagged;
    tagged["type"] = reader.text("type");
    tagged["value"] = reader.at("value");
    r.training_params.hyperparameters[reader.text("HyperParameter")] =
        decode_hyper(detail::Reader(tagged, reader.path()));
  }

  const auto impl = run.object("Implementation");
  impl.only({"name", "Software", "hardware", "random_seed"});
  r.configuration.program_id = impl.text("name");
  for (const auto& sw : impl.at("Software")) {
    const detail::Reader reader(sw, impl.child_path("Software"));
    r.configuration.library_versions[reader.text("name")] = reader.text("version");
  }
  r.configuration.hardware = impl.opt_text("hardware");
  r.configuration.random_seed = impl.opt_integer("random_seed");

  const auto dataset = run.object("Data").object("Dataset");
  dataset.only({"description", "selection_criteria", "Feature", "DataCharacteristic"});
  r.data_used.dataset_description = dataset.text("description");
  r.data_used.selection_criteria = dataset.opt_text("selection_criteria");
  for (const auto& f : dataset.at("Feature")) {
    r.data_used.feature_names.push_back(detail::Reader(f, dataset.child_path("Feature")).text("name"));
  }
  if (dataset.has("DataCharacteristic")) {
    for (const auto& c : dataset.at("DataCharacteristic")) {
      const detail::Reader reader(c, dataset.child_path("DataCharacteristic"));
      const auto name = reader.text("name");
      if (name == "record_count") r.data_used.record_count = reader.integer("value");
      else if (name == "class_count") r.data_used.class_count = reader.integer("value");
      else reader.fail("unknown data characteristic '" + name + "'");
    }
  }

  const auto spec = run.object("EvaluationSpecification");
  spec.only({"EvaluationProcedure", "EvaluationMeasure"});
  if (spec.has("EvaluationProcedure")) {
    r.test_params.evaluation_procedure = decode_procedure(spec.object("EvaluationProcedure"));
  }
  r.test_params.metric_names = spec.text_list("EvaluationMeasure");

  for (const auto& e : run.at("ModelEvaluation")) {
    const detail::Reader reader(e, run.child_path("ModelEvaluation"));
    reader.only({"EvaluationMeasure", "dataset", "value", "values"});
    auto name = reader.text("EvaluationMeasure");
    if (const auto split = reader.opt_text("dataset")) name = *split + "_" + name;
    const auto& raw = reader.has("values") ? reader.at("values") : reader.at("value");
    r.results.metrics[name] = decode_metric(raw, reader.path());
  }
  if (run.has("Model")) r.results.model_ref = run.object("Model").text("locator");
  return r;
}

}  // namespace rastro
