// SPDX-License-Identifier: Apache-2.0
#pragma once

// Domain types for the trail: action definitions, training records and
// lessons learned, plus the CRISP-DM task taxonomy used to tag them.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "rastro/error.hpp"
#include "rastro/time.hpp"

namespace rastro {

// ---------------------------------------------------------------------------
// Task taxonomy

enum class Phase {
  business_understanding,
  data_understanding,
  data_preparation,
  modeling,
  evaluation,
  deployment,
  other,
};

inline constexpr std::array<std::pair<Phase, std::string_view>, 7> kPhaseNames{{
    {Phase::business_understanding, "business-understanding"},
    {Phase::data_understanding, "data-understanding"},
    {Phase::data_preparation, "data-preparation"},
    {Phase::modeling, "modeling"},
    {Phase::evaluation, "evaluation"},
    {Phase::deployment, "deployment"},
    {Phase::other, "other"},
}};

inline std::string_view to_string(Phase p) {
  for (const auto& [phase, name] : kPhaseNames) {
    if (phase == p) return name;
  }
  return "other";
}

inline std::optional<Phase> parse_phase(std::string_view s) {
  for (const auto& [phase, name] : kPhaseNames) {
    if (name == s) return phase;
  }
  return std::nullopt;
}

struct TaskRef {
  Phase phase = Phase::other;
  std::string task;

  friend bool operator==(const TaskRef&, const TaskRef&) = default;
  friend auto operator<=>(const TaskRef&, const TaskRef&) = default;
};

/// Trims, ASCII case-folds and collapses internal whitespace runs to one
/// space. Bytes outside ASCII pass through untouched.
inline std::string normalize_task_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (const char c : raw) {
    const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (ws) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

/// Maps normalized task names onto CRISP-DM phases. Open for extension so a
/// project can register its own vocabulary.
class Taxonomy {
 public:
  Taxonomy() = default;

  /// CRISP-DM phase names, the generic CRISP-DM tasks, and the specialized
  /// task names used by the Cladop trail.
  static const Taxonomy& builtin() {
    static const Taxonomy table = [] {
      Taxonomy t;
      t.add("business understanding", Phase::business_understanding);
      t.add("determine business objectives", Phase::business_understanding);
      t.add("assess situation", Phase::business_understanding);
      t.add("determine data mining goals", Phase::business_understanding);
      t.add("produce project plan", Phase::business_understanding);

      t.add("data understanding", Phase::data_understanding);
      t.add("collect initial data", Phase::data_understanding);
      t.add("describe data", Phase::data_understanding);
      t.add("explore data", Phase::data_understanding);
      t.add("verify data quality", Phase::data_understanding);

      t.add("data preparation", Phase::data_preparation);
      t.add("select data", Phase::data_preparation);
      t.add("clean data", Phase::data_preparation);
      t.add("construct data", Phase::data_preparation);
      t.add("integrate data", Phase::data_preparation);
      t.add("format data", Phase::data_preparation);

      t.add("modeling", Phase::modeling);
      t.add("modelling", Phase::modeling);
      t.add("select modeling technique", Phase::modeling);
      t.add("select technique", Phase::modeling);
      t.add("generate test design", Phase::modeling);
      t.add("project of tests", Phase::modeling);
      t.add("build model", Phase::modeling);
      t.add("construct model", Phase::modeling);
      t.add("assess model", Phase::modeling);

      t.add("evaluation", Phase::evaluation);
      t.add("evaluate results", Phase::evaluation);
      t.add("review process", Phase::evaluation);
      t.add("determine next steps", Phase::evaluation);

      t.add("deployment", Phase::deployment);
      t.add("plan deployment", Phase::deployment);
      t.add("plan monitoring and maintenance", Phase::deployment);
      t.add("produce final report", Phase::deployment);
      t.add("review project", Phase::deployment);
      return t;
    }();
    return table;
  }

  void add(std::string_view name, Phase phase) {
    auto key = normalize_task_text(name);
    if (key.empty()) throw InvalidArgument("taxonomy entry name is empty");
    entries_[std::move(key)] = phase;
  }

  std::optional<Phase> lookup(const std::string& normalized) const {
    const auto it = entries_.find(normalized);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  const std::map<std::string, Phase>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, Phase> entries_;
};

inline TaskRef canonical_task(std::string_view raw, const Taxonomy& taxonomy = Taxonomy::builtin()) {
  auto name = normalize_task_text(raw);
  if (name.empty()) {
    throw ValidationError(ValidationReport{{"task", "task name is empty after trimming"}});
  }
  const auto phase = taxonomy.lookup(name).value_or(Phase::other);
  return TaskRef{phase, std::move(name)};
}

// ---------------------------------------------------------------------------
// Action definitions and lessons

enum class ActionStatus { defined, executed, abandoned };
enum class LessonOrigin { human, synthesized };

inline std::string_view to_string(ActionStatus s) {
  switch (s) {
    case ActionStatus::defined: return "defined";
    case ActionStatus::executed: return "executed";
    case ActionStatus::abandoned: return "abandoned";
  }
  return "defined";
}

inline std::optional<ActionStatus> parse_action_status(std::string_view s) {
  if (s == "defined") return ActionStatus::defined;
  if (s == "executed") return ActionStatus::executed;
  if (s == "abandoned") return ActionStatus::abandoned;
  return std::nullopt;
}

inline std::string_view to_string(LessonOrigin o) {
  return o == LessonOrigin::human ? "human" : "synthesized";
}

inline std::optional<LessonOrigin> parse_lesson_origin(std::string_view s) {
  if (s == "human") return LessonOrigin::human;
  if (s == "synthesized") return LessonOrigin::synthesized;
  return std::nullopt;
}

/// A declared project step, executed or not. `code` and `registered_at` are
/// owned by the store; whatever the caller puts in `code` is overwritten.
struct ActionDefinition {
  std::int64_t code = 0;
  std::optional<Timestamp> registered_at;
  std::string description;
  std::optional<TaskRef> task;
  std::optional<std::string> resources;
  ActionStatus status = ActionStatus::defined;

  friend bool operator==(const ActionDefinition&, const ActionDefinition&) = default;
};

struct Lesson {
  std::int64_t code = 0;
  std::optional<Timestamp> registered_at;
  std::string description;
  std::optional<TaskRef> task;
  LessonOrigin origin = LessonOrigin::human;
  std::vector<std::int64_t> related_training_codes;

  friend bool operator==(const Lesson&, const Lesson&) = default;
};

// ---------------------------------------------------------------------------
// Training records

enum class RunStatus { succeeded, failed, interrupted };

inline std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::succeeded: return "succeeded";
    case RunStatus::failed: return "failed";
    case RunStatus::interrupted: return "interrupted";
  }
  return "succeeded";
}

inline std::optional<RunStatus> parse_run_status(std::string_view s) {
  if (s == "succeeded") return RunStatus::succeeded;
  if (s == "failed") return RunStatus::failed;
  if (s == "interrupted") return RunStatus::interrupted;
  return std::nullopt;
}

/// Hyperparameter value. Serialized with a type tag so each alternative
/// round-trips exactly.
using HyperValue = std::variant<std::string, std::int64_t, double, bool>;

inline std::string_view type_tag(const HyperValue& v) {
  static constexpr std::array<std::string_view, 4> tags{"text", "int", "real", "bool"};
  return tags[v.index()];
}

/// Either one scalar or a per-fold sample list.
struct MetricResult {
  std::variant<double, std::vector<double>> value{0.0};

  static MetricResult scalar(double x) { return MetricResult{x}; }
  static MetricResult samples(std::vector<double> xs) { return MetricResult{std::move(xs)}; }

  bool is_samples() const noexcept { return value.index() == 1; }

  std::vector<double> flattened() const {
    if (const auto* s = std::get_if<double>(&value)) return {*s};
    return std::get<std::vector<double>>(value);
  }

  /// Scalar value, or the sample mean.
  double center() const {
    if (const auto* s = std::get_if<double>(&value)) return *s;
    const auto& xs = std::get<std::vector<double>>(value);
    if (xs.empty()) return 0.0;
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
  }

  friend bool operator==(const MetricResult&, const MetricResult&) = default;
};

struct Holdout {
  double fraction = 0.0;
  bool stratified = false;
  friend bool operator==(const Holdout&, const Holdout&) = default;
};

struct CrossValidation {
  std::int64_t partitions = 0;
  std::int64_t repetitions = 1;
  friend bool operator==(const CrossValidation&, const CrossValidation&) = default;
};

using EvaluationProcedure = std::variant<Holdout, CrossValidation>;

struct Context {
  std::int64_t code = 0;
  std::optional<Timestamp> registered_at;
  std::int64_t epochs = 0;
  double duration_seconds = 0.0;
  RunStatus status = RunStatus::succeeded;
  std::optional<std::string> error_message;
  friend bool operator==(const Context&, const Context&) = default;
};

struct Configuration {
  std::string program_id;
  std::map<std::string, std::string> library_versions;
  std::optional<std::string> hardware;
  std::optional<std::int64_t> random_seed;
  friend bool operator==(const Configuration&, const Configuration&) = default;
};

struct DataUsed {
  std::string dataset_description;
  std::optional<std::string> selection_criteria;
  std::vector<std::string> feature_names;
  std::optional<std::int64_t> record_count;
  std::optional<std::int64_t> class_count;
  friend bool operator==(const DataUsed&, const DataUsed&) = default;
};

struct TrainingParams {
  std::string algorithm;
  std::map<std::string, HyperValue> hyperparameters;
  friend bool operator==(const TrainingParams&, const TrainingParams&) = default;
};

struct TestParams {
  std::optional<EvaluationProcedure> evaluation_procedure;
  std::vector<std::string> metric_names;
  friend bool operator==(const TestParams&, const TestParams&) = default;
};

struct Results {
  std::map<std::string, MetricResult> metrics;
  std::optional<std::string> model_ref;
  friend bool operator==(const Results&, const Results&) = default;
};

/// One model-building run, grouped by the six attribute categories.
struct TrainingRecord {
  Context context;
  Configuration configuration;
  DataUsed data_used;
  TrainingParams training_params;
  TestParams test_params;
  Results results;

  friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\n\r\f\v") == std::string_view::npos;
}

}  // namespace detail

inline ValidationReport validate_action(const ActionDefinition& a) {
  ValidationReport out;
  if (detail::blank(a.description)) out.push_back({"description", "must not be empty"});
  if (a.task && detail::blank(a.task->task)) out.push_back({"task", "task name must not be empty"});
  return out;
}

/// Checks the lesson's own fields. Whether related training codes exist is
/// a store-level check.
inline ValidationReport validate_lesson(const Lesson& l) {
  ValidationReport out;
  if (detail::blank(l.description)) out.push_back({"description", "must not be empty"});
  if (l.task && detail::blank(l.task->task)) out.push_back({"task", "task name must not be empty"});
  for (std::size_t i = 0; i < l.related_training_codes.size(); ++i) {
    if (l.related_training_codes[i] <= 0) {
      out.push_back({fmt::format("related_training_codes[{}]", i), "training codes are positive"});
    }
  }
  return out;
}

/// Returns every violated invariant of the record. An empty report means
/// the record is valid.
inline ValidationReport validate_training(const TrainingRecord& r) {
  ValidationReport out;
  const auto& ctx = r.context;
  if (ctx.code < 0) out.push_back({"context.code", "must not be negative"});
  if (ctx.epochs < 0) out.push_back({"context.epochs", "must not be negative"});
  if (!std::isfinite(ctx.duration_seconds) || ctx.duration_seconds < 0.0) {
    out.push_back({"context.duration_seconds", "must be a finite non-negative number"});
  }
  if (ctx.status != RunStatus::succeeded && (!ctx.error_message || detail::blank(*ctx.error_message))) {
    out.push_back({"context.error_message",
                   fmt::format("required when status is {}", to_string(ctx.status))});
  }

  if (r.data_used.record_count && *r.data_used.record_count < 0) {
    out.push_back({"data_used.record_count", "must not be negative"});
  }
  if (r.data_used.class_count && *r.data_used.class_count < 0) {
    out.push_back({"data_used.class_count", "must not be negative"});
  }

  for (const auto& [name, value] : r.training_params.hyperparameters) {
    if (name.empty()) out.push_back({"training_params.hyperparameters", "empty hyperparameter name"});
    if (const auto* d = std::get_if<double>(&value); d && !std::isfinite(*d)) {
      out.push_back({"training_params.hyperparameters." + name, "real value must be finite"});
    }
  }

  std::optional<std::int64_t> expected_samples;
  if (r.test_params.evaluation_procedure) {
    if (const auto* h = std::get_if<Holdout>(&*r.test_params.evaluation_procedure)) {
      if (!std::isfinite(h->fraction) || h->fraction < 0.0 || h->fraction >= 1.0) {
        out.push_back({"test_params.evaluation_procedure.fraction", "must lie in [0, 1)"});
      }
    } else {
      const auto& cv = std::get<CrossValidation>(*r.test_params.evaluation_procedure);
      if (cv.partitions < 2) {
        out.push_back({"test_params.evaluation_procedure.partitions", "must be at least 2"});
      }
      if (cv.repetitions < 1) {
        out.push_back({"test_params.evaluation_procedure.repetitions", "must be at least 1"});
      }
      if (cv.partitions >= 2 && cv.repetitions >= 1) expected_samples = cv.partitions * cv.repetitions;
    }
  }

  for (const auto& [name, metric] : r.results.metrics) {
    const auto path = "results.metrics." + name;
    if (name.empty()) out.push_back({"results.metrics", "empty metric name"});
    if (const auto* s = std::get_if<double>(&metric.value)) {
      if (!std::isfinite(*s)) out.push_back({path, "value must be finite"});
      continue;
    }
    const auto& xs = std::get<std::vector<double>>(metric.value);
    if (xs.empty()) {
      out.push_back({path, "sample list must not be empty"});
      continue;
    }
    for (double x : xs) {
      if (!std::isfinite(x)) {
        out.push_back({path, "sample values must be finite"});
        break;
      }
    }
    if (expected_samples && static_cast<std::int64_t>(xs.size()) != *expected_samples) {
      out.push_back({path, fmt::format("cross-validation expects {} samples, got {}", *expected_samples,
                                       xs.size())});
    }
  }
  return out;
}

}  // namespace rastro
