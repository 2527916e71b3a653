// SPDX-License-Identifier: Apache-2.0
#pragma once

// Lesson candidates mined from the training trail, redundancy warnings for
// new drafts, and performance monitoring against a deployed baseline.
//
// Every detector is a pure function of its input sequence. Candidates are
// proposals only; turning one into a Lesson is an explicit append.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "rastro/core.hpp"
#include "rastro/query.hpp"
#include "rastro/stats.hpp"
#include "rastro/store.hpp"

namespace rastro {

enum class CandidateKind { equal_metrics, improvement, best_setting, redundancy, drift };

inline std::string_view to_string(CandidateKind k) {
  switch (k) {
    case CandidateKind::equal_metrics: return "equal-metrics";
    case CandidateKind::improvement: return "improvement";
    case CandidateKind::best_setting: return "best-setting";
    case CandidateKind::redundancy: return "redundancy";
    case CandidateKind::drift: return "drift";
  }
  return "equal-metrics";
}

inline std::optional<CandidateKind> parse_candidate_kind(std::string_view s) {
  for (auto k : {CandidateKind::equal_metrics, CandidateKind::improvement, CandidateKind::best_setting,
                 CandidateKind::redundancy, CandidateKind::drift}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct LessonCandidate {
  CandidateKind kind = CandidateKind::equal_metrics;
  std::string description;
  /// Codes of the records backing the candidate, ascending.
  std::vector<std::int64_t> evidence;
  std::string confidence;
  /// Names the candidate is about (metric names, setting labels, ...).
  std::vector<std::string> subjects;
  /// Headline numbers: the delta for improvements, margins for best-setting.
  std::vector<double> figures;

  /// The lesson a user would register after confirming the candidate.
  Lesson to_lesson() const {
    Lesson l;
    l.description = description;
    l.origin = LessonOrigin::synthesized;
    if (kind != CandidateKind::redundancy) l.related_training_codes = evidence;
    return l;
  }
};

struct SynthesisDefaults {
  static constexpr double equal_tolerance = 1e-9;
  static constexpr double min_delta_points = 0.5;
  static constexpr double jaccard_threshold = 0.5;
  static constexpr double tie_tolerance = 1e-9;
};

// ---------------------------------------------------------------------------
// Equal metrics

namespace detail {

inline bool values_agree(const MetricResult& a, const MetricResult& b, double tolerance) {
  const auto xs = a.flattened();
  const auto ys = b.flattened();
  if (xs.size() != ys.size()) return false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(std::fabs(xs[i] - ys[i]) <= tolerance)) return false;
  }
  return true;
}

}  // namespace detail

/// For every pair of metric names recorded together in at least two
/// trainings, proposes a lesson when their values agree within `tolerance`
/// in every such training.
inline std::vector<LessonCandidate> detect_equal_metrics(std::span<const TrainingRecord> records,
                                                         double tolerance = SynthesisDefaults::equal_tolerance) {
  std::set<std::string> names;
  for (const auto& r : records) {
    for (const auto& [name, _] : r.results.metrics) names.insert(name);
  }
  const std::vector<std::string> ordered(names.begin(), names.end());

  std::vector<LessonCandidate> out;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    for (std::size_t j = i + 1; j < ordered.size(); ++j) {
      const auto& a = ordered[i];
      const auto& b = ordered[j];
      std::vector<std::int64_t> codes;
      bool agree = true;
      for (const auto& r : records) {
        const auto ia = r.results.metrics.find(a);
        const auto ib = r.results.metrics.find(b);
        if (ia == r.results.metrics.end() || ib == r.results.metrics.end()) continue;
        codes.push_back(r.context.code);
        if (!detail::values_agree(ia->second, ib->second, tolerance)) {
          agree = false;
          break;
        }
      }
      if (!agree || codes.size() < 2) continue;
      std::sort(codes.begin(), codes.end());
      LessonCandidate c;
      c.kind = CandidateKind::equal_metrics;
      c.description = fmt::format("The metrics {} and {} are equivalent: they agreed in all {} trainings "
                                  "that recorded both.",
                                  a, b, codes.size());
      c.confidence = fmt::format("{} of {} co-occurring trainings agree within {:g}", codes.size(), codes.size(),
                                 tolerance);
      c.evidence = std::move(codes);
      c.subjects = {a, b};
      out.push_back(std::move(c));
    }
  }
  return out;
}

inline std::vector<LessonCandidate> detect_equal_metrics(const std::vector<TrainingRecord>& records,
                                                         double tolerance = SynthesisDefaults::equal_tolerance) {
  return detect_equal_metrics(std::span<const TrainingRecord>(records), tolerance);
}

// ---------------------------------------------------------------------------
// Attribute improvement

namespace detail {

inline void flatten_leaves(const Json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten_leaves(v, prefix.empty() ? k : prefix + "." + k, out);
    return;
  }
  out[prefix] = j.dump();
}

/// Declared configuration and parameters, minus the varied key and the
/// random seed (replicates with different seeds belong together).
inline std::string setting_signature(const Json& record_view, const FieldSelector& varied) {
  std::map<std::string, std::string> leaves;
  for (const char* category : {"configuration", "data_used", "training_params", "test_params"}) {
    if (record_view.contains(category)) flatten_leaves(record_view[category], category, leaves);
  }
  leaves.erase("configuration.random_seed");
  const auto& key = varied.text();
  for (auto it = leaves.begin(); it != leaves.end();) {
    if (it->first == key || it->first.starts_with(key + ".")) it = leaves.erase(it);
    else ++it;
  }
  std::string sig;
  for (const auto& [k, v] : leaves) sig += k + "=" + v + "\n";
  return sig;
}

struct SettingGroup {
  std::vector<double> samples;
  std::vector<std::int64_t> codes;
};

}  // namespace detail

/// Pairs groups of trainings that share every declared setting except
/// `varied_key` and reports the change in mean metric, in percentage points,
/// from the lower-sorting value to the higher-sorting one. Deltas smaller
/// than `min_delta_points` in magnitude are suppressed.
inline std::vector<LessonCandidate> attribute_improvement(std::span<const TrainingRecord> records,
                                                          const FieldSelector& varied_key, const FieldSelector& metric,
                                                          double min_delta_points = SynthesisDefaults::min_delta_points) {
  std::map<std::string, std::map<std::string, detail::SettingGroup>> by_signature;
  for (const auto& r : records) {
    const auto v = view(r);
    const auto xs = metric_samples(metric.resolve(v));
    if (!xs) continue;
    auto& group = by_signature[detail::setting_signature(v, varied_key)][group_label(varied_key.resolve(v))];
    group.samples.insert(group.samples.end(), xs->begin(), xs->end());
    group.codes.push_back(r.context.code);
  }

  std::vector<LessonCandidate> out;
  for (const auto& [signature, groups] : by_signature) {
    for (auto a = groups.begin(); a != groups.end(); ++a) {
      for (auto b = std::next(a); b != groups.end(); ++b) {
        const auto from = summarize(a->second.samples);
        const auto to = summarize(b->second.samples);
        const double delta = (to.mean - from.mean) * 100.0;
        if (std::fabs(delta) < min_delta_points) continue;
        LessonCandidate c;
        c.kind = CandidateKind::improvement;
        c.description = fmt::format(
            "{} in {} of {:+.1f} points after changing {} from {} to {} (mean {:.4f} -> {:.4f}).",
            delta > 0 ? "An improvement" : "A decline", metric.text(), delta, varied_key.text(), a->first,
            b->first, from.mean, to.mean);
        c.confidence = fmt::format("{} vs {} trainings, {} vs {} samples, all other settings equal",
                                   a->second.codes.size(), b->second.codes.size(), from.n, to.n);
        c.evidence = a->second.codes;
        c.evidence.insert(c.evidence.end(), b->second.codes.begin(), b->second.codes.end());
        std::sort(c.evidence.begin(), c.evidence.end());
        c.subjects = {varied_key.text(), a->first, b->first, metric.text()};
        c.figures = {delta};
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

inline std::vector<LessonCandidate> attribute_improvement(const std::vector<TrainingRecord>& records,
                                                          const FieldSelector& varied_key, const FieldSelector& metric,
                                                          double min_delta_points = SynthesisDefaults::min_delta_points) {
  return attribute_improvement(std::span<const TrainingRecord>(records), varied_key, metric, min_delta_points);
}

// ---------------------------------------------------------------------------
// Best setting

/// Names the value of `param` with the highest mean metric and its margin,
/// in points, over each runner-up. Reports a tie, without a winner, when the
/// top two means coincide. Needs at least two distinct values.
inline std::optional<LessonCandidate> best_setting(std::span<const TrainingRecord> records,
                                                   const FieldSelector& param, const FieldSelector& metric) {
  std::map<std::string, detail::SettingGroup> groups;
  for (const auto& r : records) {
    const auto v = view(r);
    const auto key = param.resolve(v);
    const auto xs = metric_samples(metric.resolve(v));
    if (!key || !xs) continue;
    auto& g = groups[group_label(key)];
    g.samples.insert(g.samples.end(), xs->begin(), xs->end());
    g.codes.push_back(r.context.code);
  }
  if (groups.size() < 2) return std::nullopt;

  struct Ranked {
    std::string label;
    SummaryStats stats;
  };
  std::vector<Ranked> ranked;
  std::vector<std::int64_t> evidence;
  for (const auto& [label, g] : groups) {
    ranked.push_back({label, summarize(g.samples)});
    evidence.insert(evidence.end(), g.codes.begin(), g.codes.end());
  }
  std::sort(evidence.begin(), evidence.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.stats.mean > b.stats.mean; });

  LessonCandidate c;
  c.kind = CandidateKind::best_setting;
  c.evidence = std::move(evidence);
  std::string sizes;
  for (const auto& g : ranked) {
    if (!sizes.empty()) sizes += ", ";
    sizes += fmt::format("{} n={}", g.label, g.stats.n);
  }
  c.confidence = "samples per value: " + sizes;

  const auto& best = ranked[0];
  if (best.stats.mean - ranked[1].stats.mean <= SynthesisDefaults::tie_tolerance) {
    std::vector<std::string> tied;
    for (const auto& g : ranked) {
      if (best.stats.mean - g.stats.mean <= SynthesisDefaults::tie_tolerance) tied.push_back(g.label);
    }
    c.description = fmt::format("No single best {} for {}: {} tie at mean {:.4f}.", param.text(), metric.text(),
                                fmt::join(tied, ", "), best.stats.mean);
    c.subjects = std::move(tied);
    return c;
  }

  std::string margins;
  c.subjects.push_back(best.label);
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    const double margin = (best.stats.mean - ranked[i].stats.mean) * 100.0;
    c.figures.push_back(margin);
    c.subjects.push_back(ranked[i].label);
    if (!margins.empty()) margins += ", ";
    margins += fmt::format("{} by {:.1f} points", ranked[i].label, margin);
  }
  c.description = fmt::format("{} = {} was the best setting so far for {} (mean {:.4f}). Better than {}.",
                              param.text(), best.label, metric.text(), best.stats.mean, margins);
  return c;
}

inline std::optional<LessonCandidate> best_setting(const std::vector<TrainingRecord>& records,
                                                   const FieldSelector& param, const FieldSelector& metric) {
  return best_setting(std::span<const TrainingRecord>(records), param, metric);
}

// ---------------------------------------------------------------------------
// Redundancy warning

/// Lowercased, punctuation-free token set. Non-ASCII bytes are kept as they
/// are; no stemming.
inline std::set<std::string> token_set(std::string_view text) {
  std::set<std::string> tokens;
  std::string cur;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && (std::isspace(c) || std::ispunct(c))) {
      if (!cur.empty()) tokens.insert(std::exchange(cur, {}));
      continue;
    }
    cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  if (!cur.empty()) tokens.insert(std::move(cur));
  return tokens;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : a) shared += b.count(t);
  return static_cast<double>(shared) / static_cast<double>(a.size() + b.size() - shared);
}

struct RedundancyMatch {
  RecordKind kind = RecordKind::lesson;
  std::int64_t code = 0;
  std::string description;
  double similarity = 0.0;
};

/// Existing lessons and actions whose description is at least `threshold`
/// Jaccard-similar to the draft, most similar first (then lessons before
/// actions, then by code).
inline std::vector<RedundancyMatch> redundancy_warning(std::span<const ActionDefinition> actions,
                                                       std::span<const Lesson> lessons, std::string_view draft,
                                                       double threshold = SynthesisDefaults::jaccard_threshold) {
  const auto draft_tokens = token_set(draft);
  std::vector<RedundancyMatch> out;
  if (draft_tokens.empty()) return out;
  auto consider = [&](RecordKind kind, std::int64_t code, const std::string& text) {
    const double s = jaccard(draft_tokens, token_set(text));
    if (s > 0.0 && s >= threshold) out.push_back({kind, code, text, s});
  };
  for (const auto& l : lessons) consider(RecordKind::lesson, l.code, l.description);
  for (const auto& a : actions) consider(RecordKind::action, a.code, a.description);
  std::stable_sort(out.begin(), out.end(), [](const RedundancyMatch& a, const RedundancyMatch& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.kind != b.kind) return a.kind == RecordKind::lesson;
    return a.code < b.code;
  });
  return out;
}

inline std::vector<RedundancyMatch> redundancy_warning(const TrailStore& store, std::string_view draft,
                                                       std::optional<double> threshold = std::nullopt) {
  const auto actions = store.actions();
  const auto lessons = store.lessons();
  return redundancy_warning(actions, lessons, draft, threshold.value_or(store.meta().config.jaccard_threshold));
}

inline LessonCandidate to_candidate(const RedundancyMatch& m) {
  LessonCandidate c;
  c.kind = CandidateKind::redundancy;
  c.description = fmt::format("The draft repeats {} {}: \"{}\"", to_string(m.kind), m.code, m.description);
  c.confidence = fmt::format("jaccard similarity {:.2f}", m.similarity);
  c.evidence = {m.code};
  c.subjects = {std::string(to_string(m.kind))};
  c.figures = {m.similarity};
  return c;
}

// ---------------------------------------------------------------------------
// Performance monitoring

struct EvaluationPoint {
  Timestamp at;
  double accuracy = 0.0;
  friend bool operator==(const EvaluationPoint&, const EvaluationPoint&) = default;
};

enum class Health { healthy, degraded };

inline std::string_view to_string(Health h) { return h == Health::healthy ? "healthy" : "degraded"; }

struct MonitorReport {
  Health status = Health::healthy;
  double floor = 0.0;
  std::vector<EvaluationPoint> flagged;
  std::string message;
};

/// Degraded iff some evaluation falls strictly below baseline - drop_threshold.
inline MonitorReport monitor_performance(std::span<const EvaluationPoint> series, double baseline,
                                         double drop_threshold) {
  if (series.empty()) throw InvalidArgument("monitoring needs at least one evaluation");
  if (!std::isfinite(baseline) || baseline < 0.0 || baseline > 1.0) {
    throw InvalidArgument("baseline must lie in [0, 1]");
  }
  if (!std::isfinite(drop_threshold) || drop_threshold < 0.0) {
    throw InvalidArgument("drop threshold must be a finite non-negative number");
  }
  MonitorReport report;
  report.floor = baseline - drop_threshold;
  for (const auto& p : series) {
    if (!std::isfinite(p.accuracy) || p.accuracy < 0.0 || p.accuracy > 1.0) {
      throw InvalidArgument(fmt::format("accuracy {} at {} is outside [0, 1]", p.accuracy, p.at.iso8601()));
    }
    if (p.accuracy < report.floor) report.flagged.push_back(p);
  }
  if (report.flagged.empty()) {
    report.message = fmt::format("healthy: all {} evaluations at or above {:.4f} (baseline {:.4f} - {:.4f})",
                                 series.size(), report.floor, baseline, drop_threshold);
  } else {
    report.status = Health::degraded;
    report.message = fmt::format(
        "degraded: {} of {} evaluations below {:.4f} (baseline {:.4f} - {:.4f}); "
        "regenerating the model on recent data is recommended",
        report.flagged.size(), series.size(), report.floor, baseline, drop_threshold);
  }
  return report;
}

inline MonitorReport monitor_performance(const std::vector<EvaluationPoint>& series, double baseline,
                                         double drop_threshold) {
  return monitor_performance(std::span<const EvaluationPoint>(series), baseline, drop_threshold);
}

inline std::optional<LessonCandidate> drift_candidate(const MonitorReport& report) {
  if (report.status == Health::healthy) return std::nullopt;
  LessonCandidate c;
  c.kind = CandidateKind::drift;
  c.description = "Model performance dropped below the monitoring floor: " + report.message;
  c.confidence = fmt::format("{} flagged evaluations", report.flagged.size());
  for (const auto& p : report.flagged) c.figures.push_back(p.accuracy);
  return c;
}

/// Reads an evaluation series: one `timestamp,accuracy` pair per line
/// (a space or tab also separates). Blank lines and `#` comments are
/// skipped.
inline std::vector<EvaluationPoint> parse_series(std::istream& in) {
  std::vector<EvaluationPoint> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto sep = line.find_first_of(", \t", first);
    if (sep == std::string::npos) throw InvalidArgument(fmt::format("series line {}: expected 'timestamp,accuracy'", line_no));
    const auto ts = parse_timestamp(std::string_view(line).substr(first, sep - first));
    const auto value_start = line.find_first_not_of(", \t", sep);
    const auto value = value_start == std::string::npos
                           ? std::nullopt
                           : detail::parse_number(std::string_view(line).substr(value_start));
    if (!ts || !value) throw InvalidArgument(fmt::format("series line {}: expected 'timestamp,accuracy'", line_no));
    out.push_back({*ts, *value});
  }
  return out;
}

}  // namespace rastro
