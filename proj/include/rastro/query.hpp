// SPDX-License-Identifier: Apache-2.0
#pragma once

// Field selection, predicates and aggregation over trail records.
//
// Selectors are dotted paths into a flat "view" of a record. For trainings
// the view follows the six categories (context.epochs,
// training_params.algorithm, training_params.hyperparameters.batch_size,
// results.accuracy, ...). Hyperparameters appear untagged and each metric is
// reachable both as results.<name> and results.metrics.<name>.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rastro/core.hpp"
#include "rastro/serialize.hpp"
#include "rastro/stats.hpp"
#include "rastro/store.hpp"

namespace rastro {

// ---------------------------------------------------------------------------
// Record views

inline Json view(const ActionDefinition& a) {
  Json j;
  j["code"] = a.code;
  if (a.registered_at) j["registered_at"] = a.registered_at->iso8601();
  j["description"] = a.description;
  if (a.task) {
    j["task"] = a.task->task;
    j["phase"] = std::string(to_string(a.task->phase));
  }
  if (a.resources) j["resources"] = *a.resources;
  j["status"] = std::string(to_string(a.status));
  return j;
}

inline Json view(const Lesson& l) {
  Json j;
  j["code"] = l.code;
  if (l.registered_at) j["registered_at"] = l.registered_at->iso8601();
  j["description"] = l.description;
  if (l.task) {
    j["task"] = l.task->task;
    j["phase"] = std::string(to_string(l.task->phase));
  }
  j["origin"] = std::string(to_string(l.origin));
  j["related_training_codes"] = l.related_training_codes;
  return j;
}

inline Json view(const TrainingRecord& r) {
  Json stored = to_json([&] {
    auto copy = r;
    if (!copy.context.registered_at) copy.context.registered_at = Timestamp{};
    return copy;
  }());
  Json j;
  j["code"] = r.context.code;
  if (r.context.registered_at) j["registered_at"] = r.context.registered_at->iso8601();

  Json ctx;
  ctx["code"] = r.context.code;
  if (r.context.registered_at) ctx["registered_at"] = r.context.registered_at->iso8601();
  for (auto& [k, v] : stored["context"].items()) ctx[k] = v;
  j["context"] = std::move(ctx);
  j["configuration"] = stored["configuration"];
  j["data_used"] = stored["data_used"];

  Json tp;
  tp["algorithm"] = r.training_params.algorithm;
  tp["hyperparameters"] = Json::object();
  for (const auto& [k, v] : r.training_params.hyperparameters) {
    std::visit([&, &key = k](const auto& x) { tp["hyperparameters"][key] = x; }, v);
  }
  j["training_params"] = std::move(tp);
  j["test_params"] = stored["test_params"];

  Json res;
  for (const auto& [k, v] : stored["results"]["metrics"].items()) res[k] = v;
  res["metrics"] = stored["results"]["metrics"];
  if (r.results.model_ref) res["model_ref"] = *r.results.model_ref;
  j["results"] = std::move(res);
  return j;
}

template <typename T>
concept Viewable = requires(const T& r) {
  { view(r) } -> std::same_as<Json>;
  { code_of(r) } -> std::convertible_to<std::int64_t>;
};

// ---------------------------------------------------------------------------
// Selectors

/// A dotted path into a record view. Paths that do not resolve yield
/// "absent", never an error.
class FieldSelector {
 public:
  FieldSelector() = default;

  static FieldSelector parse(std::string_view text) {
    FieldSelector s;
    s.text_ = std::string(text);
    std::size_t start = 0;
    while (true) {
      const auto dot = text.find('.', start);
      const auto seg = text.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
      if (seg.empty()) throw QuerySyntaxError("empty path segment in '" + std::string(text) + "'", start);
      for (std::size_t i = 0; i < seg.size(); ++i) {
        if (!is_path_char(seg[i])) {
          throw QuerySyntaxError("invalid character in path '" + std::string(text) + "'", start + i);
        }
      }
      s.segments_.emplace_back(seg);
      if (dot == std::string_view::npos) break;
      start = dot + 1;
    }
    return s;
  }

  static constexpr bool is_path_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  }

  const std::string& text() const noexcept { return text_; }
  const std::vector<std::string>& segments() const noexcept { return segments_; }

  std::optional<Json> resolve(const Json& v) const {
    const Json* cur = &v;
    for (const auto& seg : segments_) {
      if (!cur->is_object()) return std::nullopt;
      const auto it = cur->find(seg);
      if (it == cur->end()) return std::nullopt;
      cur = &*it;
    }
    if (cur->is_null()) return std::nullopt;
    return std::optional<Json>(std::in_place, *cur);
  }

  template <Viewable Record>
  std::optional<Json> resolve(const Record& r) const {
    return resolve(view(r));
  }

 private:
  std::string text_;
  std::vector<std::string> segments_;
};

// ---------------------------------------------------------------------------
// Predicates

enum class Op { eq, ne, lt, gt, contains, present, absent };

inline std::string_view to_string(Op op) {
  switch (op) {
    case Op::eq: return "=";
    case Op::ne: return "!=";
    case Op::lt: return "<";
    case Op::gt: return ">";
    case Op::contains: return "~";
    case Op::present: return "?";
    case Op::absent: return "!?";
  }
  return "=";
}

namespace detail {

inline std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  const std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || !std::isfinite(v)) return std::nullopt;
  if (std::isspace(static_cast<unsigned char>(tmp.front()))) return std::nullopt;
  return v;
}

/// A number, or the mean of an all-numeric array.
inline std::optional<double> numeric_value(const Json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && !v.empty()) {
    double sum = 0.0;
    for (const auto& e : v) {
      if (!e.is_number()) return std::nullopt;
      sum += e.get<double>();
    }
    return sum / static_cast<double>(v.size());
  }
  return std::nullopt;
}

/// Total order result: -1, 0, 1; nullopt when the two are incomparable.
inline std::optional<int> compare_values(const Json& value, const std::string& operand) {
  auto sign = [](auto a, auto b) { return a < b ? -1 : (b < a ? 1 : 0); };
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    if (const auto ts = parse_timestamp(s)) {
      if (const auto day = parse_date(operand)) return sign(ts->date(), *day);
      if (const auto other = parse_timestamp(operand)) return sign(*ts, *other);
    }
    return std::nullopt;
  }
  if (const auto x = numeric_value(value)) {
    if (const auto y = parse_number(operand)) return sign(*x, *y);
  }
  return std::nullopt;
}

inline bool equals_value(const Json& value, const std::string& operand) {
  if (value.is_string()) {
    if (value.get_ref<const std::string&>() == operand) return true;
    const auto c = compare_values(value, operand);
    return c && *c == 0;
  }
  if (value.is_boolean()) return operand == (value.get<bool>() ? "true" : "false");
  const auto c = compare_values(value, operand);
  return c && *c == 0;
}

inline std::string plain_text(const Json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace detail

/// One `path op value` test.
struct Atom {
  FieldSelector selector;
  Op op = Op::present;
  std::string operand;

  bool matches(const Json& record_view) const {
    const auto value = selector.resolve(record_view);
    if (op == Op::absent) return !value.has_value();
    if (!value) return false;
    switch (op) {
      case Op::present: return true;
      case Op::eq: return detail::equals_value(*value, operand);
      case Op::ne: return !detail::equals_value(*value, operand);
      case Op::lt: {
        const auto c = detail::compare_values(*value, operand);
        return c && *c < 0;
      }
      case Op::gt: {
        const auto c = detail::compare_values(*value, operand);
        return c && *c > 0;
      }
      case Op::contains:
        if (value->is_array()) {
          return std::any_of(value->begin(), value->end(), [&](const Json& e) {
            return detail::plain_text(e).find(operand) != std::string::npos;
          });
        }
        return detail::plain_text(*value).find(operand) != std::string::npos;
      case Op::absent: break;
    }
    return false;
  }
};

/// A conjunction of atoms; the empty predicate matches everything.
struct Predicate {
  std::vector<Atom> atoms;

  bool matches(const Json& record_view) const {
    return std::all_of(atoms.begin(), atoms.end(), [&](const Atom& a) { return a.matches(record_view); });
  }

  template <Viewable Record>
  bool matches(const Record& r) const {
    return matches(view(r));
  }

  Predicate operator&&(const Predicate& other) const {
    Predicate p = *this;
    p.atoms.insert(p.atoms.end(), other.atoms.begin(), other.atoms.end());
    return p;
  }
};

/// Parses `path op value` atoms separated by whitespace. Whitespace around
/// the operator is optional. A value is either a run of non-space bytes or a
/// double-quoted string in which `\"` and `\\` are escapes. `?` and `!?`
/// take no value. Ordering operators need a number, an ISO-8601 date or an
/// ISO-8601 timestamp.
inline Predicate parse_predicate(std::string_view text) {
  Predicate p;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  while (true) {
    skip_ws();
    if (i >= text.size()) break;
    const auto path_start = i;
    while (i < text.size() && (FieldSelector::is_path_char(text[i]) || text[i] == '.')) ++i;
    if (i == path_start) throw QuerySyntaxError("expected a field path", i);
    Atom atom;
    atom.selector = FieldSelector::parse(text.substr(path_start, i - path_start));
    skip_ws();
    const auto rest = text.substr(i);
    if (rest.starts_with("!?")) atom.op = Op::absent, i += 2;
    else if (rest.starts_with("!=")) atom.op = Op::ne, i += 2;
    else if (rest.starts_with("=")) atom.op = Op::eq, i += 1;
    else if (rest.starts_with("<")) atom.op = Op::lt, i += 1;
    else if (rest.starts_with(">")) atom.op = Op::gt, i += 1;
    else if (rest.starts_with("~")) atom.op = Op::contains, i += 1;
    else if (rest.starts_with("?")) atom.op = Op::present, i += 1;
    else throw QuerySyntaxError("expected an operator after '" + atom.selector.text() + "'", i);

    if (atom.op != Op::present && atom.op != Op::absent) {
      skip_ws();
      if (i >= text.size()) throw QuerySyntaxError("missing value for '" + atom.selector.text() + "'", i);
      if (text[i] == '"') {
        const auto quote = i++;
        bool closed = false;
        while (i < text.size()) {
          const char c = text[i++];
          if (c == '"') {
            closed = true;
            break;
          }
          if (c == '\\' && i < text.size()) {
            atom.operand.push_back(text[i++]);
            continue;
          }
          atom.operand.push_back(c);
        }
        if (!closed) throw QuerySyntaxError("unterminated quoted value", quote);
      } else {
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
          atom.operand.push_back(text[i++]);
        }
      }
      if ((atom.op == Op::lt || atom.op == Op::gt) && !detail::parse_number(atom.operand) &&
          !parse_date(atom.operand) && !parse_timestamp(atom.operand)) {
        throw QuerySyntaxError("'" + std::string(to_string(atom.op)) +
                                   "' needs a number, date or timestamp, got '" + atom.operand + "'",
                               i);
      }
    }
    if (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
      throw QuerySyntaxError("expected whitespace between atoms", i);
    }
    p.atoms.push_back(std::move(atom));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Operations

/// Order-preserving subset of `records` matching `predicate`.
template <Viewable Record>
std::vector<Record> filter(std::span<const Record> records, const Predicate& predicate) {
  std::vector<Record> out;
  for (const auto& r : records) {
    if (predicate.matches(r)) out.push_back(r);
  }
  return out;
}

template <Viewable Record>
std::vector<Record> filter(const std::vector<Record>& records, const Predicate& predicate) {
  return filter(std::span<const Record>(records), predicate);
}

template <TrailRecord Record>
std::vector<Record> filter(const TrailStore& store, const Predicate& predicate) {
  return filter(store.scan<Record>(), predicate);
}

/// Label for a group key value. Absent keys form their own group.
inline std::string group_label(const std::optional<Json>& key) {
  if (!key) return "(absent)";
  return detail::plain_text(*key);
}

/// Numeric samples behind a metric value: a number, or an all-numeric
/// array. Anything else yields nothing.
inline std::optional<std::vector<double>> metric_samples(const std::optional<Json>& v) {
  if (!v) return std::nullopt;
  if (v->is_number()) return std::vector<double>{v->get<double>()};
  if (!v->is_array() || v->empty()) return std::nullopt;
  std::vector<double> xs;
  for (const auto& e : *v) {
    if (!e.is_number()) return std::nullopt;
    xs.push_back(e.get<double>());
  }
  return xs;
}

struct GroupStats {
  std::map<std::string, SummaryStats> groups;
  /// Records whose metric was absent or not numeric.
  std::size_t skipped = 0;
};

/// One SummaryStats per distinct key value. Sample-list metrics are
/// flattened into their group.
template <Viewable Record>
GroupStats group_stats(std::span<const Record> records, const FieldSelector& key, const FieldSelector& metric) {
  std::map<std::string, std::vector<double>> samples;
  GroupStats out;
  for (const auto& r : records) {
    const auto v = view(r);
    const auto xs = metric_samples(metric.resolve(v));
    if (!xs) {
      ++out.skipped;
      continue;
    }
    auto& bucket = samples[group_label(key.resolve(v))];
    bucket.insert(bucket.end(), xs->begin(), xs->end());
  }
  for (const auto& [label, xs] : samples) out.groups.emplace(label, summarize(xs));
  return out;
}

template <Viewable Record>
GroupStats group_stats(const std::vector<Record>& records, const FieldSelector& key,
                       const FieldSelector& metric) {
  return group_stats(std::span<const Record>(records), key, metric);
}

/// Scalar score of a record: the metric value, or the mean of a sample list.
template <Viewable Record>
std::optional<double> score(const Record& r, const FieldSelector& metric) {
  const auto v = metric.resolve(r);
  if (!v) return std::nullopt;
  return detail::numeric_value(*v);
}

/// Best `k` records by metric, descending; ties go to the lower code.
/// Records without the metric are left out.
template <Viewable Record>
std::vector<Record> top_k(std::span<const Record> records, const FieldSelector& metric, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  std::vector<std::pair<double, const Record*>> scored;
  for (const auto& r : records) {
    if (const auto s = score(r, metric)) scored.emplace_back(*s, &r);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return code_of(*a.second) < code_of(*b.second);
  });
  std::vector<Record> out;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) out.push_back(*scored[i].second);
  return out;
}

template <Viewable Record>
std::vector<Record> top_k(const std::vector<Record>& records, const FieldSelector& metric, std::size_t k) {
  return top_k(std::span<const Record>(records), metric, k);
}

}  // namespace rastro
