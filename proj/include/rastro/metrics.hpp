// SPDX-License-Identifier: Apache-2.0
#pragma once

// Classification metrics over per-class confusion counts: per-class
// precision/recall/F1/support and their micro, macro and weighted averages.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "rastro/error.hpp"

namespace rastro {

/// Per-class true-positive, false-positive and false-negative counts.
template <typename Label>
struct ConfusionCounts {
  std::vector<Label> classes;
  std::vector<std::uint64_t> tp;
  std::vector<std::uint64_t> fp;
  std::vector<std::uint64_t> fn;

  explicit ConfusionCounts(std::vector<Label> labels = {})
      : classes(std::move(labels)), tp(classes.size(), 0), fp(classes.size(), 0), fn(classes.size(), 0) {}

  std::size_t index_of(const Label& label) const {
    const auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) throw InvalidArgument("unknown class label");
    return static_cast<std::size_t>(it - classes.begin());
  }

  std::uint64_t total_tp() const { return sum(tp); }
  std::uint64_t total_fp() const { return sum(fp); }
  std::uint64_t total_fn() const { return sum(fn); }

  /// Number of instances, i.e. the summed support.
  std::uint64_t instances() const { return total_tp() + total_fn(); }

 private:
  static std::uint64_t sum(const std::vector<std::uint64_t>& v) {
    std::uint64_t s = 0;
    for (auto x : v) s += x;
    return s;
  }
};

/// Builds counts from aligned truth/prediction sequences of single-label
/// data. Every label must appear in `classes`.
template <typename Label>
ConfusionCounts<Label> confusion_from_labels(std::span<const Label> truth, std::span<const Label> predicted,
                                             std::span<const Label> classes) {
  if (truth.size() != predicted.size()) {
    throw InvalidArgument(fmt::format("truth has {} labels but predictions have {}", truth.size(),
                                      predicted.size()));
  }
  ConfusionCounts<Label> counts(std::vector<Label>(classes.begin(), classes.end()));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = counts.index_of(truth[i]);
    const auto p = counts.index_of(predicted[i]);
    if (t == p) {
      ++counts.tp[t];
    } else {
      ++counts.fn[t];
      ++counts.fp[p];
    }
  }
  return counts;
}

template <typename Label>
ConfusionCounts<Label> confusion_from_labels(const std::vector<Label>& truth, const std::vector<Label>& predicted,
                                             const std::vector<Label>& classes) {
  return confusion_from_labels(std::span<const Label>(truth), std::span<const Label>(predicted),
                               std::span<const Label>(classes));
}

/// A ratio whose denominator was zero is reported as 0 with its flag set.
struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

inline ClassMetrics metrics_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  ClassMetrics m;
  m.support = tp + fn;
  m.precision_undefined = tp + fp == 0;
  m.recall_undefined = tp + fn == 0;
  m.f1_undefined = 2 * tp + fp + fn == 0;
  if (!m.precision_undefined) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (!m.recall_undefined) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  // Harmonic mean of precision and recall, written over counts.
  if (!m.f1_undefined) m.f1 = static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
  return m;
}

template <typename Label>
ClassMetrics class_metrics(const ConfusionCounts<Label>& counts, const Label& label) {
  const auto i = counts.index_of(label);
  return metrics_from_counts(counts.tp[i], counts.fp[i], counts.fn[i]);
}

enum class Averaging { micro, macro, weighted };

struct AveragedMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

/// micro pools the counts before dividing, macro is the unweighted class
/// mean, weighted is the support-weighted class mean. Accuracy is
/// sum(tp) / instances in every mode.
template <typename Label>
AveragedMetrics averaged_metrics(const ConfusionCounts<Label>& counts, Averaging mode) {
  const auto n = counts.instances();
  if (n == 0) throw InvalidArgument("averaged metrics need at least one instance");
  AveragedMetrics out;
  out.accuracy = static_cast<double>(counts.total_tp()) / static_cast<double>(n);

  switch (mode) {
    case Averaging::micro: {
      const auto pooled = metrics_from_counts(counts.total_tp(), counts.total_fp(), counts.total_fn());
      out.precision = pooled.precision;
      out.recall = pooled.recall;
      out.f1 = pooled.f1;
      break;
    }
    case Averaging::macro: {
      const auto k = counts.classes.size();
      for (std::size_t i = 0; i < k; ++i) {
        const auto m = metrics_from_counts(counts.tp[i], counts.fp[i], counts.fn[i]);
        out.precision += m.precision;
        out.recall += m.recall;
        out.f1 += m.f1;
      }
      out.precision /= static_cast<double>(k);
      out.recall /= static_cast<double>(k);
      out.f1 /= static_cast<double>(k);
      break;
    }
    case Averaging::weighted: {
      for (std::size_t i = 0; i < counts.classes.size(); ++i) {
        const auto m = metrics_from_counts(counts.tp[i], counts.fp[i], counts.fn[i]);
        const double w = static_cast<double>(m.support) / static_cast<double>(n);
        out.precision += w * m.precision;
        out.recall += w * m.recall;
        out.f1 += w * m.f1;
      }
      break;
    }
  }
  return out;
}

/// Fraction of instances whose true label is among the first `k` entries of
/// its ranked prediction list. Lists are taken in their given order, so ties
/// in the underlying scores resolve by list position.
template <typename Label>
double top_k_accuracy(std::span<const Label> truth, std::span<const std::vector<Label>> ranked, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (truth.size() != ranked.size()) throw InvalidArgument("truth and ranked predictions differ in length");
  if (truth.empty()) throw InvalidArgument("top-k accuracy needs at least one instance");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& list = ranked[i];
    const auto end = list.begin() + static_cast<std::ptrdiff_t>(std::min(k, list.size()));
    if (std::find(list.begin(), end, truth[i]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// `0.93333` -> `"93.33%"` with the requested number of decimals.
inline std::string format_percent(double fraction, int decimals) {
  return fmt::format("{:.{}f}%", fraction * 100.0, decimals);
}

/// Per-class table row: precision, recall, F1 at two decimals, then support.
inline std::string format_class_row(const ClassMetrics& m) {
  return fmt::format("{} {} {} {}", format_percent(m.precision, 2), format_percent(m.recall, 2),
                     format_percent(m.f1, 2), m.support);
}

}  // namespace rastro
