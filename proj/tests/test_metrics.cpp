// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "support.hpp"

using namespace rastro;

namespace {

// Independent oracle: everything from a dense k x k matrix (rows = truth,
// columns = prediction), no shared code with the library.
struct MatrixOracle {
  std::vector<std::vector<std::uint64_t>> m;

  std::size_t k() const { return m.size(); }
  double total() const {
    double t = 0;
    for (const auto& row : m) for (auto x : row) t += static_cast<double>(x);
    return t;
  }
  double diag() const {
    double d = 0;
    for (std::size_t i = 0; i < k(); ++i) d += static_cast<double>(m[i][i]);
    return d;
  }
  double row(std::size_t i) const {
    double s = 0;
    for (auto x : m[i]) s += static_cast<double>(x);
    return s;
  }
  double col(std::size_t j) const {
    double s = 0;
    for (const auto& r : m) s += static_cast<double>(r[j]);
    return s;
  }
  double precision(std::size_t i) const { return col(i) == 0 ? 0 : static_cast<double>(m[i][i]) / col(i); }
  double recall(std::size_t i) const { return row(i) == 0 ? 0 : static_cast<double>(m[i][i]) / row(i); }
  double f1(std::size_t i) const {
    const double p = precision(i), r = recall(i);
    return p + r == 0 ? 0 : 2 * p * r / (p + r);
  }
};

}  // namespace

TEST(Metrics, HandEnumeratedThreeClassConfusion) {
  // truth:     a a a b b c
  // predicted: a a b b c c
  const std::vector<std::string> truth{"a", "a", "a", "b", "b", "c"};
  const std::vector<std::string> pred{"a", "a", "b", "b", "c", "c"};
  const auto counts = confusion_from_labels(truth, pred, std::vector<std::string>{"a", "b", "c"});
  EXPECT_EQ(counts.tp, (std::vector<std::uint64_t>{2, 1, 1}));
  EXPECT_EQ(counts.fp, (std::vector<std::uint64_t>{0, 1, 1}));
  EXPECT_EQ(counts.fn, (std::vector<std::uint64_t>{1, 1, 0}));

  const auto a = class_metrics(counts, std::string("a"));
  EXPECT_DOUBLE_EQ(a.precision, 1.0);
  EXPECT_DOUBLE_EQ(a.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(a.f1, 0.8);
  EXPECT_EQ(a.support, 3u);

  const auto macro = averaged_metrics(counts, Averaging::macro);
  EXPECT_DOUBLE_EQ(macro.precision, (1.0 + 0.5 + 0.5) / 3);
  EXPECT_DOUBLE_EQ(macro.recall, (2.0 / 3 + 0.5 + 1.0) / 3);
  const auto weighted = averaged_metrics(counts, Averaging::weighted);
  EXPECT_DOUBLE_EQ(weighted.recall, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(weighted.precision, (3 * 1.0 + 2 * 0.5 + 1 * 0.5) / 6);
}

TEST(Metrics, PerClassRowsRender) {
  EXPECT_EQ(format_class_row(metrics_from_counts(14, 1, 1)), "93.33% 93.33% 93.33% 15");
  EXPECT_EQ(format_class_row(metrics_from_counts(4, 0, 0)), "100.00% 100.00% 100.00% 4");
}

TEST(Metrics, OverallAccuracyMatchesWeightedRecall) {
  // 9099 of 10000 right: the overall 90.99% shared by accuracy and weighted recall.
  ConfusionCounts<int> c({0, 1, 2});
  c.tp = {5000, 3000, 1099};
  c.fn = {400, 300, 201};
  c.fp = {500, 200, 201};
  const auto w = averaged_metrics(c, Averaging::weighted);
  EXPECT_EQ(format_percent(w.accuracy, 2), "90.99%");
  EXPECT_EQ(format_percent(w.recall, 2), "90.99%");
}

TEST(Metrics, ZeroDenominatorsAreFlagged) {
  const auto m = metrics_from_counts(0, 0, 0);
  EXPECT_TRUE(m.precision_undefined && m.recall_undefined && m.f1_undefined);
  EXPECT_EQ(m.precision, 0.0);
  const auto never_predicted = metrics_from_counts(0, 0, 3);
  EXPECT_TRUE(never_predicted.precision_undefined);
  EXPECT_FALSE(never_predicted.recall_undefined);
  EXPECT_EQ(never_predicted.f1, 0.0);
}

TEST(Metrics, InputErrors) {
  const std::vector<int> classes{0, 1};
  EXPECT_THROW(confusion_from_labels(std::vector<int>{0, 1}, std::vector<int>{0}, classes), InvalidArgument);
  EXPECT_THROW(confusion_from_labels(std::vector<int>{0, 2}, std::vector<int>{0, 1}, classes), InvalidArgument);
  EXPECT_THROW(averaged_metrics(ConfusionCounts<int>(classes), Averaging::micro), InvalidArgument);
}

TEST(Metrics, AgreesWithMatrixOracle) {
  std::mt19937 rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = std::uniform_int_distribution<int>(1, 10)(rng);
    const int n = std::uniform_int_distribution<int>(1, 200)(rng);
    std::uniform_int_distribution<int> label(0, k - 1);
    std::vector<int> classes(k), truth, pred;
    std::iota(classes.begin(), classes.end(), 0);
    MatrixOracle o{std::vector<std::vector<std::uint64_t>>(k, std::vector<std::uint64_t>(k, 0))};
    for (int i = 0; i < n; ++i) {
      truth.push_back(label(rng));
      pred.push_back(rng() % 3 == 0 ? label(rng) : truth.back());
      ++o.m[truth.back()][pred.back()];
    }
    const auto counts = confusion_from_labels(truth, pred, classes);
    double macro_p = 0, macro_r = 0, macro_f = 0, wp = 0, wr = 0, wf = 0;
    for (int c = 0; c < k; ++c) {
      const auto m = class_metrics(counts, c);
      EXPECT_NEAR(m.precision, o.precision(c), 1e-12);
      EXPECT_NEAR(m.recall, o.recall(c), 1e-12);
      EXPECT_NEAR(m.f1, o.f1(c), 1e-12);
      EXPECT_EQ(static_cast<double>(m.support), o.row(c));
      macro_p += o.precision(c) / k;
      macro_r += o.recall(c) / k;
      macro_f += o.f1(c) / k;
      wp += o.precision(c) * o.row(c) / o.total();
      wr += o.recall(c) * o.row(c) / o.total();
      wf += o.f1(c) * o.row(c) / o.total();
    }
    const auto macro = averaged_metrics(counts, Averaging::macro);
    EXPECT_NEAR(macro.precision, macro_p, 1e-12);
    EXPECT_NEAR(macro.recall, macro_r, 1e-12);
    EXPECT_NEAR(macro.f1, macro_f, 1e-12);
    const auto weighted = averaged_metrics(counts, Averaging::weighted);
    EXPECT_NEAR(weighted.precision, wp, 1e-12);
    EXPECT_NEAR(weighted.recall, wr, 1e-12);
    EXPECT_NEAR(weighted.f1, wf, 1e-12);
    EXPECT_NEAR(weighted.accuracy, o.diag() / o.total(), 1e-12);
  }
}

TEST(Metrics, MicroAveragesCollapseToAccuracy) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = std::uniform_int_distribution<int>(1, 10)(rng);
    const int n = std::uniform_int_distribution<int>(1, 200)(rng);
    std::uniform_int_distribution<int> label(0, k - 1);
    std::vector<int> classes(k), truth(n), pred(n);
    std::iota(classes.begin(), classes.end(), 0);
    for (int i = 0; i < n; ++i) {
      truth[i] = label(rng);
      pred[i] = label(rng);
    }
    const auto counts = confusion_from_labels(truth, pred, classes);
    const auto micro = averaged_metrics(counts, Averaging::micro);
    const auto weighted = averaged_metrics(counts, Averaging::weighted);
    double hits = 0;
    for (int i = 0; i < n; ++i) hits += truth[i] == pred[i];
    const double accuracy = hits / n;
    ASSERT_NEAR(micro.accuracy, accuracy, 1e-12);
    ASSERT_NEAR(micro.precision, accuracy, 1e-12);
    ASSERT_NEAR(micro.recall, accuracy, 1e-12);
    ASSERT_NEAR(micro.f1, accuracy, 1e-12);
    ASSERT_NEAR(weighted.recall, accuracy, 1e-12);
  }
}

TEST(Metrics, TopKAccuracy) {
  const std::vector<int> truth{0, 1, 2, 2};
  const std::vector<std::vector<int>> ranked{{0, 1}, {2, 1}, {1, 0}, {2}};
  EXPECT_DOUBLE_EQ(top_k_accuracy(std::span<const int>(truth), std::span<const std::vector<int>>(ranked), 1), 0.5);
  EXPECT_DOUBLE_EQ(top_k_accuracy(std::span<const int>(truth), std::span<const std::vector<int>>(ranked), 2), 0.75);
  EXPECT_THROW(top_k_accuracy(std::span<const int>(truth), std::span<const std::vector<int>>(ranked), 0),
               InvalidArgument);
}
