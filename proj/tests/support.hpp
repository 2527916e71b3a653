// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rastro/rastro.hpp"

namespace rastro::test {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("rastro-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline StoreOptions quiet_options(std::vector<std::string>* warnings = nullptr) {
  StoreOptions o;
  o.durable = false;
  o.on_warning = [warnings](const std::string& msg) {
    if (warnings != nullptr) warnings->push_back(msg);
  };
  return o;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void append_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  out << text;
}

inline std::size_t count_lines(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

inline Timestamp at(int y, unsigned m, unsigned d, int hh = 0, int mm = 0, int ss = 0) {
  return Timestamp::from_civil(y, m, d, hh, mm, ss);
}

/// A minimal valid training.
inline TrainingRecord training(std::string algorithm = "MLP", std::map<std::string, MetricResult> metrics = {}) {
  TrainingRecord r;
  r.configuration.program_id = "train.py";
  r.data_used.dataset_description = "documents";
  r.training_params.algorithm = std::move(algorithm);
  r.results.metrics = std::move(metrics);
  return r;
}

inline MetricResult scalar(double x) { return MetricResult::scalar(x); }
inline MetricResult samples(std::vector<double> xs) { return MetricResult::samples(std::move(xs)); }

/// 14 values alternating center + d and center - d. Their sample standard
/// deviation is d * sqrt(14 / 13).
inline std::vector<double> alternating(double center, double d, std::size_t n = 14) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < n; ++i) xs.push_back(i % 2 == 0 ? center + d : center - d);
  return xs;
}

/// Writes a record line directly, keeping its code. Stands in for a trail
/// carried over from earlier tooling, whose codes do not start at 1.
inline void write_raw(const fs::path& root, const TrainingRecord& r) {
  append_text(root / "trainings.jsonl", encode_line(to_json(r)) + "\n");
}

// Random valid training covering every optional field and value type.
inline TrainingRecord random_training(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> big(-1'000'000'000'000LL, 1'000'000'000'000LL);
  auto r = training(coin(rng) ? "MLP" : "LGBMClassifier");
  r.context.epochs = static_cast<std::int64_t>(unit(rng) * 100);
  r.context.duration_seconds = unit(rng) * 1000;
  switch (rng() % 3) {
    case 0: break;
    case 1:
      r.context.status = RunStatus::failed;
      r.context.error_message = "out of memory\nline \"two\"\tç";
      break;
    default:
      r.context.status = RunStatus::interrupted;
      r.context.error_message = "SIGINT";
  }
  r.configuration.library_versions = {{"keras", "2.2.4"}};
  if (coin(rng)) r.configuration.hardware = "GPU";
  if (coin(rng)) r.configuration.random_seed = big(rng);
  if (coin(rng)) r.data_used.selection_criteria = "after 5/1/2018";
  r.data_used.feature_names = {"content", "file_name"};
  if (coin(rng)) r.data_used.record_count = 63468;
  if (coin(rng)) r.data_used.class_count = 81;
  r.training_params.hyperparameters = {
      {"batch_size", std::int64_t{256}}, {"lr", unit(rng)}, {"shuffle", coin(rng) == 1}, {"optimizer", "Adam"},
      {"one_real", 1.0}, {"big_int", big(rng)}};
  if (coin(rng)) {
    r.test_params.evaluation_procedure = CrossValidation{7, 2};
    r.results.metrics["accuracy"] = MetricResult::samples(std::vector<double>(14, unit(rng)));
  } else {
    r.test_params.evaluation_procedure = Holdout{0.05, coin(rng) == 1};
    r.results.metrics["accuracy"] = MetricResult::scalar(unit(rng));
  }
  r.results.metrics["tiny"] = MetricResult::scalar(unit(rng) * 1e-300);
  if (coin(rng)) r.results.model_ref = "models/m.h5";
  return r;
}


// ---------------------------------------------------------------------------
// Golden trail: the definitions of action, the lessons learned and the two
// version-2.1 trainings of the document classifier project, plus derived
// trainings backing the file-name and optimizer lessons.

struct FixtureTrail {
  std::vector<std::int64_t> filename_runs;
  std::vector<std::int64_t> optimizer_runs;
  std::int64_t test_run = 13134;
  std::int64_t generation_run = 13138;
};

inline TrainingRecord cladop_base() {
  TrainingRecord r;
  r.configuration.program_id = "Cladop_monitoramento.ipynb";
  r.configuration.library_versions = {{"keras", "2.2.4"}, {"scikit-learn", "0.20.3"}};
  r.data_used.dataset_description = "Cladop documents";
  r.data_used.feature_names = {"content", "file_name"};
  r.training_params.algorithm = "MLP";
  r.training_params.hyperparameters = {{"optimizer", std::string("Adam")}, {"batch_size", std::int64_t{256}}};
  return r;
}

inline TrainingRecord cv_test_run() {
  auto r = cladop_base();
  r.context.code = 13134;
  r.context.registered_at = at(2019, 7, 5, 0, 44, 59);
  r.context.epochs = 33;
  r.context.duration_seconds = 460;
  r.data_used.selection_criteria = "Documents of a different type from Others and created after 5/1/2018";
  r.data_used.record_count = 63468;
  r.data_used.class_count = 81;
  r.training_params.hyperparameters = {
      {"optimizer", std::string("Adam")},
      {"batch_size", std::int64_t{256}},
      {"text_vectorizer", std::string("Tfidf")},
      {"text_vocabulary", std::int64_t{24576}},
      {"file_name_vocabulary", std::int64_t{1000}},
      {"preprocessing_method", std::int64_t{7}},
      {"min_documents_per_type", std::int64_t{0}},
      {"content_dimension", std::int64_t{768}},
      {"dimension_reduction", std::string("TruncatedSVD")},
      {"shuffle_each_epoch", false},
      {"validation_fraction", 0.05},
      {"uses_filename", true},
  };
  r.test_params.evaluation_procedure = CrossValidation{7, 2};
  r.test_params.metric_names = {"test_accuracy", "training_accuracy", "validation_accuracy"};
  r.results.metrics = {
      {"test_accuracy", samples(alternating(0.911, 0.0029))},
      {"training_accuracy", samples(alternating(0.964, 0.0067))},
      {"validation_accuracy", samples(alternating(0.908, 0.0058))},
  };
  return r;
}

inline TrainingRecord generation_run() {
  auto r = cv_test_run();
  r.context.code = 13138;
  r.context.registered_at = at(2019, 7, 5, 18, 2, 12);
  r.context.epochs = 24;
  r.context.duration_seconds = 475;
  r.test_params.evaluation_procedure = Holdout{0.05, false};
  r.test_params.metric_names = {"training_accuracy", "validation_accuracy"};
  r.results.metrics = {{"training_accuracy", scalar(0.956)}, {"validation_accuracy", scalar(0.921)}};
  r.results.model_ref = "models/cladop-2.1.h5";
  return r;
}

inline FixtureTrail build_fixture_trail(const fs::path& root) {
  auto store = TrailStore::open_or_init(root, "cladop", quiet_options());
  FixtureTrail trail;

  // File name as an attribute: two runs without, two with.
  const std::vector<std::pair<bool, double>> filename_runs{{false, 0.855}, {false, 0.865}, {true, 0.905}, {true, 0.915}};
  std::int64_t code = 5210;
  for (std::size_t i = 0; i < filename_runs.size(); ++i) {
    auto r = cladop_base();
    r.context.code = code;
    r.context.registered_at = at(2019, 3, 27, 9 + static_cast<int>(i) * 3, 15);
    r.context.epochs = 20;
    r.context.duration_seconds = 300 + 10.0 * static_cast<double>(i);
    r.training_params.hyperparameters["uses_filename"] = filename_runs[i].first;
    r.test_params.metric_names = {"accuracy"};
    r.results.metrics = {{"accuracy", scalar(filename_runs[i].second)}};
    write_raw(root, r);
    trail.filename_runs.push_back(code++);
  }

  // Optimizer comparison in the final data selection.
  const std::vector<std::pair<std::string, double>> optimizer_runs{
      {"Adam", 0.911}, {"Amsgrad", 0.910}, {"Rmsprop", 0.909}, {"Adadelta", 0.909}};
  code = 12650;
  for (std::size_t i = 0; i < optimizer_runs.size(); ++i) {
    auto r = cladop_base();
    r.context.code = code;
    r.context.registered_at = at(2019, 5, 21, 10 + static_cast<int>(i) * 2, 30);
    r.context.epochs = 30;
    r.context.duration_seconds = 450;
    r.data_used.selection_criteria = "Documents of a different type from Others and created after 5/1/2018";
    r.training_params.hyperparameters["optimizer"] = optimizer_runs[i].first;
    r.training_params.hyperparameters["uses_filename"] = true;
    r.test_params.metric_names = {"accuracy"};
    r.results.metrics = {{"accuracy", scalar(optimizer_runs[i].second)}};
    write_raw(root, r);
    trail.optimizer_runs.push_back(code++);
  }

  write_raw(root, cv_test_run());
  write_raw(root, generation_run());
  store = TrailStore::open(root, quiet_options());
  const auto taxonomy = store.taxonomy();

  auto action = [&](Timestamp when, std::string text, std::string_view task) {
    ActionDefinition a;
    a.registered_at = when;
    a.description = std::move(text);
    a.task = canonical_task(task, taxonomy);
    a.status = ActionStatus::executed;
    store.append(std::move(a));
  };
  auto lesson = [&](Timestamp when, std::string text, std::string_view task, std::vector<std::int64_t> codes = {}) {
    Lesson l;
    l.registered_at = when;
    l.description = std::move(text);
    l.task = canonical_task(task, taxonomy);
    l.related_training_codes = std::move(codes);
    store.append(std::move(l));
  };

  action(at(2019, 3, 12, 17, 4), "Creating a structure (code and data) for processing k-fold in shallow algorithms",
         "Project of tests");
  action(at(2019, 3, 14, 19, 27), "Initiated the executions to experiment optimizers (MLP): nadam, adadelta",
         "Construct Model");
  action(at(2019, 3, 18, 11, 40), "Experimenting with MLP columns no longer binary", "Format Data");
  action(at(2019, 3, 26, 11, 57), "Initiating the inclusion of names of files in the model", "Select Data");
  action(at(2019, 5, 29, 19, 30), "Program modified (shallow) to also record recall and f1-micro", "Project of tests");
  action(at(2019, 6, 4, 19, 35),
         "Program modified (shallow) to not record recall and f1-micro, because they are equivalent to accuracy "
         "(and to precision)",
         "Project of tests");

  lesson(at(2019, 2, 27, 10, 32),
         "The variables of context and PDF quality are enough to achieve a result of 44% accuracy, with optimizer "
         "Adam. With Adagrad:42%; SGD:28%.",
         "Select Data");
  lesson(at(2019, 2, 27, 10, 39),
         "By using pca (sklearn): it is best to separate the fit command from the transform command. The "
         "fit_transform command was locking!",
         "Format Data");
  lesson(at(2019, 2, 27, 10, 53),
         "By using pca (sklearn): if the number of dimensions is very small and the array is wide (see details in "
         "the documentation of function), it is better to use the randomized method rather than the full method, "
         "because it is faster and the results (variance achieved) are equivalent.",
         "Format Data");
  lesson(at(2019, 3, 29, 9, 54),
         "An improvement of approximately 5% in the accuracy of the models was noticed after including the file "
         "name as an attribute.",
         "Select Data", trail.filename_runs);
  lesson(at(2019, 4, 1, 15, 36),
         "For shallow algorithms, the extra columns with no dummy values (one only column with various discrete "
         "values) led to a better result. For a Neural Networks, there is a slight improvement using dummy values.",
         "Format Data");
  lesson(at(2019, 4, 10, 10, 49),
         "In multiclass classification, the metrics referring to f1_micro, recall_micro, precision_micro and "
         "accuracy are equivalent.",
         "Project of tests");
  lesson(at(2019, 5, 22, 20, 4),
         "The Adam optimizer (passing object with Amsgrad=False) was the best optimizer so far. Better than the "
         "Amsgrad=True in 0.1%, and than the Rmsprop and the Adadelta in 0.2% in the context evaluated in the last "
         "executions.",
         "Construct Model", trail.optimizer_runs);
  return trail;
}

inline fs::path golden_dir() { return fs::path(RASTRO_TEST_SOURCE_DIR) / "golden"; }

}  // namespace rastro::test
