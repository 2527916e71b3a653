// SPDX-License-Identifier: Apache-2.0
// Registers a toy cross-validated training through the in-process API.
//
//   capture_demo <trail-dir>

#include <iostream>
#include <random>

#include "rastro/rastro.hpp"

int main(int argc, char** argv) {
  using namespace rastro;
  if (argc != 2) {
    std::cerr << "usage: capture_demo <trail-dir>\n";
    return 1;
  }
  try {
    auto store = TrailStore::open_or_init(argv[1], "");

    Configuration cfg;
    cfg.program_id = "capture_demo";
    cfg.library_versions = {{"fmt", "8"}, {"nlohmann_json", "3"}};
    cfg.random_seed = 7;
    DataUsed data;
    data.dataset_description = "synthetic two-class points";
    data.feature_names = {"x", "y"};
    data.record_count = 200;
    data.class_count = 2;
    TrainingParams params;
    params.algorithm = "threshold";
    params.hyperparameters = {{"cut", 0.5}, {"shuffle", false}};
    TestParams test;
    test.evaluation_procedure = CrossValidation{5, 1};
    test.metric_names = {"accuracy"};

    auto run = begin_run(store, cfg, data, params, test);
    std::mt19937 rng(7);
    std::bernoulli_distribution label(0.5);
    std::normal_distribution<double> noise(0.0, 0.3);
    for (int fold = 0; fold < 5; ++fold) {
      std::vector<int> truth, predicted;
      for (int i = 0; i < 40; ++i) {
        const int y = label(rng) ? 1 : 0;
        truth.push_back(y);
        predicted.push_back(y + noise(rng) > 0.5 ? 1 : 0);
      }
      const auto counts = confusion_from_labels(truth, predicted, std::vector<int>{0, 1});
      run.log_metric("accuracy", averaged_metrics(counts, Averaging::micro).accuracy);
      run.log_epoch();
    }
    const auto code = run.end_run(RunStatus::succeeded);
    const auto record = store.read<TrainingRecord>(code);
    std::cout << "training " << code << ": accuracy "
              << format_summary(summarize(record.results.metrics.at("accuracy").flattened())) << '\n';
  } catch (const Error& e) {
    std::cerr << "capture_demo: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
