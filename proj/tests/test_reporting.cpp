// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "support.hpp"

using namespace rastro;
using namespace rastro::test;

namespace {

class FixtureTrailTest : public ::testing::Test {
 protected:
  void SetUp() override { build_fixture_trail(dir_.path()); }
  TrailStore store() const { return TrailStore::open(dir_.path(), quiet_options()); }

  TempDir dir_;
};

/// Every optional field set.
TrainingRecord fully_populated() {
  auto r = cv_test_run();
  r.configuration.hardware = "1x Tesla K80";
  r.configuration.random_seed = 42;
  r.context.status = RunStatus::interrupted;
  r.context.error_message = "stopped by the analyst";
  r.results.model_ref = "models/cladop-2.1-test.h5";
  r.results.metrics["loss"] = scalar(0.31);
  r.results.metrics["train_loss"] = scalar(0.12);
  return r;
}

/// Resolves a dotted destination path, descending into arrays by searching
/// every element.
bool reaches(const Json& j, std::string_view path) {
  if (path.empty()) return !j.is_null();
  const auto dot = path.find('.');
  const std::string head(path.substr(0, dot));
  const auto rest = dot == std::string_view::npos ? std::string_view{} : path.substr(dot + 1);
  if (j.is_array()) {
    return std::any_of(j.begin(), j.end(), [&](const Json& e) { return reaches(e, path); });
  }
  if (!j.is_object() || !j.contains(head)) return false;
  return reaches(j.at(head), rest);
}

bool mapped(std::string_view field) {
  return std::any_of(kMlSchemaMapping.begin(), kMlSchemaMapping.end(),
                     [&](const SchemaMapping& m) { return m.field == field; });
}

}  // namespace

TEST_F(FixtureTrailTest, SelectDataReportMatchesGolden) {
  EXPECT_EQ(task_report(store(), canonical_task("Select Data")), slurp(golden_dir() / "select_data.md"));
}

TEST_F(FixtureTrailTest, ProjectOfTestsReportMatchesGolden) {
  EXPECT_EQ(task_report(store(), canonical_task("project  of TESTS")), slurp(golden_dir() / "project_of_tests.md"));
}

TEST_F(FixtureTrailTest, ChronologyMatchesGolden) {
  EXPECT_EQ(chronology(store()), slurp(golden_dir() / "chronology.md"));
}

TEST_F(FixtureTrailTest, LessonsPrecedeTheFirstActionInTime) {
  const auto text = chronology(store());
  const auto first_lesson = text.find("2019-02-27T10:32:00Z lesson");
  const auto first_action = text.find("2019-03-12T17:04:00Z action");
  ASSERT_NE(first_lesson, std::string::npos);
  ASSERT_NE(first_action, std::string::npos);
  EXPECT_LT(first_lesson, first_action);
}

TEST_F(FixtureTrailTest, ReportsAreDeterministic) {
  const auto s = store();
  const auto a = task_report(s, canonical_task("Format Data"));
  for (int i = 0; i < 5; ++i) EXPECT_EQ(task_report(s, canonical_task("Format Data")), a);
  EXPECT_NE(a.find("## Action definitions\n\n- 2019-03-18T11:40:00Z action 3:"), std::string::npos);
}

TEST(Reporting, EmptyStoreSaysNone) {
  TempDir dir;
  const auto store = TrailStore::open_or_init(dir.path(), "p", quiet_options());
  const auto report = task_report(store, canonical_task("Select Data"));
  EXPECT_EQ(report,
            "# Task report: select data\n\nPhase: data-preparation\n\n"
            "## Action definitions\n\n(none)\n\n"
            "## Lessons learned\n\n(none)\n\n"
            "## Training summary\n\nTrainings referenced: 0\n");
  EXPECT_EQ(chronology(store), "# Chronology\n\n(none)\n");
}

TEST(Reporting, SummaryLinesAreSingleLine) {
  ActionDefinition a;
  a.code = 9;
  a.registered_at = at(2019, 1, 2);
  a.description = "two\nlines";
  EXPECT_EQ(summary_line(a), "2019-01-02T00:00:00Z action 9 two lines");
  EXPECT_EQ(summary_line(generation_run()),
            "2019-07-05T18:02:12Z training 13138 [MLP] succeeded training_accuracy=0.9560; "
            "validation_accuracy=0.9210");
}

TEST(MlSchema, GenerationRunExport) {
  const auto doc = export_mlschema(generation_run());
  const auto& run = doc.at("Run");
  EXPECT_EQ(run.at("id"), 13138);
  EXPECT_EQ(run.at("epochs"), 24);
  EXPECT_EQ(run.at("duration_seconds"), 475.0);
  EXPECT_EQ(run.at("Algorithm").at("name"), "MLP");
  const auto& settings = run.at("HyperParameterSetting");
  const auto batch = std::find_if(settings.begin(), settings.end(),
                                  [](const Json& s) { return s.at("HyperParameter") == "batch_size"; });
  ASSERT_NE(batch, settings.end());
  EXPECT_EQ(batch->at("value"), 256);
  EXPECT_EQ(batch->at("type"), "int");
  const auto& evals = run.at("ModelEvaluation");
  const auto val = std::find_if(evals.begin(), evals.end(), [](const Json& e) {
    return e.at("EvaluationMeasure") == "accuracy" && e.at("dataset") == "validation";
  });
  ASSERT_NE(val, evals.end());
  EXPECT_EQ(val->at("value"), 0.921);
  EXPECT_EQ(run.at("EvaluationSpecification").at("EvaluationProcedure").at("type"), "holdout");
  EXPECT_EQ(run.at("Model").at("locator"), "models/cladop-2.1.h5");
}

TEST(MlSchema, RoundTripIsByteIdentical) {
  for (const auto& r : {generation_run(), cv_test_run(), fully_populated()}) {
    const auto text = render_mlschema(r);
    const auto back = import_mlschema(Json::parse(text));
    EXPECT_EQ(back, r);
    EXPECT_EQ(render_mlschema(back), text);
  }
}

TEST(MlSchema, EmptyMetricsExportAndReturn) {
  auto r = training();
  r.context.code = 3;
  r.context.registered_at = at(2019, 1, 1);
  const auto doc = export_mlschema(r);
  EXPECT_TRUE(doc.at("Run").at("ModelEvaluation").empty());
  EXPECT_FALSE(doc.at("Run").contains("Model"));
  EXPECT_EQ(import_mlschema(doc), r);
}

TEST(MlSchema, EveryStoredFieldHasADestination) {
  const auto r = fully_populated();
  const auto stored = to_json(r);
  const auto doc = export_mlschema(r);
  for (const auto& [key, value] : stored.items()) {
    if (value.is_object()) {
      for (const auto& [sub, _] : value.items()) EXPECT_TRUE(mapped(key + "." + sub)) << key << "." << sub;
    } else {
      EXPECT_TRUE(mapped(key)) << key;
    }
  }
  for (const auto& m : kMlSchemaMapping) {
    if (m.destination.starts_with("(unmapped")) continue;
    EXPECT_TRUE(reaches(doc, m.destination)) << m.field << " -> " << m.destination;
  }
}

TEST(MlSchema, ImportIsStrict) {
  auto doc = export_mlschema(generation_run());
  doc["Run"]["extra"] = 1;
  EXPECT_THROW(import_mlschema(doc), DecodeError);
  doc = export_mlschema(generation_run());
  doc["Run"]["status"] = "exploded";
  EXPECT_THROW(import_mlschema(doc), DecodeError);
  auto unregistered = generation_run();
  unregistered.context.registered_at.reset();
  EXPECT_THROW(export_mlschema(unregistered), InvalidArgument);
}
