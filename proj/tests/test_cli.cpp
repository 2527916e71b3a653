// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "cli_runner.hpp"

using namespace rastro;
using namespace rastro::test;

namespace {

class Cli : public ::testing::Test {
 protected:
  CliResult rastro(std::vector<std::string> args, const std::string& input = "") {
    args.insert(args.begin(), {"--dir", dir_.path().string()});
    return run_cli(args, input);
  }
  void init() { ASSERT_EQ(rastro({"init", "--name", "cladop"}).exit_code, 0); }

  TempDir dir_;
};

}  // namespace

TEST_F(Cli, InitIsIdempotent) {
  const auto first = rastro({"init", "--name", "cladop"});
  EXPECT_EQ(first.exit_code, 0) << first.err;
  EXPECT_NE(first.out.find("initialized trail 'cladop'"), std::string::npos);
  EXPECT_EQ(rastro({"init"}).exit_code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "project.json"));
}

TEST_F(Cli, MissingTrailIsAUserError) {
  const auto r = rastro({"query", "action"});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_TRUE(r.err.starts_with("rastro: "));
}

TEST_F(Cli, ActionAndLessonCodesArePrinted) {
  init();
  auto r = rastro({"action", "add", "-m", "Experimenting with MLP columns no longer binary", "--task", "Format Data",
                   "--at", "2019-03-18T11:40:00Z"});
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, "1\n");
  r = rastro({"lesson", "add", "-m", "Dummies help the network slightly", "--task", "Format Data"});
  EXPECT_EQ(r.out, "1\n");
  r = rastro({"query", "action", "task=\"format data\"", "--json"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto arr = Json::parse(r.out);
  ASSERT_EQ(arr.size(), 1u);
  EXPECT_EQ(arr[0].at("task").at("phase"), "data-preparation");
  EXPECT_EQ(arr[0].at("registered_at"), "2019-03-18T11:40:00Z");
}

TEST_F(Cli, BadInputsExitOne) {
  init();
  EXPECT_EQ(rastro({"action", "add", "-m", "   "}).exit_code, 1);
  EXPECT_EQ(rastro({"action", "add", "-m", "x", "--status", "maybe"}).exit_code, 1);
  EXPECT_EQ(rastro({"lesson", "add", "-m", "x", "--training", "99"}).exit_code, 1);
  EXPECT_EQ(rastro({"query", "training", "results.accuracy>high"}).exit_code, 1);
  EXPECT_EQ(rastro({"query", "nonsense"}).exit_code, 1);
  EXPECT_EQ(rastro({"export", "--mlschema", "7"}).exit_code, 1);
  EXPECT_EQ(rastro({"no-such-command"}).exit_code, 1);
  EXPECT_EQ(rastro({"report", "--task", "Format Data", "--chronology"}).exit_code, 1);
  EXPECT_EQ(rastro({"--help"}).exit_code, 0);
}

TEST_F(Cli, CorruptTrailExitsTwo) {
  init();
  append_text(dir_ / "actions.jsonl", "{\"schema_version\":1,\"code\":1}\n");
  const auto r = rastro({"query", "action"});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("actions.jsonl:1"), std::string::npos) << r.err;
}

TEST_F(Cli, StrictRefusesRedundantDrafts) {
  init();
  ASSERT_EQ(rastro({"action", "add", "-m", "Program modified (shallow) to also record recall and f1-micro"}).exit_code,
            0);
  auto r = rastro({"action", "add", "-m", "record recall and f1-micro", "--strict"});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("warning: similar to action 1 (jaccard 0.50)"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("not registered"), std::string::npos);
  r = rastro({"action", "add", "-m", "record recall and f1-micro"});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out, "2\n");
  EXPECT_NE(r.err.find("warning: similar to action 1"), std::string::npos);
}

TEST_F(Cli, TrainingAddAndStats) {
  init();
  std::string lines;
  for (auto [algo, acc] : std::vector<std::pair<std::string, double>>{
           {"MLP", 0.905}, {"MLP", 0.915}, {"LGBM", 0.885}, {"LGBM", 0.895}}) {
    auto r = training(algo, {{"accuracy", scalar(acc)}});
    r.context.registered_at = at(2019, 5, 1);
    lines += encode_line(to_json(r)) + "\n";
  }
  lines += encode_line(to_json([] {
             auto r = training("SVM");
             r.context.registered_at = at(2019, 5, 2);
             return r;
           }())) +
           "\n";
  auto r = rastro({"training", "add", "--record", "-"}, lines);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, "1\n2\n3\n4\n5\n");

  r = rastro({"stats", "--group-by", "training_params.algorithm", "--metric", "results.accuracy"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out,
            "training_params.algorithm\tn\tmean\tstd\tmin\tq1\tmedian\tq3\tmax\n"
            "LGBM\t2\t0.8900\t0.0071\t0.8850\t0.8875\t0.8900\t0.8925\t0.8950\n"
            "MLP\t2\t0.9100\t0.0071\t0.9050\t0.9075\t0.9100\t0.9125\t0.9150\n"
            "skipped: 1 record(s) without results.accuracy\n");

  r = rastro({"stats", "--group-by", "training_params.algorithm", "--metric", "results.accuracy", "--json"});
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j.at("skipped"), 1);
  EXPECT_EQ(j.at("groups").size(), 2u);
  EXPECT_EQ(j.at("groups")[1].at("value"), "MLP");

  r = rastro({"query", "training", "--top", "results.accuracy", "-k", "1"});
  EXPECT_EQ(r.out, "2019-05-01T00:00:00Z training 2 [MLP] succeeded accuracy=0.9150\n");

  // A bad record in the batch rejects the whole batch.
  r = rastro({"training", "add", "--record", "-"}, lines + "{\"not\": \"a record\"}\n");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(count_lines(dir_ / "trainings.jsonl"), 5u);
}

TEST_F(Cli, RunRegistersTheCommand) {
  init();
  auto r = rastro({"run", "--algorithm", "MLP", "--dataset", "Cladop documents", "--param", "batch_size=256",
                   "--param", "optimizer=Adam", "--quiet", "--", "/bin/sh", "-c", "exit 0"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, "1\n");
  r = rastro({"run", "--algorithm", "MLP", "--dataset", "d", "--quiet", "--", "/bin/sh", "-c",
              "echo 'out of memory' >&2; exit 1"});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.out, "2\n");
  r = rastro({"query", "training", "context.status=failed", "--json"});
  const auto arr = Json::parse(r.out);
  ASSERT_EQ(arr.size(), 1u);
  EXPECT_EQ(arr[0].at("context").at("error_message"), "out of memory");

  r = rastro({"export", "--mlschema", "1"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto doc = Json::parse(r.out);
  EXPECT_EQ(doc.at("Run").at("HyperParameterSetting")[0].at("HyperParameter"), "batch_size");
  EXPECT_EQ(doc.at("Run").at("HyperParameterSetting")[0].at("value"), 256);
}

TEST_F(Cli, SynthesizeAndMonitor) {
  init();
  std::string lines;
  for (double a : {0.88, 0.89, 0.90}) {
    auto r = training("LGBM", {{"accuracy", scalar(a)}, {"f1_micro", scalar(a)}});
    r.context.registered_at = at(2019, 4, 1);
    lines += encode_line(to_json(r)) + "\n";
  }
  ASSERT_EQ(rastro({"training", "add", "--record", "-"}, lines).exit_code, 0);
  auto r = rastro({"synthesize", "--json"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto cs = Json::parse(r.out);
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].at("kind"), "equal-metrics");
  EXPECT_EQ(cs[0].at("evidence"), (Json{1, 2, 3}));

  const std::string healthy = "2019-08-01T00:00:00Z,0.91\n2019-09-01T00:00:00Z,0.905\n";
  const std::string degraded = "2019-08-01T00:00:00Z,0.91\n2019-09-01T00:00:00Z,0.88\n";
  r = rastro({"monitor", "--baseline", "0.911", "--threshold", "0.02", "--series", "-", "--json"}, healthy);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(Json::parse(r.out).at("status"), "healthy");
  r = rastro({"monitor", "--baseline", "0.911", "--threshold", "0.02", "--series", "-", "--fail-on-degraded"},
             degraded);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_TRUE(r.out.starts_with("degraded"));
}

TEST(CliGolden, ReportsMatchTheFixture) {
  TempDir dir;
  build_fixture_trail(dir.path());
  const std::string d = dir.path().string();
  auto r = run_cli({"--dir", d, "report", "--task", "Select Data"});
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, slurp(golden_dir() / "select_data.md"));
  r = run_cli({"--dir", d, "report", "--task", "Project of tests"});
  EXPECT_EQ(r.out, slurp(golden_dir() / "project_of_tests.md"));
  r = run_cli({"--dir", d, "report", "--chronology"});
  EXPECT_EQ(r.out, slurp(golden_dir() / "chronology.md"));
}
