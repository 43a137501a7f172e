#include <gtest/gtest.h>

#include <cstdio>
#include <sys/wait.h>

#include "test_support.hpp"

using namespace scalewise;
using namespace scalewise::testing;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(SCALEWISE_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string scripted() { return "--backend scripted:" + data_path("fixtures/phq8_backend.json"); }

}  // namespace

TEST(Cli, ValidateExitCodes) {
  EXPECT_EQ(cli("validate --scale " + data_path("scales/phq8.json")).code, 0);
  TempDir dir("sw-cli");
  auto j = scale_to_json(*phq8());
  j["category_bands"][1]["min_total"] = 11;
  std::ofstream(dir.path() / "bad.json") << j.dump();
  const auto bad = cli("validate --scale " + (dir.path() / "bad.json").string());
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("gap at 10"), std::string::npos);
  EXPECT_EQ(cli("validate --scale " + (dir.path() / "missing.json").string()).code, 4);
}

TEST(Cli, RunWritesRecordMemoryAndReport) {
  TempDir dir("sw-cli");
  const auto r = cli("run --scale " + data_path("scales/phq8.json") + " --script " +
                     data_path("fixtures/phq8_answers.json") + " --uid demo " + scripted() + " --out " +
                     dir.path().string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("total: 10"), std::string::npos);
  EXPECT_NE(r.out.find("category: depressed"), std::string::npos);
  const auto record = parse_record(read_file(dir.path() / "default-demo.json"));
  EXPECT_EQ(record.phase, Phase::Done);
  EXPECT_EQ(record.created_at, "1970-01-01T00:00:00Z");
  EXPECT_EQ(read_file(dir.path() / "default-demo.memory.json"), serialize_memory(golden_state().memory));
  EXPECT_EQ(read_file(dir.path() / "default-demo.report.md"), golden_state().result->report);
}

TEST(Cli, RunWithPersonaRolePlay) {
  TempDir dir("sw-cli");
  const auto r = cli("run --scale " + data_path("scales/phq8.json") + " --persona " +
                     data_path("fixtures/personas_demo.jsonl") + " --persona-uid p-302 " + scripted() +
                     " --tag demo --out " + dir.path().string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "demo-p-302.json"));
}

TEST(Cli, RunAbortExitCodeReflectsCategory) {
  TempDir dir("sw-cli");
  std::ofstream(dir.path() / "down.json") << R"({"replies": {"question": [{"$error": "offline"}]}})";
  const auto r = cli("run --scale " + data_path("scales/phq8.json") + " --script " +
                     data_path("fixtures/phq8_answers.json") + " --backend scripted:" +
                     (dir.path() / "down.json").string() + " --out " + dir.path().string());
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("error[backend]"), std::string::npos);
  EXPECT_EQ(parse_record(read_file(dir.path() / "default-respondent.json")).phase, Phase::Aborted);
}

TEST(Cli, RunRejectsBadThresholds) {
  EXPECT_EQ(cli("run --scale x --script y " + scripted() + " --out /tmp --theta 3").code, 2);
  EXPECT_EQ(cli("run --scale x --script y " + scripted() + " --out /tmp --depth 0").code, 2);
}

TEST(Cli, EvalWritesArtifacts) {
  TempDir dir("sw-cli");
  const auto r = cli("eval --scale " + data_path("scales/phq8.json") + " --personas " +
                     data_path("fixtures/personas_demo.jsonl") + " " + scripted() + " --out " + dir.path().string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Macro F1"), std::string::npos);
  const auto metrics = nlohmann::json::parse(read_file(dir.path() / "metrics.json"));
  EXPECT_DOUBLE_EQ(metrics.at("mae").get<double>(), 3.0);
  EXPECT_EQ(metrics.at("n"), 2);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "outcomes.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "metrics.txt"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "sessions" / "default-p-301.json"));
}

TEST(Cli, PersonaConverter) {
  TempDir dir("sw-cli");
  std::ofstream(dir.path() / "t.tsv") << "start_time\tstop_time\tspeaker\tvalue\n0\t1\tEllie\thi\n1\t2\tParticipant\thello\n";
  const auto r = cli("persona --tsv " + (dir.path() / "t.tsv").string() +
                     " --uid 300 --gold-scores 1,1,1,1,1,1,1,1 --gold-label control --attr age=40");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto p = persona_from_json(nlohmann::json::parse(r.out));
  EXPECT_EQ(p.gold_total, 8);
  EXPECT_EQ(p.transcript_turns.size(), 2u);
  EXPECT_EQ(p.attributes.at("age"), "40");
}

TEST(Cli, TemplatesCommandWritesDefaults) {
  TempDir dir("sw-cli");
  ASSERT_EQ(cli("templates --out " + dir.path().string()).code, 0);
  EXPECT_EQ(load_templates(dir.path()), default_templates());
}
