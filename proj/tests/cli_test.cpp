/*
 * Copyright 2026 The oodkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cli/cli.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "oodkit/datastore.hpp"
#include "oodkit/error.hpp"
#include "test_util.hpp"

namespace oodkit::cli {
namespace {

using nlohmann::json;
using oodkit::testing::TempDir;

const std::string kData = OODKIT_DATA_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result Exec(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = Run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> JournalLines(const std::string& path) {
  std::vector<json> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

int ExitFor(ErrorCode code) { return Error(code, "").exit_code(); }

TEST(CliTest, ScoreToyLogits) {
  TempDir dir;
  const Result r = Exec({"score", "--input", kData + "/toy_logits.csv",
                         "--method", "logitgap", "--out", dir / "s.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto scores = LoadScoreColumn(dir / "s.csv");
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_NEAR(scores[0], 1.5404, 1e-4);
  EXPECT_NEAR(scores[1], 1.54265, 1e-4);
  const json summary = json::parse(r.out);
  EXPECT_EQ(summary["n"], 2);
  EXPECT_EQ(summary["scorer"]["method"], "logitgap");
}

TEST(CliTest, ScoreMcm) {
  TempDir dir;
  const Result r = Exec({"score", "--input", kData + "/toy_logits.csv",
                         "--method", "mcm", "--tau", "1", "--out",
                         dir / "s.bin"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (double s : LoadScoreColumn(dir / "s.bin")) EXPECT_NEAR(s, 0.70, 0.005);
}

TEST(CliTest, ScoreBadTopN) {
  const Result r = Exec({"score", "--input", kData + "/toy_logits.csv",
                         "--method", "logitgap_topn", "--top-n", "1"});
  EXPECT_EQ(r.code, ExitFor(ErrorCode::kBadN));
  EXPECT_NE(r.err.find("BadN"), std::string::npos) << r.err;
}

TEST(CliTest, ScoreFromFeatures) {
  const Result r = Exec({"score", "--features", kData + "/toy_features.csv",
                         "--prototypes", kData + "/toy_prototypes.csv",
                         "--method", "logitgap_topn", "--scale", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json summary = json::parse(r.out);
  EXPECT_EQ(summary["n"], 60);
  // Default N for five classes is half of K, rounded.
  EXPECT_EQ(summary["scorer"]["top_n"], 3);
}

TEST(CliTest, UsageErrors) {
  EXPECT_EQ(Exec({}).code, kExitUsage);
  EXPECT_EQ(Exec({"nonsense"}).code, kExitUsage);
  EXPECT_EQ(Exec({"score", "--bogus", "1"}).code, kExitUsage);
  EXPECT_EQ(Exec({"score"}).code, ExitFor(ErrorCode::kUsage));
  EXPECT_EQ(Exec({"score", "--input", "/nonexistent.csv"}).code,
            ExitFor(ErrorCode::kIoFailure));
  EXPECT_EQ(Exec({"score", "--input", kData + "/toy_logits.csv", "--tau",
                  "abc"})
                .code,
            ExitFor(ErrorCode::kInvalidConfig));
  EXPECT_EQ(Exec({"--version"}).code, kExitOk);
}

TEST(CliTest, EvalFixture) {
  TempDir dir;
  const std::string journal = dir / "journal.jsonl";
  const Result r = Exec({"eval", "--input", kData + "/id_scores.csv", "--ood",
                         kData + "/ood_scores.csv", "--journal", journal,
                         "--method", "toy", "--name", "fixture"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json rec = json::parse(r.out);
  EXPECT_EQ(ValidateRunRecord(rec), "");
  EXPECT_EQ(rec["payload"]["fpr95"], 0.5);
  EXPECT_NEAR(rec["payload"]["auroc"].get<double>(), 2.0 / 3.0, 1e-12);
  // ID 3, 2, 1 against OOD 2.5, 0.5: precision 1, 2/3, 3/4 at each recall
  // step of 1/3.
  EXPECT_NEAR(rec["payload"]["aupr_in"].get<double>(), 29.0 / 36.0, 1e-12);
  EXPECT_EQ(rec["payload"]["lambda95"], 1.0);
}

TEST(CliTest, EvalAppendsToJournal) {
  TempDir dir;
  const std::string journal = dir / "j.jsonl";
  for (int i = 0; i < 3; ++i) {
    ASSERT_EQ(Exec({"eval", "--input", kData + "/separable_id_scores.csv",
                    "--ood", kData + "/separable_ood_scores.csv", "--journal",
                    journal})
                  .code,
              0);
  }
  const auto lines = JournalLines(journal);
  ASSERT_EQ(lines.size(), 3u);
  for (const json& rec : lines) {
    EXPECT_EQ(ValidateRunRecord(rec), "");
    EXPECT_EQ(rec["payload"]["fpr95"], 0.0);
    EXPECT_EQ(rec["payload"]["auroc"], 1.0);
    EXPECT_EQ(rec["payload"]["aupr_in"], 1.0);
    EXPECT_EQ(rec["toolkit_version"], kToolkitVersion);
    EXPECT_EQ(rec["datasets"].size(), 2u);
  }
}

TEST(CliTest, EvalTableFormats) {
  const Result md = Exec({"eval", "--input", kData + "/id_scores.csv", "--ood",
                          kData + "/ood_scores.csv", "--format", "markdown",
                          "--method", "m", "--name", "d"});
  ASSERT_EQ(md.code, 0);
  EXPECT_EQ(md.out.rfind("| method | dataset | FPR95 | AUROC | AUPR |", 0), 0u)
      << md.out;
  const Result csv = Exec({"eval", "--input", kData + "/id_scores.csv", "--ood",
                           kData + "/ood_scores.csv", "--format", "csv"});
  ASSERT_EQ(csv.code, 0);
  EXPECT_EQ(csv.out.rfind("method,dataset,FPR95,AUROC,AUPR\n,,0.5,", 0), 0u)
      << csv.out;
}

TEST(CliTest, SelectNAdaptive) {
  TempDir dir;
  const std::vector<std::string> args = {
      "select-n", "--features", kData + "/toy_features.csv", "--prototypes",
      kData + "/toy_prototypes.csv", "--seed", "7", "--scale", "10",
      "--out", dir / "n.json"};
  const Result a = Exec(args);
  ASSERT_EQ(a.code, 0) << a.err;
  const std::string first = Slurp(dir / "n.json");
  ASSERT_EQ(Exec(args).code, 0);
  EXPECT_EQ(Slurp(dir / "n.json"), first);

  const json sel = json::parse(first);
  EXPECT_EQ(sel["mode"], "adaptive");
  EXPECT_EQ(sel["n_min"], 2);
  EXPECT_EQ(sel["n_max"], 5);
  EXPECT_EQ(sel["gap_curve"].size(), 4u);
  EXPECT_GE(sel["n_star"].get<int>(), 2);
  EXPECT_LE(sel["n_star"].get<int>(), 5);
  EXPECT_EQ(ValidateRunRecord(json::parse(a.out)), "");
}

TEST(CliTest, SelectNFixed) {
  const Result r = Exec({"select-n", "--fixed", "--k", "1000"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json rec = json::parse(r.out);
  EXPECT_EQ(rec["payload"]["n_star"], 200);
  EXPECT_EQ(rec["payload"]["mode"], "fixed");
  const Result p = Exec({"select-n", "--fixed", "--prototypes",
                         kData + "/toy_prototypes.csv"});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(json::parse(p.out)["payload"]["n_star"], 3);
  EXPECT_EQ(Exec({"select-n", "--fixed"}).code, ExitFor(ErrorCode::kUsage));
}

TEST(CliTest, SynthOodIsDeterministic) {
  TempDir dir;
  const std::vector<std::string> args = {
      "synth-ood", "--features", kData + "/toy_features.csv", "--alpha", "0.3",
      "--beta", "0.8", "--seed", "5", "--out", dir / "o.bin"};
  ASSERT_EQ(Exec(args).code, 0);
  const std::string first = Slurp(dir / "o.bin");
  ASSERT_EQ(Exec(args).code, 0);
  EXPECT_EQ(Slurp(dir / "o.bin"), first);
  const Matrix m = LoadMatrix(dir / "o.bin");
  EXPECT_EQ(m.rows(), 60u);
  EXPECT_EQ(m.cols(), 8u);
  EXPECT_EQ(Exec({"synth-ood", "--features", kData + "/toy_features.csv"}).code,
            ExitFor(ErrorCode::kUsage));
}

TEST(CliTest, SimulateDefault) {
  const Result r = Exec({"simulate", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json rec = json::parse(r.out);
  EXPECT_EQ(ValidateRunRecord(rec), "");
  EXPECT_EQ(rec["config"]["seed"], 3);
  EXPECT_EQ(rec["payload"]["name"], "nonmax-order");
  EXPECT_EQ(rec["payload"]["passed"], true);
}

TEST(CliTest, SimulateChain) {
  const Result r = Exec({"simulate", "--theorem", "appendixA-chain", "--k", "10",
                         "--samples", "5000"});
  const json rec = json::parse(r.out);
  EXPECT_EQ(rec["config"]["tau"], 19.0);
  EXPECT_EQ(rec["payload"]["statistics"]["identity_ok"], 1.0);
  EXPECT_EQ(rec["payload"]["statistics"]["bound_ok"], 1.0);
  EXPECT_EQ(r.code, rec["payload"]["passed"].get<bool>() ? 0 : kExitTheoremFailed);
}

TEST(CliTest, SimulateErrors) {
  EXPECT_EQ(Exec({"simulate", "--theorem", "nope"}).code,
            ExitFor(ErrorCode::kUsage));
  EXPECT_EQ(Exec({"simulate", "--k", "3"}).code, ExitFor(ErrorCode::kBadWorld));
  EXPECT_EQ(Exec({"simulate", "--alpha", "0"}).code,
            ExitFor(ErrorCode::kDegenerateMixture));
}

TEST(CliTest, SimulateWorldConfig) {
  TempDir dir;
  const Result r = Exec({"simulate", "--config", kData + "/gaussian_world.json",
                         "--samples", "20000"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["payload"]["samples"], 20000);
}

// The echoed config, fed back through --config, reproduces the payload.
TEST(CliTest, ConfigEchoReproducesRun) {
  TempDir dir;
  const Result first = Exec({"select-n", "--features",
                             kData + "/toy_features.csv", "--prototypes",
                             kData + "/toy_prototypes.csv", "--seed", "11",
                             "--alpha", "0.4"});
  ASSERT_EQ(first.code, 0) << first.err;
  const json rec = json::parse(first.out);
  std::ofstream(dir / "cfg.json") << rec["config"].dump();
  const Result second = Exec({"select-n", "--config", dir / "cfg.json"});
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_EQ(json::parse(second.out)["payload"], rec["payload"]);
  EXPECT_EQ(json::parse(second.out)["config"], rec["config"]);
}

TEST(CliTest, ExplicitFlagsOverrideConfig) {
  TempDir dir;
  std::ofstream(dir / "cfg.json")
      << R"({"score": {"method": "mcm", "tau": 5.0}})";
  const Result r = Exec({"score", "--config", dir / "cfg.json", "--input",
                         kData + "/toy_logits.csv", "--tau", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json s = json::parse(r.out);
  EXPECT_EQ(s["scorer"]["method"], "mcm");
  EXPECT_EQ(s["scorer"]["tau"], 1.0);
}

TEST(CliTest, ReportFromLogits) {
  TempDir dir;
  const Result r = Exec({"report", "--input", kData + "/toy_logits.csv",
                         "--out", dir / "rep"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string curve = Slurp(dir / "rep/sorted_logits.csv");
  EXPECT_EQ(curve.rfind("rank,mean_logit,cohort\n1,", 0), 0u) << curve;
  const std::string classes = Slurp(dir / "rep/per_class_scores.csv");
  EXPECT_EQ(classes.rfind("predicted_class,cohort,count,mean,min,max\n0,id,2,", 0),
            0u)
      << classes;
}

TEST(CliTest, ReportFromJournal) {
  TempDir dir;
  const std::string journal = dir / "j.jsonl";
  ASSERT_EQ(Exec({"eval", "--input", kData + "/id_scores.csv", "--ood",
                  kData + "/ood_scores.csv", "--journal", journal, "--method",
                  "b", "--name", "toy"})
                .code,
            0);
  ASSERT_EQ(Exec({"eval", "--input", kData + "/separable_id_scores.csv",
                  "--ood", kData + "/separable_ood_scores.csv", "--journal",
                  journal, "--method", "a", "--name", "sep"})
                .code,
            0);
  ASSERT_EQ(Exec({"simulate", "--samples", "2000", "--journal", journal}).code, 0);
  const Result r = Exec({"report", "--journal", journal, "--out", dir / "rep",
                         "--format", "markdown"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Slurp(dir / "rep/benchmark.csv"),
            "method,dataset,fpr95,auroc,aupr_in,n_id,n_ood\n"
            "a,sep,0,1,1,4,3\n"
            "b,toy,0.5,0.66666666666666663,0.80555555555555558,3,2\n");
  EXPECT_NE(r.out.find("| a | sep |"), std::string::npos);
  EXPECT_EQ(Exec({"report"}).code, ExitFor(ErrorCode::kUsage));
}

TEST(CliTest, ReportKeepsRepeatedRuns) {
  TempDir dir;
  const std::string journal = dir / "j.jsonl";
  for (int i = 0; i < 2; ++i) {
    ASSERT_EQ(Exec({"eval", "--input", kData + "/id_scores.csv", "--ood",
                    kData + "/ood_scores.csv", "--journal", journal, "--method",
                    "m", "--name", "d"})
                  .code,
              0);
  }
  ASSERT_EQ(Exec({"report", "--journal", journal, "--out", dir.path().string()}).code,
            0);
  std::istringstream table(Slurp(dir / "benchmark.csv"));
  std::string header, first, second, extra;
  std::getline(table, header);
  std::getline(table, first);
  std::getline(table, second);
  EXPECT_FALSE(std::getline(table, extra));
  EXPECT_EQ(first, second);
  EXPECT_EQ(first.rfind("m,d,0.5,", 0), 0u);
}

TEST(CliTest, ValidateRunRecordRejectsBadShapes) {
  EXPECT_NE(ValidateRunRecord(json::array()), "");
  json rec = {{"timestamp", "t"},      {"toolkit_version", "0.1.0"},
              {"command", "eval"},     {"config", json::object()},
              {"payload_type", "EvalResult"},
              {"payload", {{"fpr95", 0}, {"auroc", 1}, {"aupr_in", 1},
                           {"lambda95", 0}, {"n_id", 1}, {"n_ood", 1}}},
              {"datasets", json::array()}};
  EXPECT_EQ(ValidateRunRecord(rec), "");
  rec["payload"].erase("auroc");
  EXPECT_EQ(ValidateRunRecord(rec), "payload missing auroc");
  rec.erase("timestamp");
  EXPECT_EQ(ValidateRunRecord(rec), "missing timestamp");
}

TEST(CliTest, TimestampHonorsSourceDateEpoch) {
  ::setenv("SOURCE_DATE_EPOCH", "0", 1);
  const Result r = Exec({"select-n", "--fixed", "--k", "10"});
  ::unsetenv("SOURCE_DATE_EPOCH");
  EXPECT_EQ(json::parse(r.out)["timestamp"], "1970-01-01T00:00:00Z");
}

}  // namespace
}  // namespace oodkit::cli
