#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hsa/cli.hpp"

namespace hsa {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "hsa_net");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / "hsa_test_cli";
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream(root_ / "tiny.cfg") << "layers=2\ndim=8\ntokens=2\nheads=2\nstate=2\nexperts=3\nepochs=2\n"
                                         "batch_size=4\nmax_atoms=16\n";
  }
  void TearDown() override { fs::remove_all(root_); }
  std::string path(const std::string& name) const { return (root_ / name).string(); }
  fs::path root_;
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  auto bad = run({"gen-data", "--no-such-flag"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("--no-such-flag"), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, RuntimeErrorsExitOne) {
  // A missing file is caught while parsing flags; a malformed one only when read.
  EXPECT_EQ(run({"train", "--dataset", path("missing.tsv"), "--out", path("x")}).code, 2);
  std::ofstream(root_ / "broken.tsv") << "CC(C\t1\n";
  EXPECT_EQ(run({"train", "--dataset", path("broken.tsv"), "--out", path("x")}).code, 1);
  std::ofstream(root_ / "bad.cfg") << "colour=red\n";
  EXPECT_EQ(run({"gen-data", "--config", path("bad.cfg"), "--out", path("y")}).code, 1);
}

TEST_F(CliTest, GenDataIsDeterministic) {
  ASSERT_EQ(run({"gen-data", "--seed", "7", "--count", "25", "--out", path("d1")}).code, 0);
  ASSERT_EQ(run({"gen-data", "--seed", "7", "--count", "25", "--out", path("d2")}).code, 0);
  const auto a = slurp(root_ / "d1" / "dataset.tsv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(root_ / "d2" / "dataset.tsv"));
  ASSERT_EQ(run({"gen-data", "--seed", "8", "--count", "25", "--out", path("d3")}).code, 0);
  EXPECT_NE(a, slurp(root_ / "d3" / "dataset.tsv"));
}

TEST_F(CliTest, GradCheckPasses) {
  auto r = run({"grad-check"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("max_rel_error"), std::string::npos);
}

TEST_F(CliTest, TrainEvalDiagnoseReport) {
  const auto cfg = path("tiny.cfg");
  ASSERT_EQ(run({"gen-data", "--config", cfg, "--count", "40", "--out", path("data")}).code, 0);
  const auto data = path("data/dataset.tsv");
  auto t = run({"train", "--config", cfg, "--dataset", data, "--out", path("model")});
  ASSERT_EQ(t.code, 0) << t.err;
  for (auto f : {"config.txt", "vocab.txt", "train_log.jsonl", "best.ckpt", "metrics.json"})
    EXPECT_TRUE(fs::exists(root_ / "model" / f)) << f;
  std::ifstream log(root_ / "model" / "train_log.jsonl");
  int epochs = 0;
  for (std::string line; std::getline(log, line); ++epochs) {
    auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("epoch") && j.contains("train_loss") && j.contains("val_metric") && j.contains("seconds"));
  }
  EXPECT_EQ(epochs, 2);
  EXPECT_NO_THROW((void)nlohmann::json::parse(slurp(root_ / "model" / "metrics.json")));

  ASSERT_EQ(run({"eval", "--dataset", data, "--model", path("model"), "--out", path("eval")}).code, 0);
  EXPECT_EQ(first_line(root_ / "eval" / "strata.csv"), "bin_lo,bin_hi,n,metric");
  EXPECT_NO_THROW((void)nlohmann::json::parse(slurp(root_ / "eval" / "eval_metrics.json")));

  ASSERT_EQ(run({"diagnose", "--dataset", data, "--model", path("model"), "--out", path("diag")}).code, 0);
  EXPECT_EQ(first_line(root_ / "diag" / "oversmoothing.csv"), "layer,cos_sim");
  EXPECT_EQ(first_line(root_ / "diag" / "embed.csv"), "id,x,y,label");
  EXPECT_EQ(first_line(root_ / "diag" / "dispersion.csv"), "layer,projector,dispersion");
  EXPECT_NO_THROW((void)nlohmann::json::parse(slurp(root_ / "diag" / "separation.json")));

  ASSERT_EQ(run({"gating-report", "--dataset", data, "--model", path("model"), "--out", path("gate")}).code, 0);
  EXPECT_EQ(first_line(root_ / "gate" / "gating.csv"), "layer,mamba_ratio");
  EXPECT_EQ(first_line(root_ / "gate" / "experts.csv"), "expert_id,count");

  // Second identical run: byte-identical metric files.
  ASSERT_EQ(run({"diagnose", "--dataset", data, "--model", path("model"), "--out", path("diag2")}).code, 0);
  for (auto f : {"oversmoothing.csv", "embed.csv", "dispersion.csv", "separation.json"})
    EXPECT_EQ(slurp(root_ / "diag" / f), slurp(root_ / "diag2" / f)) << f;
}

TEST_F(CliTest, Ablate) {
  const auto cfg = path("tiny.cfg");
  ASSERT_EQ(run({"gen-data", "--config", cfg, "--count", "20", "--out", path("data")}).code, 0);
  std::ofstream(root_ / "one.cfg") << "layers=1\ndim=8\ntokens=2\nheads=2\nstate=2\nexperts=2\nepochs=1\nbatch_size=8\n";
  auto r = run({"ablate", "--config", path("one.cfg"), "--dataset", path("data/dataset.tsv"), "--out", path("abl")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(root_ / "abl" / "ablation.csv");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[0], "variant,metric,best_epoch,hap_gate_calls,saf_gate_tokens");
}

}  // namespace
}  // namespace hsa
