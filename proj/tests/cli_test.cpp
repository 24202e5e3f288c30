// Copyright 2026 The pdac Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "pdac/cli/run_config.hpp"

namespace fs = std::filesystem;
using namespace pdac;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& args) {
  const std::string cmd = std::string(PDAC_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

class CliTest : public ::testing::Test {
 protected:
  static fs::path dir;
  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / ("pdac-cli-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    ASSERT_EQ(run("synth --n 3 --seed 5 --out " + (dir / "corpus").string()), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir); }
  static std::string corpus() { return (dir / "corpus").string(); }
  static std::string small() {
    return " --set lstm_layers=1 --set lstm_hidden=8 --set cnn_filters=3 --set affinity_dim=4"
           " --set prosody_embed_dim=4 --set epochs=2 --set batch_size=4 ";
  }
};
fs::path CliTest::dir;

}  // namespace

TEST(RunConfig, OverridesParseJsonOrFallBackToString) {
  cli::RunConfig c;
  c = cli::apply_override(c, "epochs=7");
  c = cli::apply_override(c, "lr=5e-4");
  c = cli::apply_override(c, "ablation=no_local_gate");
  c = cli::apply_override(c, "cnn_kernel_lengths=[3,9]");
  c = cli::apply_override(c, "precision=float64");
  EXPECT_EQ(c.train.epochs, 7u);
  EXPECT_DOUBLE_EQ(c.train.lr, 5e-4);
  EXPECT_EQ(c.model.ablation, model::Ablation::no_local_gate);
  EXPECT_EQ(c.model.cnn_kernel_lengths, (std::vector<std::size_t>{3, 9}));
  EXPECT_TRUE(c.train.double_precision);
}

TEST(RunConfig, UnknownKeysAreRejectedWithTheValidList) {
  try {
    cli::apply_override({}, "hidden=3");
    FAIL() << "accepted an unknown key";
  } catch (const cli::ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'hidden'"), std::string::npos);
    for (const auto& k : cli::valid_keys()) EXPECT_NE(msg.find(k), std::string::npos) << k;
  }
  EXPECT_THROW(cli::apply_override({}, "n_classes=3"), cli::ConfigError);
  EXPECT_THROW(cli::apply_override({}, "epochs"), cli::ConfigError);
  EXPECT_THROW(cli::apply_override({}, "=3"), cli::ConfigError);
}

TEST(RunConfig, BadValuesAreConfigErrors) {
  EXPECT_THROW(cli::apply_override({}, "epochs=many"), cli::ConfigError);
  EXPECT_THROW(cli::apply_override({}, "ablation=everything"), cli::ConfigError);
  EXPECT_THROW(cli::apply_override({}, "precision=float16"), cli::ConfigError);
  EXPECT_THROW(cli::apply_patch({}, json::array()), cli::ConfigError);
}

TEST(RunConfig, FileThenOverridesAndRoundTrip) {
  const auto path = fs::temp_directory_path() / "pdac-config-test.json";
  {
    std::ofstream(path) << R"({"epochs": 3, "lr": 0.01, "ablation": "baseline"})";
  }
  auto c = cli::apply_file({}, path.string());
  c = cli::apply_override(c, "epochs=4");
  fs::remove(path);
  EXPECT_EQ(c.train.epochs, 4u);
  EXPECT_DOUBLE_EQ(c.train.lr, 0.01);
  EXPECT_EQ(c.model.ablation, model::Ablation::baseline);
  const auto again = cli::from_flat_json(cli::to_flat_json(c));
  EXPECT_EQ(cli::to_flat_json(again), cli::to_flat_json(c));
}

TEST_F(CliTest, SynthIsDeterministicPerSeed) {
  const auto other = dir / "corpus2";
  ASSERT_EQ(run("synth --n 3 --seed 5 --out " + other.string()), 0);
  for (const char* f : {"train.tsv", "validation.tsv", "test.tsv", "wav/train-rising-0002.wav", "wav/test-late_burst-0000.wav"})
    EXPECT_EQ(slurp(dir / "corpus" / f), slurp(other / f)) << f;
  auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
  EXPECT_EQ(lines(slurp(other / "validation.tsv")), 4);  // n / 2 per class
  EXPECT_EQ(lines(slurp(other / "test.tsv")), 4);
}

TEST_F(CliTest, TrainEvalAndGatesProduceTheirFiles) {
  const auto cache = dir / "feats.bin";
  ASSERT_EQ(run("extract " + corpus() + " --out " + cache.string()), 0);
  const auto out = dir / "train";
  ASSERT_EQ(run("train " + corpus() + small() + "--feature-cache " + cache.string() + " --out " + out.string()), 0);
  for (const char* f : {"report.json", "epochs.csv", "best.ckpt"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto report = json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report.at("runs").size(), 1u);
  EXPECT_EQ(report.at("ablation"), "full");

  const auto ev = dir / "eval.json";
  ASSERT_EQ(run("eval " + (out / "best.ckpt").string() + " " + corpus() + " --feature-cache " + cache.string() +
                " --out " + ev.string()),
            0);
  EXPECT_EQ(json::parse(slurp(ev)).at("accuracy"), report.at("test_accuracies")[0]);

  const auto gates = dir / "gates.jsonl";
  ASSERT_EQ(run("inspect-gates " + (out / "best.ckpt").string() + " " + corpus() + " --out " + gates.string()), 0);
  std::ifstream in(gates);
  std::size_t utterances = 0, summaries = 0;
  for (std::string line; std::getline(in, line);) {
    const auto j = json::parse(line);
    (j.at("type") == "utterance" ? utterances : summaries) += 1;
  }
  EXPECT_EQ(utterances, 4u);
  EXPECT_EQ(summaries, 4u);
}

TEST_F(CliTest, DoublePrecisionTrainingIsByteIdentical) {
  const auto a = dir / "det-a", b = dir / "det-b";
  const auto args = small() + "--set precision=float64 --seed 9 " + corpus();
  ASSERT_EQ(run("train" + args + " --out " + a.string()), 0);
  ASSERT_EQ(run("train" + args + " --out " + b.string()), 0);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_EQ(slurp(a / "epochs.csv"), slurp(b / "epochs.csv"));
}

TEST_F(CliTest, ProtocolComparesAgainstAReference) {
  const auto base = dir / "base", full = dir / "full";
  ASSERT_EQ(run("protocol " + corpus() + small() + "--set ablation=baseline --runs 2 --out " + base.string()), 0);
  ASSERT_EQ(run("protocol " + corpus() + small() + "--runs 2 --reference " + (base / "report.json").string() +
                " --out " + full.string()),
            0);
  const auto report = json::parse(slurp(full / "report.json"));
  EXPECT_EQ(report.at("seeds"), json::array({1, 2}));
  EXPECT_EQ(report.at("significance").at("reference"), "baseline");
  EXPECT_TRUE(report.at("significance").at("exact").get<bool>());
  EXPECT_TRUE(fs::exists(full / "run1" / "best.ckpt"));
  EXPECT_TRUE(fs::exists(full / "run1" / "epochs.csv"));
}

TEST_F(CliTest, OverridesMayPrecedeTheCorpus) {
  const auto out = dir / "order";
  ASSERT_EQ(run("train" + small() + "--set epochs=1 " + corpus() + " --out " + out.string()), 0);
  EXPECT_EQ(json::parse(slurp(out / "report.json")).at("train").at("epochs"), 1);
}

TEST_F(CliTest, ErrorsGiveNonZeroExit) {
  EXPECT_EQ(run("train " + corpus() + " --set bogus=1"), 2);
  EXPECT_EQ(run("train " + corpus() + " --set epochs=0"), 2);
  EXPECT_EQ(run("train " + corpus() + " --set checkpoint_dir=x"), 2);
  EXPECT_NE(run("train /definitely/not/here"), 0);
  EXPECT_NE(run(""), 0);
}

TEST(CliSelfcheck, PassesAndCatchesCorruptedGradients) {
  EXPECT_EQ(run("selfcheck"), 0);
  EXPECT_EQ(run("selfcheck --analytic-scale 1.01"), 1);
}
