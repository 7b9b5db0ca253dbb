// Copyright 2026 The uhdiqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kRoot = fs::temp_directory_path() / "uhdiqa_test_cli";

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run Cli(const std::string& args) {
  const std::string cmd = std::string(UHDIQA_CLI_PATH) + " " + args + " >" + (kRoot / "stdout").string() +
                          " 2>" + (kRoot / "stderr").string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = Slurp(kRoot / "stdout");
  r.err = Slurp(kRoot / "stderr");
  return r;
}

const std::string kModelFlags =
    " --backbone tiny --input-size 32 --hidden-dim 8 --sw 60 --sh 60 -n 2 --epochs 1 --batch-size 4 --lr 1e-3";

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    const auto gen = Cli("gen-synthetic -q --out-dir " + (kRoot / "data").string() +
                         " --scenes 4 --width 240 --height 120 --tile 60 --factors 2,3");
    ASSERT_EQ(gen.code, 0) << gen.err;
    const auto train = Cli("train -q --manifest " + Manifest() + " --out-dir " + (kRoot / "run").string() + kModelFlags);
    ASSERT_EQ(train.code, 0) << train.err;
  }
  static void TearDownTestSuite() { fs::remove_all(kRoot); }

  static std::string Manifest() { return (kRoot / "data" / "manifest.csv").string(); }
  static std::string Checkpoint() { return (kRoot / "run" / "checkpoint.uhdw").string(); }
};

TEST_F(CliTest, GenSyntheticManifest) {
  const auto text = Slurp(Manifest());
  EXPECT_EQ(text.rfind("media_path,scene_id,mos,mos_lo,mos_hi,label,media_kind\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 4 * 3);
  EXPECT_TRUE(fs::exists(kRoot / "data" / "scene_0" / "f3_bilinear.png"));
}

TEST_F(CliTest, SelectPatchesToStdout) {
  const auto r = Cli("select-patches " + (kRoot / "data" / "scene_1" / "pristine.png").string() + " --sw 60 --sh 60 -n 3");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "index,x0,y0,sw,sh,score,selected");
  int rows = 0, selected = 0;
  while (std::getline(lines, line)) {
    ++rows;
    selected += line.back() == '1';
  }
  EXPECT_EQ(rows, 8);
  EXPECT_EQ(selected, 3);
}

TEST_F(CliTest, SelectPatchesPreview) {
  const auto dir = kRoot / "sel";
  const auto r = Cli("select-patches -q " + (kRoot / "data" / "scene_1" / "pristine.png").string() +
                     " --sw 60 --sh 60 --preview --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "patches.csv"));
  EXPECT_TRUE(fs::exists(dir / "preview.png"));
}

TEST_F(CliTest, TrainWritesArtifacts) {
  const auto run = kRoot / "run";
  EXPECT_TRUE(fs::exists(run / "checkpoint.uhdw"));
  const auto log = Slurp(run / "train_log.csv");
  EXPECT_EQ(log.rfind("epoch,l_c,l_q,l_overall,sigma1_sq,sigma2_sq,lr\n0,", 0), 0u);
  const auto cfg = json::parse(Slurp(run / "run_config.json"));
  EXPECT_EQ(cfg["backbone"], "tiny");
  EXPECT_EQ(cfg["input_size"], 32);
  EXPECT_FALSE(cfg.contains("out_dir"));
}

TEST_F(CliTest, EvaluateCheckpointReport) {
  const auto dir = kRoot / "eval";
  const auto r = Cli("evaluate -q --manifest " + Manifest() + " --checkpoint " + Checkpoint() +
                     " --trials 2 --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(Slurp(dir / "eval_report.json"));
  EXPECT_EQ(j["schema"], "uhdiqa.eval_report.v1");
  EXPECT_EQ(j["mode"], "checkpoint");
  EXPECT_EQ(j["n_splits"], 2);
  EXPECT_EQ(j["splits"][0]["n_test"], 3);
}

TEST_F(CliTest, EvaluateNeedsCheckpointOrRetrain) {
  const auto r = Cli("evaluate -q --manifest " + Manifest() + " --out-dir " + (kRoot / "e2").string());
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, EvaluateRejectsIncompatibleConfig) {
  const auto r = Cli("evaluate -q --manifest " + Manifest() + " --checkpoint " + Checkpoint() +
                     " --stage-mask 0111 --out-dir " + (kRoot / "e3").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("shape"), std::string::npos);
}

TEST_F(CliTest, ScorePrintsJson) {
  const auto r = Cli("score -q " + (kRoot / "data" / "scene_0" / "pristine.png").string() + " --checkpoint " + Checkpoint());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["patches_used"], 2);
  EXPECT_TRUE(j["decision"] == "true_4k" || j["decision"] == "pseudo_4k");
  EXPECT_GE(j["q_score"].get<double>(), 0.0);
  EXPECT_LE(j["q_score"].get<double>(), 100.0);
}

TEST_F(CliTest, ConfigPrecedence) {
  std::ofstream(kRoot / "cfg.json") << R"({"epochs": 3, "hidden_dim": 6, "lr": 0.5})";
  const auto dir = kRoot / "run2";
  const auto r = Cli("train -q --manifest " + Manifest() + " --config " + (kRoot / "cfg.json").string() +
                     " --out-dir " + dir.string() +
                     " --backbone tiny --input-size 32 --sw 60 --sh 60 -n 2 --epochs 1 --lr 1e-3");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cfg = json::parse(Slurp(dir / "run_config.json"));
  EXPECT_EQ(cfg["epochs"], 1);
  EXPECT_EQ(cfg["hidden_dim"], 6);
  EXPECT_EQ(cfg["lr"], 1e-3);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(Cli("").code, 2);
  EXPECT_EQ(Cli("train --manifest /nonexistent.csv --out-dir " + (kRoot / "x").string()).code, 2);
  EXPECT_EQ(Cli("select-patches " + (kRoot / "data" / "scene_0" / "pristine.png").string() + " --sw 500").code, 2);

  std::ofstream(kRoot / "unknown.json") << R"({"learning_rate": 1})";
  EXPECT_EQ(Cli("train --manifest " + Manifest() + " --config " + (kRoot / "unknown.json").string() +
                " --out-dir " + (kRoot / "x").string())
                .code,
            2);

  std::ofstream(kRoot / "junk.uhdw") << "not an archive";
  const auto bad = Cli("score " + (kRoot / "data" / "scene_0" / "pristine.png").string() + " --checkpoint " +
                       (kRoot / "junk.uhdw").string());
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.err.find("uhdiqa:"), std::string::npos);
}

TEST_F(CliTest, AblateLossModes) {
  const auto dir = kRoot / "abl";
  const auto r = Cli("ablate -q --sweep loss_modes --manifest " + Manifest() + " --trials 1 --out-dir " + dir.string() +
                     kModelFlags);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(Slurp(dir / "ablation_loss_modes.json"));
  EXPECT_EQ(j["rows"].size(), 4u);
  EXPECT_TRUE(fs::exists(dir / "ablation_loss_modes.csv"));
  EXPECT_EQ(Cli("ablate -q --sweep depth --manifest " + Manifest() + " --out-dir " + dir.string()).code, 2);
}

}  // namespace
