// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end runs of the yolic binary in scratch workspaces.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "yolic/decode.hpp"
#include "yolic/image.hpp"

namespace yolic {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("yolic-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "-" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" YOLIC_CLI_PATH "' " + args + " 2>&1";
    CliRun r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  std::vector<double> loss_trace() const {
    std::istringstream in(read_file((dir_ / "ws/reports/train_loss.csv").string()));
    std::string line;
    std::getline(in, line);
    std::vector<double> out;
    while (std::getline(in, line)) out.push_back(std::stod(line.substr(line.rfind(',') + 1)));
    return out;
  }

  fs::path dir_;
};

TEST_F(CliTest, ConfigValidateEchoesSizing) {
  const auto r = run("config validate outdoor104");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("N=104"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("C=1248"), std::string::npos) << r.out;
}

TEST_F(CliTest, ConfigMirrorWritesValidConfig) {
  auto r = run("config mirror cityscapes256 -o mirrored.json");
  ASSERT_EQ(r.code, 0) << r.out;
  r = run("config validate mirrored.json");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("C=1024"), std::string::npos) << r.out;
}

TEST_F(CliTest, FailuresExitNonzero) {
  auto r = run("config validate missing-config");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find("not found"), std::string::npos) << r.out;
  EXPECT_NE(run("").code, 0);
  EXPECT_NE(run("train --steps abc").code, 0);
  EXPECT_NE(run("eval -w nowhere").code, 0);
}

TEST_F(CliTest, SynthTrainOverfitSmoke) {
  ASSERT_EQ(run("synth --config grid2x2 --count 8 --seed 7 -w ws").code, 0);
  const auto r = run("train --steps 200 -w ws");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto trace = loss_trace();
  ASSERT_EQ(trace.size(), 200u);
  EXPECT_LT(trace.back(), 0.05 * trace.front()) << "initial " << trace.front() << ", final " << trace.back();
}

TEST_F(CliTest, EvalOfGroundTruthIsPerfect) {
  ASSERT_EQ(run("synth --config indoor30 --count 4 --seed 3 --size 96 -w ws").code, 0);
  const auto r = run("eval -w ws --pred ws/annotations --name gt");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto report = nlohmann::json::parse(read_file((dir_ / "ws/reports/gt.json").string()));
  for (const auto& c : report["classes"]) {
    if (c["counts"]["tp"].get<int>() + c["counts"]["fn"].get<int>() > 0) EXPECT_EQ(c["f1"], 1.0) << c.dump();
  }
  EXPECT_EQ(report["binary"]["risk"]["f1"], 1.0);
  EXPECT_EQ(report["binary"]["road"]["f1"], 1.0);
}

TEST_F(CliTest, TrainInferEvalQuantizeBench) {
  ASSERT_EQ(run("synth --config grid2x2 --count 4 --seed 1 --size 32 -w ws").code, 0);
  ASSERT_EQ(run("train --steps 3 --input-size 32 -w ws").code, 0);
  auto r = run("infer --weights ws/weights/model.yw -w ws");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto pred = read_predictions(read_file((dir_ / "ws/predictions/synth-1-0.pred").string()));
  EXPECT_EQ(pred.n_cells, 4u);
  r = run("eval -w ws");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Binary All"), std::string::npos);
  r = run("quantize --weights ws/weights/model.yw -w ws");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir_ / "ws/weights/model.q8"));
  r = run("bench --weights ws/weights/model.yw --runs 5 --warmup 2 -w ws");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("FLOPs"), std::string::npos);
  EXPECT_NE(run("infer --weights ws/weights/model.yw --config indoor30 -w ws").code, 0);
}

TEST_F(CliTest, RasterizeAndConvert) {
  ASSERT_EQ(run("synth --config grid2x2 --count 2 --seed 5 -w ws").code, 0);
  auto r = run("rasterize grid2x2 --width 8 --height 8 -o cells.pgm");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(decode_pgm(read_file((dir_ / "cells.pgm").string())).width, 8);
  const auto before = read_file((dir_ / "ws/annotations/synth-5-0.ann").string());
  r = run("convert --mask ws/masks/synth-5-0.pgm --config grid2x2 -o out.ann");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(read_file((dir_ / "out.ann").string()), before);
}

}  // namespace
}  // namespace yolic
