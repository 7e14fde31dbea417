/* Copyright 2026 The SBNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

Result sbnn(const std::string& args) {
  const std::string cmd = std::string(SBNN_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

const std::string kConfigs = SBNN_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("sbnn_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Cli, HelpAndVersion) {
  const auto h = sbnn("--help");
  EXPECT_EQ(h.code, 0);
  for (const char* cmd : {"train", "export", "infer", "cost", "simulate", "analyze", "run"})
    EXPECT_NE(h.out.find(cmd), std::string::npos) << cmd;
  EXPECT_EQ(sbnn("cost --help").code, 0);
  EXPECT_EQ(sbnn("--version").code, 0);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(sbnn("").code, 1);
  EXPECT_EQ(sbnn("frobnicate").code, 1);
  EXPECT_EQ(sbnn("cost").code, 1);
  EXPECT_EQ(sbnn("cost --arch resnet18 --tau 0 --mode snn").code, 1);
  EXPECT_EQ(sbnn("cost --arch resnet18 --mode ternary").code, 1);
  EXPECT_EQ(sbnn("simulate --arch nosuchnet").code, 1);
  EXPECT_EQ(sbnn("train --config /nonexistent.cfg").code, 1);
}

TEST(Cli, CostJson) {
  const auto r = sbnn("cost --arch resnet18 --mode snn --tau 5 --json");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["binarized"]["params_bits"].get<std::uint64_t>(), 6'103'040u);
}

TEST(Cli, CostTextAndCsv) {
  const auto dir = scratch("cost");
  const auto r = sbnn("cost --arch resnet18 --geometry imagenet --mode snn --tau 5 --csv " +
                      (dir / "c.csv").string());
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("vs bnn: params 1.8x"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "c.csv"));
  fs::remove_all(dir);
}

TEST(Cli, SimulateJson) {
  const auto r = sbnn("simulate --arch resnet18 --geometry imagenet --tau 5 --json");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  const double s = j["timeline"]["speedup"].get<double>();
  EXPECT_GT(s, 2.5);
  EXPECT_LT(s, 3.9);
  EXPECT_TRUE(j["timeline"]["candidate_never_slower"].get<bool>());
  EXPECT_EQ(j["timeline"]["layers"].size(), j["bnn"]["layers"].size());
}

TEST(Cli, SimulateBadHardware) {
  EXPECT_EQ(sbnn("simulate --arch resnet20 --pes 0").code, 1);
}

TEST(Cli, TrainExportInferAnalyze) {
  const auto dir = scratch("flow");
  const std::string d = dir.string();
  auto r = sbnn("train --config " + kConfigs +
                "/tiny-desk.cfg --epochs 1 --train-size 200 --test-size 64 -o " + d + "/train");
  ASSERT_EQ(r.code, 0) << r.out;
  ASSERT_TRUE(fs::exists(dir / "train/checkpoint.sbck"));

  r = sbnn("export --checkpoint " + d + "/train/checkpoint.sbck -o " + d + "/m.sbnn --report " +
           d + "/export.json");
  ASSERT_EQ(r.code, 0) << r.out;

  r = sbnn("dataset --name desk --count 40 --seed 7 --split test -o " + d + "/data");
  ASSERT_EQ(r.code, 0) << r.out;

  r = sbnn("infer --model " + d + "/m.sbnn --input " + d + "/data --report -");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["samples"], 40);
  EXPECT_EQ(j["predictions"].size(), 40u);

  const auto never = sbnn("infer --model " + d + "/m.sbnn --input " + d +
                          "/data --sharing never --report -");
  ASSERT_EQ(never.code, 0);
  EXPECT_EQ(nlohmann::json::parse(never.out)["predictions"], j["predictions"]);

  r = sbnn("analyze --checkpoint " + d + "/train/checkpoint.sbck --run " + d +
           "/train/run.json -o " + d + "/an");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "an/coverage.csv"));
  EXPECT_TRUE(fs::exists(dir / "an/subsets.json"));

  // Corrupt model: data error.
  {
    std::ifstream in(dir / "m.sbnn", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    bytes.resize(bytes.size() / 2);
    std::ofstream(dir / "bad.sbnn", std::ios::binary) << bytes;
  }
  EXPECT_EQ(sbnn("infer --model " + d + "/bad.sbnn --input " + d + "/data").code, 3);

  // Wrong input geometry (two 8x8 IDX images): data error.
  fs::create_directories(dir / "small");
  {
    std::ofstream img(dir / "small/images.idx", std::ios::binary);
    const unsigned char head[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 8, 0, 0, 0, 8};
    img.write(reinterpret_cast<const char*>(head), sizeof head);
    img << std::string(128, '\x40');
    std::ofstream lab(dir / "small/labels.idx", std::ios::binary);
    const unsigned char lhead[] = {0, 0, 8, 1, 0, 0, 0, 2, 1, 0};
    lab.write(reinterpret_cast<const char*>(lhead), sizeof lhead);
  }
  EXPECT_EQ(sbnn("infer --model " + d + "/m.sbnn --input " + d + "/small").code, 3);

  // Garbage checkpoint.
  std::ofstream(dir / "junk.sbck") << "not a checkpoint";
  EXPECT_EQ(sbnn("export --checkpoint " + d + "/junk.sbck -o " + d + "/x.sbnn").code, 3);
  fs::remove_all(dir);
}

TEST(Cli, AnalyzeNeedsInput) {
  EXPECT_EQ(sbnn("analyze -o /tmp/sbnn_cli_none").code, 1);
}

TEST(Cli, RuntimeFailureExitTwo) {
  const auto dir = scratch("diverge");
  EXPECT_EQ(sbnn("train --config " + kConfigs +
                 "/tiny-desk.cfg --epochs 1 --train-size 128 --test-size 32 --lr 1e307 -o " +
                 dir.string())
                .code,
            2);
  fs::remove_all(dir);
}

}  // namespace
