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

#include "sbnn/pipeline.hpp"

namespace sbnn {
namespace {

TEST(ConfigText, SectionsCommentsAndLayers) {
  auto doc = parse_config_text(
      "# top\nname = x  # trailing\n\n[layers]\nconv c_out=4\n  relu\n[train]\nepochs = 3\n");
  EXPECT_EQ(doc.section("").string_or("name", ""), "x");
  ASSERT_TRUE(doc.has_layers);
  ASSERT_EQ(doc.layer_lines.size(), 2u);
  EXPECT_EQ(doc.layer_lines[0].number, 5);
  EXPECT_EQ(doc.section("train").int_or("epochs", 0), 3);
}

TEST(ConfigText, TypedGetters) {
  auto doc = parse_config_text("[a]\ni = -12\nd = 2.5e-3\nb = true\nn = no\ns = hello world\n");
  auto& a = doc.section("a");
  EXPECT_EQ(a.get_int("i"), -12);
  EXPECT_DOUBLE_EQ(*a.get_double("d"), 2.5e-3);
  EXPECT_EQ(a.get_bool("b"), true);
  EXPECT_EQ(a.get_bool("n"), false);
  EXPECT_EQ(a.get_string("s"), "hello world");
  EXPECT_FALSE(a.get_int("missing").has_value());
  EXPECT_NO_THROW(a.finish());
}

TEST(ConfigText, BadValues) {
  auto doc = parse_config_text("[a]\ni = 1.5\nd = abc\nb = maybe\n");
  auto& a = doc.section("a");
  EXPECT_THROW(a.get_int("i"), ConfigError);
  EXPECT_THROW(a.get_double("d"), ConfigError);
  EXPECT_THROW(a.get_bool("b"), ConfigError);
}

TEST(ConfigText, UnusedKeyRejected) {
  auto doc = parse_config_text("[a]\nx = 1\ny = 2\n");
  auto& a = doc.section("a");
  a.get_int("x");
  try {
    a.finish();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find('y'), std::string::npos);
  }
}

TEST(ConfigText, SyntaxErrors) {
  EXPECT_THROW(parse_config_text("[a\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[a]\njust words\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[a]\nx = 1\nx = 2\n"), ConfigError);
  EXPECT_THROW(load_config_file("/nonexistent/sbnn.cfg"), Error);
}

TEST(ConfigText, LayerLineSplit) {
  const auto l = split_layer_line("conv name=a c_out=8 k=1", 3);
  EXPECT_EQ(l.kind, "conv");
  ASSERT_EQ(l.options.size(), 3u);
  EXPECT_EQ(l.options[1].first, "c_out");
  EXPECT_EQ(l.options[1].second, "8");
  EXPECT_THROW(split_layer_line("conv c_out", 3), ConfigError);
}

TEST(Architecture, ParseFormatRoundTrip) {
  for (const auto& name : preset_names())
    for (const std::string geo : {"cifar", "imagenet", "desk"}) {
      if ((name == "tiny") != (geo == "desk")) continue;
      const auto a = preset(name, geo);
      EXPECT_EQ(parse_architecture(format_architecture(a)), a) << name << " " << geo;
    }
}

TEST(Architecture, ConfigFilesParse) {
  for (const char* f : {"resnet18-cifar", "resnet20-cifar", "resnet34-imagenet",
                        "vgg-small-cifar", "resnet50-cifar", "tiny-desk", "tiny-w1a1"}) {
    const auto c = load_run_config(std::string(SBNN_CONFIG_DIR) + "/" + f + ".cfg");
    EXPECT_NO_THROW(resolve(c.arch)) << f;
  }
}

TEST(Architecture, PresetShapes) {
  const auto r18 = resolve(preset("resnet18", "imagenet"));
  EXPECT_EQ(r18.quantized().size(), 16u);
  EXPECT_TRUE(r18.weights.front().first);
  EXPECT_TRUE(r18.weights.back().last);
  EXPECT_EQ(r18.weights.back().c_out, 1000);
  const auto r20 = resolve(preset("resnet20"));
  EXPECT_EQ(r20.quantized().size(), 18u);
  EXPECT_EQ(r20.weights.back().c_out, 10);
  EXPECT_THROW(preset("resnet99"), ConfigError);
  EXPECT_THROW(preset("resnet18", "mnist"), ConfigError);
}

TEST(Architecture, Errors) {
  const std::string head = "name = t\ninput = 3x8x8\nclasses = 2\n[layers]\n";
  EXPECT_THROW(parse_architecture(head + "bogus\n"), ConfigError);
  EXPECT_THROW(parse_architecture(head + "conv c_out=4 colour=red\n"), ConfigError);
  EXPECT_THROW(parse_architecture(head + "relu c_out=4\n"), ConfigError);
  EXPECT_THROW(resolve(parse_architecture(head + "add from=nowhere\n")), ConfigError);
  EXPECT_THROW(resolve(parse_architecture(head + "conv c_out=0\n")), ConfigError);
  EXPECT_THROW(parse_architecture("name = t\ninput = 3x8\nclasses = 2\n[layers]\nfc\n"),
               ConfigError);
}

ConfigDocument tiny_doc(const std::string& extra) {
  return parse_config_text(
      "name = t\ninput = 1x8x8\nclasses = 3\n[layers]\nconv c_out=4\nbn\nrelu\n"
      "conv c_out=8\nbn\nrelu\ngap\nfc\n" + extra);
}

TEST(RunConfigParse, Defaults) {
  auto doc = tiny_doc("");
  const auto c = parse_run_config(doc);
  EXPECT_EQ(c.train.network.mode, QuantMode::Snn);
  EXPECT_EQ(c.train.network.tau, 5);
  EXPECT_DOUBLE_EQ(c.train.network.theta, 1e-3);
  EXPECT_EQ(c.train.sgd.epochs, 10);
  EXPECT_EQ(c.train.bn_recalibration, 0u);
  EXPECT_EQ(c.data.source, "synthetic");
  EXPECT_EQ(c.hardware.pe_count, 64);
  EXPECT_EQ(c.cost.tau, 5);
}

TEST(RunConfigParse, Values) {
  auto doc = tiny_doc(
      "[train]\nepochs = 2\nlr = 0.05\nbn_recalibration = 64\n[quant]\nmode = vanilla\ntau = 3\n"
      "strategy = layer-shared\n[hardware]\npes = 32\n[cost]\ninclude_first_last = true\n");
  const auto c = parse_run_config(doc);
  EXPECT_EQ(c.train.sgd.epochs, 2);
  EXPECT_DOUBLE_EQ(c.train.sgd.learning_rate, 0.05);
  EXPECT_EQ(c.train.bn_recalibration, 64u);
  EXPECT_EQ(c.train.network.mode, QuantMode::VanillaSnn);
  EXPECT_EQ(c.train.network.tau, 3);
  EXPECT_EQ(c.train.network.strategy.kind, SamplingStrategy::Kind::RandomLayerShared);
  EXPECT_EQ(c.hardware.pe_count, 32);
  EXPECT_TRUE(c.cost.include_first_last);
}

TEST(RunConfigParse, Rejections) {
  const char* bad[] = {"[quant]\ntau = 0\n",
                       "[quant]\ntau = 10\n",
                       "[quant]\nmode = ternary\n",
                       "[quant]\nstrategy = frequency-topk\n",
                       "[quant]\ntheta = -1\n",
                       "[train]\nepochs = 0\n",
                       "[train]\nbn_recalibration = -1\n",
                       "[train]\nlearning_rate = 0.1\n",
                       "[data]\nsource = ftp\n",
                       "[data]\nsource = idx\n",
                       "[hardware]\npes = 0\n",
                       "[run]\nparity_tolerance = 0\n",
                       "[extras]\nx = 1\n"};
  for (const char* extra : bad) {
    auto doc = tiny_doc(extra);
    EXPECT_THROW(parse_run_config(doc), ConfigError) << extra;
  }
}

TEST(RunConfigParse, FullSetTauAllowed) {
  auto doc = tiny_doc("[quant]\ntau = 9\n");
  EXPECT_EQ(parse_run_config(doc).train.network.tau, 9);
}

TEST(RunConfigParse, GeometryOverride) {
  auto doc = parse_config_text("preset = resnet18\n");
  const auto c = parse_run_config(doc, "imagenet");
  EXPECT_EQ(c.arch.input.h, 224);
}

}  // namespace
}  // namespace sbnn
