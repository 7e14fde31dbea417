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

#include <set>
#include <sstream>

#include "sbnn/checkpoint.hpp"
#include "sbnn/dataset.hpp"
#include "sbnn/trainer.hpp"

namespace sbnn {
namespace {

class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    arch_ = new ResolvedArchitecture(resolve(preset("tiny", "desk")));
    train_ = new Dataset(make_synthetic("desk", 192, 7, "train"));
    val_ = new Dataset(make_synthetic("desk", 96, 7, "test"));
  }
  static void TearDownTestSuite() {
    delete arch_;
    delete train_;
    delete val_;
  }

  static TrainOptions options(QuantMode mode, int tau, std::uint64_t seed = 1,
                              int epochs = 2) {
    TrainOptions o;
    o.sgd.epochs = epochs;
    o.sgd.batch_size = 32;
    o.sgd.seed = seed;
    o.network.mode = mode;
    o.network.tau = tau;
    o.record_losses = true;
    return o;
  }

  static ResolvedArchitecture* arch_;
  static Dataset* train_;
  static Dataset* val_;
};

ResolvedArchitecture* TrainerTest::arch_ = nullptr;
Dataset* TrainerTest::train_ = nullptr;
Dataset* TrainerTest::val_ = nullptr;

TEST_F(TrainerTest, FullSetSnnRepeatsBnnLosses) {
  const auto bnn = train(*arch_, *train_, *val_, options(QuantMode::Bnn, 9));
  const auto snn = train(*arch_, *train_, *val_, options(QuantMode::Snn, 9));
  const auto van = train(*arch_, *train_, *val_, options(QuantMode::VanillaSnn, 9));
  ASSERT_FALSE(bnn.record.losses.empty());
  EXPECT_EQ(bnn.record.losses, snn.record.losses);
  EXPECT_EQ(bnn.record.losses, van.record.losses);
}

TEST_F(TrainerTest, SameSeedIsDeterministic) {
  const auto a = train(*arch_, *train_, *val_, options(QuantMode::Snn, 4, 3));
  const auto b = train(*arch_, *train_, *val_, options(QuantMode::Snn, 4, 3));
  EXPECT_EQ(a.record.losses, b.record.losses);
  EXPECT_EQ(a.record.to_json(), b.record.to_json());
  const auto c = train(*arch_, *train_, *val_, options(QuantMode::Snn, 4, 4));
  EXPECT_NE(a.record.losses, c.record.losses);
  // different seeds draw different subsets
  EXPECT_NE(a.record.snapshots[0].layers, c.record.snapshots[0].layers);
}

TEST_F(TrainerTest, RecordShape) {
  const auto r = train(*arch_, *train_, *val_, options(QuantMode::Snn, 3, 1, 3)).record;
  ASSERT_EQ(r.epochs.size(), 3u);
  ASSERT_EQ(r.snapshots.size(), 4u);  // initial subset plus one per epoch
  EXPECT_EQ(r.snapshots[0].layers.size(), 3u);
  for (const auto& layer : r.snapshots.back().layers) {
    EXPECT_EQ(layer.size(), 8u);
    EXPECT_EQ(std::set<std::uint32_t>(layer.begin(), layer.end()).size(), 8u);
  }
  EXPECT_EQ(r.losses.size(), 3u * 6u);
  EXPECT_GT(r.epochs[0].learning_rate, r.epochs[2].learning_rate);
}

TEST_F(TrainerTest, RunRecordJsonRoundTrip) {
  const auto r = train(*arch_, *train_, *val_, options(QuantMode::Snn, 5)).record;
  const RunRecord back = RunRecord::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
  EXPECT_THROW(RunRecord::from_json("{\"seed\": 1}"), DataError);
  EXPECT_THROW(RunRecord::from_json("not json"), DataError);
}

TEST_F(TrainerTest, LogWritesOneLinePerEpoch) {
  std::ostringstream log;
  auto o = options(QuantMode::Bnn, 9, 1, 2);
  o.log = &log;
  int called = 0;
  o.on_epoch = [&](const EpochRecord&) { ++called; };
  train(*arch_, *train_, *val_, o);
  EXPECT_EQ(called, 2);
  std::istringstream in(log.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    EXPECT_NE(line.find("\"val_accuracy\""), std::string::npos);
  }
  EXPECT_EQ(lines, 2);
}

TEST_F(TrainerTest, FullPrecisionFitsSeparableData) {
  const Dataset blobs = make_synthetic("blobs2", 200, 3, "train");
  auto o = options(QuantMode::FullPrecision, 9, 1, 20);
  const auto r = train(*arch_, blobs, blobs.head(50), o).record;
  EXPECT_GT(r.epochs.back().train_accuracy, 0.95);
}

TEST_F(TrainerTest, DivergenceIsReported) {
  auto o = options(QuantMode::FullPrecision, 9, 1, 1);
  // batch norm keeps activations bounded, so only an overflowing step diverges
  o.sgd.learning_rate = 1e307;
  o.sgd.momentum = 0;
  EXPECT_THROW(train(*arch_, *train_, *val_, o), NumericError);
}

TEST_F(TrainerTest, RejectsMismatchedData) {
  const Dataset blobs = make_synthetic("blobs2", 10, 3, "train");
  Dataset wrong = blobs;
  wrong.dims = Dims{3, 16, 16};
  wrong.pixels.resize(wrong.pixels.size() * 3);
  EXPECT_THROW(train(*arch_, wrong, blobs, options(QuantMode::Bnn, 9)), DataError);
  EXPECT_THROW(train(*arch_, Dataset{Dims{1, 16, 16}, 2, {}, {}}, blobs,
                     options(QuantMode::Bnn, 9)),
               DataError);
}

TEST_F(TrainerTest, HistogramCountsEveryKernel) {
  auto r = train(*arch_, *train_, *val_, options(QuantMode::Snn, 4));
  const auto h = collect_kernel_histogram(*r.network);
  const auto layers = arch_->quantized();
  ASSERT_EQ(h.counts.size(), layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& g = arch_->weights[static_cast<std::size_t>(layers[i])];
    EXPECT_EQ(h.total(i), static_cast<std::uint64_t>(g.c_out) * g.c_in);
    int nonzero = 0;
    for (auto c : h.counts[i]) nonzero += c != 0;
    EXPECT_LE(nonzero, 16);
  }
}

TEST_F(TrainerTest, RecalibrationUsesPlainBatchAverage) {
  auto r = train(*arch_, *train_, *val_, options(QuantMode::Bnn, 9, 1, 1));
  recalibrate_batch_norm(*r.network, *train_, 64, 64);
  const auto once = r.network->batch_norms()[0]->running_mean;
  // a single batch: running stats are that batch's statistics whatever the
  // previous state was
  for (auto* bn : r.network->batch_norms()) bn->running_mean.assign(bn->running_mean.size(), 5.0);
  recalibrate_batch_norm(*r.network, *train_, 64, 64);
  EXPECT_EQ(r.network->batch_norms()[0]->running_mean, once);
  EXPECT_DOUBLE_EQ(r.network->batch_norms()[0]->momentum, 0.9);
  // two batches average to the mean of the two single-batch results
  const Dataset second = [&] {
    Dataset d = *train_;
    d.labels.assign(train_->labels.begin() + 64, train_->labels.begin() + 128);
    d.pixels.assign(train_->pixels.begin() + 64 * static_cast<std::ptrdiff_t>(train_->image_size()),
                    train_->pixels.begin() + 128 * static_cast<std::ptrdiff_t>(train_->image_size()));
    return d;
  }();
  recalibrate_batch_norm(*r.network, second, 64, 64);
  const auto other = r.network->batch_norms()[0]->running_mean;
  recalibrate_batch_norm(*r.network, *train_, 128, 64);
  const auto both = r.network->batch_norms()[0]->running_mean;
  for (std::size_t c = 0; c < both.size(); ++c)
    EXPECT_NEAR(both[c], 0.5 * (once[c] + other[c]), 1e-12);
}

TEST_F(TrainerTest, CheckpointRoundTrip) {
  auto r = train(*arch_, *train_, *val_, options(QuantMode::Snn, 5));
  const auto bytes = serialize_checkpoint(*r.network);
  auto back = parse_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(*back), bytes);
  const Tensor x = val_->batch(std::vector<std::size_t>{0, 1, 2, 3});
  EXPECT_EQ(back->predict(x), r.network->predict(x));
  auto cut = bytes;
  cut.resize(cut.size() / 2);
  EXPECT_THROW(parse_checkpoint(cut), DataError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_checkpoint(bad), DataError);
}

TEST_F(TrainerTest, ThetaAblationCompletes) {
  auto base = options(QuantMode::Snn, 3, 1, 2);
  base.record_losses = false;
  const auto runs = ablate_theta(*arch_, *train_, *val_, base, {0.0, 1e-3, 1e-2}, {1, 2});
  ASSERT_EQ(runs.size(), 6u);
  for (const auto& run : runs) EXPECT_EQ(run.flips_per_epoch.size(), 2u);
  EXPECT_THROW(ablate_theta(*arch_, *train_, *val_, options(QuantMode::Bnn, 9), {0.0}, {1}),
               ConfigError);
}

TEST(SlidingStd, Windows) {
  EXPECT_EQ(sliding_std({1, 2}, 3), 0.0);
  EXPECT_DOUBLE_EQ(sliding_std({1, 1, 1, 1}, 2), 0.0);
  EXPECT_DOUBLE_EQ(sliding_std({0, 2, 0}, 2), 1.0);
  EXPECT_THROW(sliding_std({1}, 0), ConfigError);
}

TEST(TrainDefaults, ThetaMatchesDefault) {
  EXPECT_DOUBLE_EQ(NetworkOptions{}.theta, 1e-3);
}

}  // namespace
}  // namespace sbnn
