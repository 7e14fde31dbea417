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

#include "sbnn/trainer.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "sbnn/error.hpp"

namespace sbnn {
namespace {

using nlohmann::json;

json epoch_object(const EpochRecord& e) {
  return json{{"epoch", e.epoch},
              {"lr", e.learning_rate},
              {"train_loss", e.train_loss},
              {"train_accuracy", e.train_accuracy},
              {"val_accuracy", e.val_accuracy},
              {"sign_flips", e.sign_flips},
              {"repairs", e.repairs}};
}

SubsetSnapshot snapshot(Network& net, int epoch) {
  SubsetSnapshot s;
  s.epoch = epoch;
  for (auto* q : net.quant_layers()) {
    std::vector<std::uint32_t> codes;
    if (q->has_subset())
      for (const auto& c : q->subset().codes()) codes.push_back(c.value);
    s.layers.push_back(std::move(codes));
  }
  return s;
}

int argmax_row(const Tensor& logits, int row) {
  const int classes = logits.dim(1);
  int best = 0;
  for (int c = 1; c < classes; ++c)
    if (logits[static_cast<std::size_t>(row) * classes + c] >
        logits[static_cast<std::size_t>(row) * classes + best])
      best = c;
  return best;
}

}  // namespace

std::string epoch_json(const EpochRecord& e) { return epoch_object(e).dump(); }

std::string RunRecord::to_json() const {
  json j;
  j["seed"] = seed;
  j["mode"] = sbnn::to_string(mode);
  j["strategy"] = sbnn::to_string(strategy);
  j["tau"] = tau;
  j["theta"] = theta;
  j["epochs"] = json::array();
  for (const auto& e : epochs) j["epochs"].push_back(epoch_object(e));
  j["snapshots"] = json::array();
  for (const auto& s : snapshots)
    j["snapshots"].push_back(json{{"epoch", s.epoch}, {"layers", s.layers}});
  return j.dump(2);
}

RunRecord RunRecord::from_json(const std::string& text) {
  RunRecord r;
  try {
    const json j = json::parse(text);
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mode = parse_quant_mode(j.at("mode").get<std::string>());
    r.strategy = parse_sampling_kind(j.at("strategy").get<std::string>());
    r.tau = j.at("tau").get<int>();
    r.theta = j.at("theta").get<double>();
    for (const auto& e : j.at("epochs")) {
      EpochRecord rec;
      rec.epoch = e.at("epoch").get<int>();
      rec.learning_rate = e.at("lr").get<double>();
      rec.train_loss = e.at("train_loss").get<double>();
      rec.train_accuracy = e.at("train_accuracy").get<double>();
      rec.val_accuracy = e.at("val_accuracy").get<double>();
      rec.sign_flips = e.at("sign_flips").get<int>();
      rec.repairs = e.at("repairs").get<int>();
      r.epochs.push_back(rec);
    }
    for (const auto& s : j.at("snapshots")) {
      SubsetSnapshot snap;
      snap.epoch = s.at("epoch").get<int>();
      snap.layers =
          s.at("layers").get<std::vector<std::vector<std::uint32_t>>>();
      r.snapshots.push_back(std::move(snap));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("bad run record: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("bad run record: ") + e.what());
  }
  return r;
}

double evaluate(Network& net, const Dataset& data, std::size_t batch) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(start + batch, data.size()); ++i)
      idx.push_back(i);
    const Tensor logits = net.predict(data.batch(idx));
    for (std::size_t b = 0; b < idx.size(); ++b)
      if (argmax_row(logits, static_cast<int>(b)) == data.labels[idx[b]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void recalibrate_batch_norm(Network& net, const Dataset& data, std::size_t count,
                            std::size_t batch) {
  count = std::min(count, data.size());
  if (count == 0) return;
  std::vector<ops::BatchNormState*> bns = net.batch_norms();
  std::vector<real> saved;
  for (ops::BatchNormState* bn : bns) {
    saved.push_back(bn->momentum);
    std::fill(bn->running_mean.begin(), bn->running_mean.end(), real{0});
    std::fill(bn->running_var.begin(), bn->running_var.end(), real{0});
  }
  std::vector<std::size_t> idx;
  int batches = 0;
  for (std::size_t start = 0; start < count; start += batch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(start + batch, count); ++i)
      idx.push_back(i);
    ++batches;
    // cumulative mean: the k-th batch gets weight 1/k
    for (ops::BatchNormState* bn : bns)
      bn->momentum = real(batches - 1) / real(batches);
    Tape tape;
    net.forward(tape, data.batch(idx), true);
  }
  for (std::size_t i = 0; i < bns.size(); ++i) bns[i]->momentum = saved[i];
}

Tensor predict_logits(Network& net, const Dataset& data, std::size_t count,
                      std::size_t batch) {
  count = std::min(count, data.size());
  const int classes = net.architecture().spec.classes;
  Tensor out(Shape{static_cast<int>(count), classes});
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < count; start += batch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(start + batch, count); ++i)
      idx.push_back(i);
    const Tensor logits = net.predict(data.batch(idx));
    std::copy(logits.values().begin(), logits.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(start * classes));
  }
  return out;
}

TrainResult train(const ResolvedArchitecture& arch, const Dataset& train_set,
                  const Dataset& val_set, const TrainOptions& options) {
  options.sgd.validate();
  if (options.repair_every < 1) throw ConfigError("repair_every must be >= 1");
  if (options.snapshot_every < 1) throw ConfigError("snapshot_every must be >= 1");
  const Dims in = arch.spec.input;
  if (!(train_set.dims == in) || !(val_set.dims == in))
    throw DataError("dataset images are " + train_set.dims.str() +
                    " but the network expects " + in.str());
  if (train_set.classes > arch.spec.classes)
    throw DataError("dataset has more classes than the network outputs");
  if (train_set.size() == 0) throw DataError("training set is empty");

  NetworkOptions net_opts = options.network;
  net_opts.seed = options.sgd.seed;
  net_opts.strategy.seed = options.sgd.seed;
  TrainResult result;
  result.network = std::make_unique<Network>(arch, net_opts);
  Network& net = *result.network;
  RunRecord& rec = result.record;
  rec.seed = options.sgd.seed;
  rec.mode = net_opts.mode;
  rec.strategy = net_opts.strategy.kind;
  rec.tau = net_opts.tau;
  rec.theta = net_opts.theta;
  rec.snapshots.push_back(snapshot(net, 0));

  const bool refine = net_opts.mode == QuantMode::Snn;
  Rng shuffle(derive_seed(options.sgd.seed, "shuffle"));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(options.sgd.batch_size);
  std::vector<ParamView> params = net.parameters();
  long long iteration = 0;

  for (int epoch = 0; epoch < options.sgd.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[uniform_below(shuffle, i)]);
    EpochRecord er;
    er.epoch = epoch + 1;
    er.learning_rate = cosine_learning_rate(options.sgd, epoch);
    double loss_sum = 0;
    std::size_t seen = 0, correct = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::span<const std::size_t> idx(
          order.data() + start, std::min(batch, order.size() - start));
      net.zero_grad();
      if (refine) er.sign_flips += net.refine();
      Tape tape;
      const Var logits = net.forward(tape, train_set.batch(idx), true);
      const auto labels = train_set.batch_labels(idx);
      const Var loss = ops::softmax_cross_entropy(tape, logits, labels);
      const double l = tape.value(loss)[0];
      if (!std::isfinite(l)) {
        std::ostringstream msg;
        msg << "non-finite loss " << l << " at epoch " << er.epoch
            << ", iteration " << iteration << " (lr " << er.learning_rate
            << ", mode " << to_string(net_opts.mode) << ")";
        throw NumericError(msg.str());
      }
      tape.backward(loss);
      sgd_step(params, options.sgd, epoch);
      if (refine && (iteration + 1) % options.repair_every == 0)
        er.repairs += net.repair();
      net.clamp_latent();

      const Tensor& lv = tape.value(logits);
      for (std::size_t b = 0; b < idx.size(); ++b)
        if (argmax_row(lv, static_cast<int>(b)) == labels[b]) ++correct;
      loss_sum += l * static_cast<double>(idx.size());
      seen += idx.size();
      if (options.record_losses) rec.losses.push_back(l);
      ++iteration;
    }
    er.train_loss = loss_sum / static_cast<double>(seen);
    er.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    if (options.bn_recalibration > 0)
      recalibrate_batch_norm(net, train_set, options.bn_recalibration,
                             options.eval_batch);
    er.val_accuracy = evaluate(net, val_set, options.eval_batch);
    rec.epochs.push_back(er);
    if (er.epoch % options.snapshot_every == 0 || er.epoch == options.sgd.epochs)
      rec.snapshots.push_back(snapshot(net, er.epoch));
    if (options.log) *options.log << epoch_json(er) << "\n" << std::flush;
    if (options.on_epoch) options.on_epoch(er);
  }
  return result;
}

double sliding_std(const std::vector<double>& values, int window) {
  if (window < 1) throw ConfigError("window must be >= 1");
  const auto w = static_cast<std::size_t>(window);
  if (values.size() < w) return 0.0;
  double total = 0;
  std::size_t count = 0;
  for (std::size_t s = 0; s + w <= values.size(); ++s, ++count) {
    double mean = 0;
    for (std::size_t i = s; i < s + w; ++i) mean += values[i];
    mean /= static_cast<double>(w);
    double var = 0;
    for (std::size_t i = s; i < s + w; ++i)
      var += (values[i] - mean) * (values[i] - mean);
    total += std::sqrt(var / static_cast<double>(w));
  }
  return total / static_cast<double>(count);
}

std::vector<ThetaRun> ablate_theta(const ResolvedArchitecture& arch,
                                   const Dataset& train_set,
                                   const Dataset& val_set, TrainOptions base,
                                   const std::vector<double>& thetas,
                                   const std::vector<std::uint64_t>& seeds,
                                   int window) {
  if (base.network.mode != QuantMode::Snn)
    throw ConfigError("theta ablation needs mode snn");
  std::vector<ThetaRun> out;
  for (double theta : thetas) {
    if (!(theta >= 0)) throw ConfigError("theta must be >= 0");
    for (std::uint64_t seed : seeds) {
      TrainOptions o = base;
      o.network.theta = theta;
      o.sgd.seed = seed;
      ThetaRun run;
      run.theta = theta;
      run.seed = seed;
      run.record = train(arch, train_set, val_set, o).record;
      std::vector<double> acc;
      for (const auto& e : run.record.epochs) {
        run.flips_per_epoch.push_back(e.sign_flips);
        acc.push_back(e.val_accuracy);
      }
      run.oscillation = sliding_std(acc, window);
      out.push_back(std::move(run));
    }
  }
  return out;
}

KernelHistogram collect_kernel_histogram(const Network& net) {
  KernelHistogram h;
  for (const auto& node : net.nodes()) {
    for (const ConvUnit* u : {node.conv ? &*node.conv : nullptr,
                              node.proj ? &*node.proj : nullptr}) {
      if (!u || !u->geometry.quantized) continue;
      const int n = u->geometry.unit_length();
      Tensor signs = u->quant ? u->quant->binarize().weights
                              : binarize_bnn(u->weight.value);
      std::vector<std::uint64_t> counts(universe_size(n), 0);
      std::vector<std::int8_t> unit(static_cast<std::size_t>(n));
      for (std::size_t base = 0; base < signs.size(); base += unit.size()) {
        for (std::size_t l = 0; l < unit.size(); ++l)
          unit[l] = signs[base + l] > 0 ? 1 : -1;
        ++counts[pattern_bits(encode_pattern(unit))];
      }
      h.counts.push_back(std::move(counts));
    }
  }
  return h;
}

}  // namespace sbnn
