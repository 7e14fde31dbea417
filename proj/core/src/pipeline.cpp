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

#include "sbnn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "sbnn/checkpoint.hpp"
#include "sbnn/error.hpp"
#include "sbnn/inferengine.hpp"
#include "sbnn/kernelspace.hpp"
#include "sbnn/packed_model.hpp"

namespace sbnn {
namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

int positive_int(ConfigSection& s, const std::string& key, long long fallback) {
  const long long v = s.int_or(key, fallback);
  if (v < 1 || v > 1'000'000'000)
    throw ConfigError("[" + s.name() + "] " + key + " must be a positive integer");
  return static_cast<int>(v);
}

int max_unit_length(const ResolvedArchitecture& arch) {
  int n = 0;
  for (int i : arch.quantized()) n = std::max(n, arch.weights[i].unit_length());
  return n;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

std::string tagged(const char* stage, const std::exception& e) {
  return std::string("stage '") + stage + "': " + e.what();
}

// Runs f and rethrows library errors with the stage name prefixed. The
// error class is kept so the exit code does not change.
template <class F>
auto run_stage(const char* stage, std::ostream* log, F&& f) -> decltype(f()) {
  if (log) *log << "[" << stage << "]\n" << std::flush;
  try {
    return f();
  } catch (const CorruptModelError& e) {
    throw CorruptModelError(tagged(stage, e));
  } catch (const DataError& e) {
    throw DataError(tagged(stage, e));
  } catch (const ConfigError& e) {
    throw ConfigError(tagged(stage, e));
  } catch (const ContractViolation& e) {
    throw ContractViolation(tagged(stage, e));
  } catch (const NumericError& e) {
    throw NumericError(tagged(stage, e));
  } catch (const std::exception& e) {
    throw Error(tagged(stage, e));
  }
}

}  // namespace

RunConfig parse_run_config(ConfigDocument& doc,
                           const std::string& geometry_override) {
  doc.require_known_sections(
      {"train", "quant", "data", "hardware", "cost", "run"});
  RunConfig c;
  c.arch = architecture_from_document(doc, geometry_override);
  const ResolvedArchitecture arch = resolve(c.arch);

  auto& t = doc.section("train");
  auto& sgd = c.train.sgd;
  sgd.epochs = positive_int(t, "epochs", 10);
  sgd.batch_size = positive_int(t, "batch_size", 64);
  sgd.learning_rate = t.double_or("lr", 0.1);
  sgd.momentum = t.double_or("momentum", 0.9);
  sgd.weight_decay = t.double_or("weight_decay", 1e-4);
  const long long seed = t.int_or("seed", 1);
  if (seed < 0) throw ConfigError("[train] seed must be >= 0");
  sgd.seed = static_cast<std::uint64_t>(seed);
  c.train.repair_every = positive_int(t, "repair_every", 1);
  c.train.snapshot_every = positive_int(t, "snapshot_every", 1);
  c.train.eval_batch = static_cast<std::size_t>(positive_int(t, "eval_batch", 256));
  const long long recal = t.int_or("bn_recalibration", 0);
  if (recal < 0) throw ConfigError("[train] bn_recalibration must be >= 0");
  c.train.bn_recalibration = static_cast<std::size_t>(recal);
  t.finish();
  sgd.validate();

  auto& q = doc.section("quant");
  auto& net = c.train.network;
  net.mode = parse_quant_mode(q.string_or("mode", "snn"));
  net.tau = static_cast<int>(q.int_or("tau", 5));
  net.tau_vector = static_cast<int>(q.int_or("tau_vector", 0));
  net.theta = q.double_or("theta", 1e-3);
  net.strategy.kind = parse_sampling_kind(q.string_or("strategy", "layer-specific"));
  c.histogram_path = q.string_or("histogram", "");
  q.finish();
  if (net.mode == QuantMode::Snn || net.mode == QuantMode::VanillaSnn) {
    const int n = max_unit_length(arch);
    if (n == 0) throw ConfigError("[quant] mode needs at least one quantized layer");
    if (net.tau < 1 || net.tau > n)
      throw ConfigError("[quant] tau = " + std::to_string(net.tau) +
                        " out of range (1 <= tau < " + std::to_string(n) +
                        ", or tau = " + std::to_string(n) + " for the full set)");
    if (net.tau_vector != 0) validate_tau(net.tau_vector, 8);
    if (!(net.theta >= 0)) throw ConfigError("[quant] theta must be >= 0");
    if (net.strategy.kind == SamplingStrategy::Kind::FrequencyTopK &&
        c.histogram_path.empty())
      throw ConfigError("[quant] strategy frequency-topk needs 'histogram'");
  }

  auto& d = doc.section("data");
  c.data.source = d.string_or("source", "synthetic");
  c.data.name = d.string_or("name", "desk");
  c.data.train_size = static_cast<std::size_t>(positive_int(d, "train_size", 2000));
  c.data.test_size = static_cast<std::size_t>(positive_int(d, "test_size", 500));
  const long long dseed = d.int_or("seed", 7);
  if (dseed < 0) throw ConfigError("[data] seed must be >= 0");
  c.data.seed = static_cast<std::uint64_t>(dseed);
  c.data.train_images = d.string_or("train_images", "");
  c.data.train_labels = d.string_or("train_labels", "");
  c.data.test_images = d.string_or("test_images", "");
  c.data.test_labels = d.string_or("test_labels", "");
  c.data.train_batches = split_list(d.string_or("train_batches", ""));
  c.data.test_batches = split_list(d.string_or("test_batches", ""));
  d.finish();
  if (c.data.source == "idx") {
    if (c.data.train_images.empty() || c.data.train_labels.empty() ||
        c.data.test_images.empty() || c.data.test_labels.empty())
      throw ConfigError("[data] source idx needs train_images, train_labels, "
                        "test_images and test_labels");
  } else if (c.data.source == "cifar10") {
    if (c.data.train_batches.empty() || c.data.test_batches.empty())
      throw ConfigError("[data] source cifar10 needs train_batches and test_batches");
  } else if (c.data.source != "synthetic") {
    throw ConfigError("[data] unknown source '" + c.data.source +
                      "' (expected synthetic, idx or cifar10)");
  }

  auto& h = doc.section("hardware");
  c.hardware.pe_count = positive_int(h, "pes", 64);
  c.hardware.clock_ghz = h.double_or("clock_ghz", 1.0);
  c.hardware.accumulators_per_pe = positive_int(h, "accumulators", 4);
  c.hardware.line_buffer_width = positive_int(h, "line_buffer_width", 128);
  c.hardware.accumulator_bits = positive_int(h, "accumulator_bits", 32);
  const long long fill = h.int_or("fill_cycles", 1024);
  if (fill < 0) throw ConfigError("[hardware] fill_cycles must be >= 0");
  c.hardware.fill_cycles = static_cast<std::uint64_t>(fill);
  h.finish();
  c.hardware.validate();

  auto& k = doc.section("cost");
  c.cost.include_first_last = k.bool_or("include_first_last", false);
  c.cost.count_subsets = k.bool_or("count_subsets", true);
  k.finish();
  c.cost.mode = net.mode;
  c.cost.tau = net.tau;
  c.cost.tau_vector = net.tau_vector;

  auto& r = doc.section("run");
  c.parity_samples = static_cast<std::size_t>(positive_int(r, "parity_samples", 100));
  c.parity_tolerance = r.double_or("parity_tolerance", 1e-4);
  r.finish();
  if (!(c.parity_tolerance > 0))
    throw ConfigError("[run] parity_tolerance must be positive");
  return c;
}

RunConfig load_run_config(const std::string& path,
                          const std::string& geometry_override) {
  ConfigDocument doc = load_config_file(path);
  RunConfig c = parse_run_config(doc, geometry_override);
  if (!c.histogram_path.empty()) {
    const auto base = std::filesystem::path(path).parent_path();
    const std::filesystem::path hp(c.histogram_path);
    if (hp.is_relative() && !std::filesystem::exists(hp))
      c.histogram_path = (base / hp).string();
  }
  return c;
}

void load_histogram(RunConfig& config, const ResolvedArchitecture& arch) {
  if (config.histogram_path.empty()) return;
  std::ifstream in(config.histogram_path);
  if (!in) throw DataError("cannot open histogram " + config.histogram_path);
  std::vector<int> lengths;
  for (int i : arch.quantized()) lengths.push_back(arch.weights[i].unit_length());
  config.histogram = std::make_shared<KernelHistogram>(
      KernelHistogram::read_csv(in, lengths));
  config.train.network.histogram = config.histogram.get();
}

std::pair<Dataset, Dataset> load_data(const DataConfig& data) {
  if (data.source == "idx")
    return {load_idx(data.train_images, data.train_labels),
            load_idx(data.test_images, data.test_labels)};
  if (data.source == "cifar10")
    return {load_cifar10(data.train_batches), load_cifar10(data.test_batches)};
  return {make_synthetic(data.name, data.train_size, data.seed, "train"),
          make_synthetic(data.name, data.test_size, data.seed, "test")};
}

double max_relative_error(const Tensor& want, const Tensor& got) {
  if (want.shape() != got.shape())
    throw ContractViolation("logit shapes differ: " + want.shape().str() +
                            " vs " + got.shape().str());
  if (want.shape().rank() != 2) throw ContractViolation("logits must be rank 2");
  const int n = want.shape()[0], k = want.shape()[1];
  const auto a = want.values();
  const auto b = got.values();
  double worst = 0;
  for (int i = 0; i < n; ++i) {
    double scale = 0, diff = 0;
    for (int j = 0; j < k; ++j) {
      const auto at = static_cast<std::size_t>(i) * k + j;
      scale = std::max(scale, std::abs(a[at]));
      diff = std::max(diff, std::abs(a[at] - b[at]));
    }
    worst = std::max(worst, scale > 0 ? diff / scale : diff);
  }
  return worst;
}

bool EndToEndResult::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const StageCheck& c) { return c.passed; });
}

std::string EndToEndResult::summary_json() const {
  nlohmann::ordered_json j;
  j["passed"] = passed();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["checks"] = std::move(arr);
  j["final_val_accuracy"] = record.final_val_accuracy();
  j["params_bits"] = cost.binarized.params_bits;
  j["bitops"] = cost.binarized.bitops;
  if (cost.with_first_last) {
    j["params_bits_with_first_last"] = cost.with_first_last->params_bits;
    j["bitops_with_first_last"] = cost.with_first_last->bitops;
  }
  j["bnn_ms"] = bnn_cycles.time_ms;
  j["snn_ms"] = snn_cycles.time_ms;
  j["speedup"] = timeline.speedup;
  auto files = nlohmann::ordered_json::array();
  for (const auto& p : artifacts) files.push_back(p.filename().string());
  j["artifacts"] = std::move(files);
  auto warn = nlohmann::ordered_json::array();
  for (const auto& w : analysis.warnings) warn.push_back(w);
  j["warnings"] = std::move(warn);
  return j.dump(2);
}

EndToEndResult end_to_end(const RunConfig& config_in,
                          const std::filesystem::path& out_dir,
                          std::ostream* log) {
  RunConfig config = config_in;
  EndToEndResult res;
  std::filesystem::create_directories(out_dir);
  auto keep = [&](const std::filesystem::path& p) { res.artifacts.push_back(p); };

  const ResolvedArchitecture arch =
      run_stage("config", log, [&] { return resolve(config.arch); });
  if (!config.histogram)
    run_stage("config", log, [&] { load_histogram(config, arch); });
  if (config.histogram) config.train.network.histogram = config.histogram.get();

  auto [train_set, test_set] =
      run_stage("data", log, [&] { return load_data(config.data); });
  if (train_set.dims != arch.spec.input || test_set.dims != arch.spec.input)
    throw DataError("stage 'data': images are " + train_set.dims.str() +
                    " but the network expects " + arch.spec.input.str());

  const auto log_path = out_dir / "train_log.jsonl";
  TrainResult trained = run_stage("train", log, [&] {
    std::ofstream train_log(log_path, std::ios::binary);
    TrainOptions opts = config.train;
    opts.log = &train_log;
    if (log)
      opts.on_epoch = [log](const EpochRecord& e) {
        *log << "  epoch " << e.epoch << " loss " << e.train_loss << " val "
             << e.val_accuracy << "\n" << std::flush;
      };
    return train(arch, train_set, test_set, opts);
  });
  res.record = trained.record;
  Network& net = *trained.network;
  keep(log_path);
  run_stage("train", log, [&] {
    save_checkpoint(net, (out_dir / "checkpoint.sbck").string());
    write_text(out_dir / "run.json", res.record.to_json() + "\n");
  });
  keep(out_dir / "checkpoint.sbck");
  keep(out_dir / "run.json");

  const PackedModel model = run_stage("export", log, [&] {
    PackedModel m = compile(net);
    const auto path = out_dir / "model.sbnn";
    save_model(m, path.string());
    return m;
  });
  keep(out_dir / "model.sbnn");
  {
    const auto bytes = serialize_model(model);
    const auto again = serialize_model(load_model((out_dir / "model.sbnn").string()));
    res.checks.push_back({"model_roundtrip", bytes == again,
                          std::to_string(bytes.size()) + " bytes"});
  }

  res.cost = run_stage("cost", log, [&] {
    CostReport r = cost_report(arch, config.cost);
    write_text(out_dir / "cost.json", r.to_json() + "\n");
    std::ofstream csv(out_dir / "cost.csv", std::ios::binary);
    r.write_csv(csv);
    return r;
  });
  keep(out_dir / "cost.json");
  keep(out_dir / "cost.csv");
  {
    CostOptions with_tables = config.cost;
    with_tables.count_subsets = true;
    with_tables.include_first_last = false;
    const bool binary = config.cost.mode != QuantMode::FullPrecision;
    const std::uint64_t expect =
        binary ? cost_report(arch, with_tables).binarized.params_bits : 0;
    const std::uint64_t got = model.payload_bits();
    res.checks.push_back({"payload_vs_cost", got == expect,
                          std::to_string(got) + " vs " + std::to_string(expect) +
                              " bits"});
  }

  run_stage("simulate", log, [&] {
    const bool subsets = config.cost.mode == QuantMode::Snn ||
                         config.cost.mode == QuantMode::VanillaSnn;
    const int tau = subsets ? config.cost.tau : max_unit_length(arch);
    res.bnn_cycles = simulate_bnn(arch, config.hardware);
    res.snn_cycles = simulate_snn(arch, config.hardware, std::max(tau, 1),
                                  subsets ? config.cost.tau_vector : 0);
    res.timeline = timeline(res.bnn_cycles, res.snn_cycles);
    write_text(out_dir / "cycles_bnn.json", res.bnn_cycles.to_json() + "\n");
    write_text(out_dir / "cycles_snn.json", res.snn_cycles.to_json() + "\n");
    write_text(out_dir / "timeline.json", res.timeline.to_json() + "\n");
    std::ofstream csv(out_dir / "timeline.csv", std::ios::binary);
    res.timeline.write_csv(csv);
  });
  for (const char* f : {"cycles_bnn.json", "cycles_snn.json", "timeline.json",
                        "timeline.csv"})
    keep(out_dir / f);
  res.checks.push_back({"snn_not_slower_per_layer", res.timeline.b_never_slower,
                        "speedup " + std::to_string(res.timeline.speedup)});

  res.analysis = run_stage("analyze", log, [&] {
    const KernelHistogram hist = collect_kernel_histogram(net);
    std::vector<std::string> names;
    for (int i : arch.quantized()) names.push_back(arch.weights[i].name);
    return analyze_subsets(&hist, &res.record, names, out_dir / "analysis");
  });
  for (const auto& p : res.analysis.files) keep(p);

  run_stage("parity", log, [&] {
    const Dataset sample = test_set.head(config.parity_samples);
    const Tensor want = predict_logits(net, sample, sample.size());
    std::vector<std::size_t> idx(sample.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const Tensor got = run_model(model, sample.batch(idx));
    const double err = max_relative_error(want, got);
    const int n = want.shape()[0], k = want.shape()[1];
    int agree = 0;
    for (int i = 0; i < n; ++i) {
      const auto a = want.values().subspan(static_cast<std::size_t>(i) * k, k);
      const auto b = got.values().subspan(static_cast<std::size_t>(i) * k, k);
      agree += std::max_element(a.begin(), a.end()) - a.begin() ==
               std::max_element(b.begin(), b.end()) - b.begin();
    }
    std::ostringstream d;
    d << "max relative error " << err << " over " << n << " inputs";
    res.checks.push_back({"logits_parity", err <= config.parity_tolerance, d.str()});
    res.checks.push_back({"top1_parity", agree == n,
                          std::to_string(agree) + "/" + std::to_string(n)});
  });

  write_text(out_dir / "summary.json", res.summary_json() + "\n");
  keep(out_dir / "summary.json");
  if (log)
    for (const auto& c : res.checks)
      *log << (c.passed ? "ok   " : "FAIL ") << c.name << ": " << c.detail << "\n";
  return res;
}

}  // namespace sbnn
