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

// sbnn: train, export, run and cost sub-bit binary networks.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sbnn/accelsim.hpp"
#include "sbnn/analysis.hpp"
#include "sbnn/architecture.hpp"
#include "sbnn/checkpoint.hpp"
#include "sbnn/config_text.hpp"
#include "sbnn/costmodel.hpp"
#include "sbnn/dataset.hpp"
#include "sbnn/error.hpp"
#include "sbnn/inferengine.hpp"
#include "sbnn/packed_model.hpp"
#include "sbnn/pipeline.hpp"
#include "sbnn/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2, kData = 3 };

std::string default_out(const std::string& leaf) {
  const char* env = std::getenv("SBNN_OUTPUT_DIR");
  const fs::path base = env && *env ? fs::path(env) : fs::path("sbnn-out");
  return (base / leaf).string();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw sbnn::DataError("cannot write " + p.string());
  out << text;
}

// Flags shared by train, run and ablate-theta. Empty / negative values mean
// "keep the config file's value".
struct RunFlags {
  std::string config, arch, geometry;
  std::string mode, strategy, histogram;
  int tau = 0, tau_vector = -1, epochs = 0, batch_size = 0;
  double theta = -1, lr = -1;
  long long seed = -1, data_seed = -1;
  int train_size = 0, test_size = 0;
  bool include_first_last = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "Run config file");
    cmd->add_option("--arch", arch, "Preset name or architecture file (without --config)");
    cmd->add_option("--geometry", geometry, "Preset geometry: cifar, imagenet or desk");
    cmd->add_option("--mode", mode, "fp, bnn, vanilla or snn");
    cmd->add_option("--tau", tau, "Bits per k x k kernel");
    cmd->add_option("--tau-vector", tau_vector, "Bits per 8-wide 1x1 vector");
    cmd->add_option("--theta", theta, "Refinement threshold");
    cmd->add_option("--strategy", strategy,
                    "layer-specific, layer-shared, uniform-interval or frequency-topk");
    cmd->add_option("--histogram", histogram, "Kernel histogram CSV for frequency-topk");
    cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->add_option("--batch-size", batch_size, "Mini-batch size");
    cmd->add_option("--lr", lr, "Initial learning rate");
    cmd->add_option("--seed", seed, "Training seed");
    cmd->add_option("--data-seed", data_seed, "Synthetic data seed");
    cmd->add_option("--train-size", train_size, "Synthetic training samples");
    cmd->add_option("--test-size", test_size, "Synthetic test samples");
    cmd->add_flag("--include-first-last", include_first_last,
                  "Also report totals with the full-precision first and last layers");
  }

  sbnn::RunConfig load() const {
    sbnn::ConfigDocument doc;
    fs::path base;
    if (!config.empty()) {
      if (!arch.empty()) throw sbnn::ConfigError("--arch and --config are exclusive");
      doc = sbnn::load_config_file(config);
      base = fs::path(config).parent_path();
    } else if (arch.empty()) {
      throw sbnn::ConfigError("one of --config or --arch is required");
    } else if (fs::is_regular_file(arch)) {
      doc = sbnn::load_config_file(arch);
      base = fs::path(arch).parent_path();
    } else {
      doc.section("").assign("preset", arch);
    }
    auto set = [&](const char* sec, const char* key, const std::string& v) {
      doc.section(sec).assign(key, v);
    };
    if (!mode.empty()) set("quant", "mode", mode);
    if (tau != 0) set("quant", "tau", std::to_string(tau));
    if (tau_vector >= 0) set("quant", "tau_vector", std::to_string(tau_vector));
    if (theta >= 0) set("quant", "theta", std::to_string(theta));
    if (!strategy.empty()) set("quant", "strategy", strategy);
    if (!histogram.empty()) set("quant", "histogram", histogram);
    if (epochs != 0) set("train", "epochs", std::to_string(epochs));
    if (batch_size != 0) set("train", "batch_size", std::to_string(batch_size));
    if (lr >= 0) {
      std::ostringstream s;
      s.precision(17);
      s << lr;
      set("train", "lr", s.str());
    }
    if (seed >= 0) set("train", "seed", std::to_string(seed));
    if (data_seed >= 0) set("data", "seed", std::to_string(data_seed));
    if (train_size != 0) set("data", "train_size", std::to_string(train_size));
    if (test_size != 0) set("data", "test_size", std::to_string(test_size));
    if (include_first_last) set("cost", "include_first_last", "true");
    sbnn::RunConfig c = sbnn::parse_run_config(doc, geometry);
    if (!c.histogram_path.empty() && fs::path(c.histogram_path).is_relative() &&
        !fs::exists(c.histogram_path) && !base.empty())
      c.histogram_path = (base / c.histogram_path).string();
    return c;
  }
};

sbnn::Dataset load_input(const std::string& input, const std::string& labels) {
  fs::path images = input;
  fs::path label_path = labels;
  if (fs::is_directory(images)) {
    if (label_path.empty()) label_path = images / "labels.idx";
    images /= "images.idx";
  }
  if (label_path.empty())
    throw sbnn::ConfigError("--labels is required when --input is a file");
  return sbnn::load_idx(images.string(), label_path.string());
}

int cmd_train(const RunFlags& flags, const std::string& out) {
  sbnn::RunConfig cfg = flags.load();
  const auto arch = sbnn::resolve(cfg.arch);
  sbnn::load_histogram(cfg, arch);
  auto [train_set, test_set] = sbnn::load_data(cfg.data);
  fs::create_directories(out);
  std::ofstream log(fs::path(out) / "train_log.jsonl", std::ios::binary);
  cfg.train.log = &log;
  cfg.train.on_epoch = [](const sbnn::EpochRecord& e) {
    std::cout << "epoch " << e.epoch << "  loss " << e.train_loss << "  train "
              << e.train_accuracy << "  val " << e.val_accuracy << "  flips "
              << e.sign_flips << "\n" << std::flush;
  };
  auto result = sbnn::train(arch, train_set, test_set, cfg.train);
  sbnn::save_checkpoint(*result.network, (fs::path(out) / "checkpoint.sbck").string());
  write_file(fs::path(out) / "run.json", result.record.to_json() + "\n");
  std::cout << "final val accuracy " << result.record.final_val_accuracy() << "\n"
            << "wrote " << out << "/checkpoint.sbck, run.json, train_log.jsonl\n";
  return kOk;
}

int cmd_export(const std::string& checkpoint, const std::string& out,
               const std::string& report) {
  const auto net = sbnn::load_checkpoint(checkpoint);
  const sbnn::PackedModel model = sbnn::compile(*net);
  sbnn::save_model(model, out);
  ordered_json j;
  j["model"] = out;
  j["bytes"] = fs::file_size(out);
  j["payload_bits"] = model.payload_bits();
  auto layers = ordered_json::array();
  for (const auto* l : model.quantized_layers())
    layers.push_back({{"tau", l->tau},
                      {"unit", l->unit == sbnn::UnitMode::Kernel ? "kernel" : "vector"},
                      {"c_in", l->c_in},
                      {"c_out", l->c_out},
                      {"full_set", l->full_set},
                      {"payload_bits", l->payload_bits()}});
  j["layers"] = std::move(layers);
  if (!report.empty()) write_file(report, j.dump(2) + "\n");
  std::cout << "wrote " << out << " (" << j["bytes"] << " bytes, payload "
            << model.payload_bits() << " bits)\n";
  return kOk;
}

int cmd_infer(const std::string& model_path, const std::string& input,
              const std::string& labels, const std::string& report,
              const std::string& sharing, int batch) {
  const sbnn::PackedModel model = sbnn::load_model(model_path);
  const sbnn::Engine engine(model);
  const sbnn::Dataset data = load_input(input, labels);
  if (data.dims != model.input)
    throw sbnn::DataError("input images are " + data.dims.str() +
                          " but the model expects " + model.input.str());
  sbnn::RunOptions opts;
  opts.sharing = sharing == "always" ? sbnn::SharingPolicy::Always
                 : sharing == "never" ? sbnn::SharingPolicy::Never
                                      : sbnn::SharingPolicy::Auto;
  sbnn::EngineCounters counters;
  std::vector<int> predictions;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + batch); ++i) idx.push_back(i);
    const sbnn::Tensor logits = engine.run(data.batch(idx), opts, &counters);
    const int k = logits.shape()[1];
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto row = logits.values().subspan(b * k, static_cast<std::size_t>(k));
      const int pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      predictions.push_back(pred);
      correct += pred == data.labels[idx[b]];
    }
  }
  const double acc = data.size() ? static_cast<double>(correct) / data.size() : 0.0;
  ordered_json j;
  j["model"] = model_path;
  j["samples"] = data.size();
  j["accuracy"] = acc;
  j["dot_products"] = counters.dot_products;
  j["lut_lookups"] = counters.lut_lookups;
  j["predictions"] = predictions;
  if (report == "-")
    std::cout << j.dump(2) << "\n";
  else {
    if (!report.empty()) write_file(report, j.dump(2) + "\n");
    std::cout << data.size() << " samples, accuracy " << acc << "\n";
  }
  return kOk;
}

int cmd_cost(const std::string& arch_name, const std::string& geometry,
             const std::string& mode, int tau, int tau_vector, bool first_last,
             bool count_subsets, bool json, const std::string& csv) {
  const auto arch = sbnn::resolve(sbnn::load_architecture(arch_name, geometry));
  sbnn::CostOptions o;
  o.mode = sbnn::parse_quant_mode(mode);
  o.tau = tau;
  o.tau_vector = tau_vector;
  o.include_first_last = first_last;
  o.count_subsets = count_subsets;
  const auto report = sbnn::cost_report(arch, o);
  if (!csv.empty()) {
    std::ostringstream s;
    report.write_csv(s);
    write_file(csv, s.str());
  }
  if (json) {
    std::cout << report.to_json() << "\n";
    return kOk;
  }
  auto line = [](const char* label, const sbnn::CostTotals& t) {
    std::cout << label << ": params " << t.params_bits / 1e6 << " Mbit, Bit-OPs "
              << t.bitops / 1e9 << " G (W/32 " << t.bitops_w32 / 1e9 << " G)\n";
  };
  std::cout << report.architecture << " mode " << mode << " tau " << tau << "\n";
  line("binarized layers", report.binarized);
  if (report.with_first_last) line("with first/last", *report.with_first_last);
  if (o.mode != sbnn::QuantMode::Bnn && o.mode != sbnn::QuantMode::FullPrecision) {
    sbnn::CostOptions b = o;
    b.mode = sbnn::QuantMode::Bnn;
    const auto r = sbnn::ratios(sbnn::cost_report(arch, b), report);
    std::cout << "vs bnn: params " << r.params << "x, Bit-OPs " << r.bitops << "x\n";
  }
  return kOk;
}

int cmd_simulate(const std::string& arch_name, const std::string& geometry,
                 int tau, int tau_vector, const sbnn::HardwareConfig& hw,
                 bool json, const std::string& csv) {
  const auto arch = sbnn::resolve(sbnn::load_architecture(arch_name, geometry));
  const auto bnn = sbnn::simulate_bnn(arch, hw);
  const auto snn = sbnn::simulate_snn(arch, hw, tau, tau_vector);
  const auto tl = sbnn::timeline(bnn, snn);
  if (!csv.empty()) {
    std::ostringstream s;
    tl.write_csv(s);
    write_file(csv, s.str());
  }
  if (json) {
    ordered_json j;
    j["bnn"] = ordered_json::parse(bnn.to_json());
    j["snn"] = ordered_json::parse(snn.to_json());
    j["timeline"] = ordered_json::parse(tl.to_json());
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << arch.spec.name << " on " << hw.pe_count << " PEs @ " << hw.clock_ghz
              << " GHz\nbnn " << bnn.time_ms << " ms, snn(tau=" << tau << ") "
              << snn.time_ms << " ms, speedup " << tl.speedup << "x\n";
  }
  if (!tl.b_never_slower) {
    std::cerr << "warning: some layer is slower than the binary baseline\n";
    return kRuntime;
  }
  return kOk;
}

int cmd_analyze(const std::string& checkpoint, const std::string& run,
                const std::string& out) {
  if (checkpoint.empty() && run.empty())
    throw sbnn::ConfigError("analyze needs --checkpoint and/or --run");
  std::unique_ptr<sbnn::Network> net;
  sbnn::KernelHistogram hist;
  std::vector<std::string> names;
  if (!checkpoint.empty()) {
    net = sbnn::load_checkpoint(checkpoint);
    hist = sbnn::collect_kernel_histogram(*net);
    const auto& arch = net->architecture();
    for (const auto& w : arch.weights)
      if (w.quantized) names.push_back(w.name);
  }
  std::optional<sbnn::RunRecord> record;
  if (!run.empty()) {
    std::ifstream in(run, std::ios::binary);
    if (!in) throw sbnn::DataError("cannot open " + run);
    std::stringstream s;
    s << in.rdbuf();
    record = sbnn::RunRecord::from_json(s.str());
  }
  const auto res = sbnn::analyze_subsets(net ? &hist : nullptr,
                                         record ? &*record : nullptr, names, out);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& f : res.files) std::cout << "wrote " << f.string() << "\n";
  return kOk;
}

int cmd_run(const RunFlags& flags, const std::string& out) {
  const sbnn::RunConfig cfg = flags.load();
  const auto res = sbnn::end_to_end(cfg, out, &std::cout);
  std::cout << (res.passed() ? "all checks passed" : "CHECKS FAILED") << "; see "
            << out << "/summary.json\n";
  return res.passed() ? kOk : kRuntime;
}

int cmd_dataset(const std::string& name, int count, long long seed,
                const std::string& split, const std::string& out) {
  const auto data = sbnn::make_synthetic(name, static_cast<std::size_t>(count),
                                         static_cast<std::uint64_t>(seed), split);
  fs::create_directories(out);
  sbnn::write_idx(data, (fs::path(out) / "images.idx").string(),
                  (fs::path(out) / "labels.idx").string());
  std::cout << "wrote " << data.size() << " " << data.dims.str() << " images to "
            << out << "\n";
  return kOk;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw sbnn::ConfigError("bad number '" + item + "'");
    }
  }
  return out;
}

int cmd_ablate(const RunFlags& flags, const std::string& thetas,
               const std::string& seeds, const std::string& out) {
  sbnn::RunConfig cfg = flags.load();
  if (cfg.train.network.mode != sbnn::QuantMode::Snn)
    throw sbnn::ConfigError("theta ablation needs mode = snn");
  const auto arch = sbnn::resolve(cfg.arch);
  sbnn::load_histogram(cfg, arch);
  auto [train_set, test_set] = sbnn::load_data(cfg.data);
  std::vector<std::uint64_t> seed_list;
  for (double s : parse_doubles(seeds)) {
    if (s < 0 || s != static_cast<double>(static_cast<std::uint64_t>(s)))
      throw sbnn::ConfigError("seeds must be non-negative integers");
    seed_list.push_back(static_cast<std::uint64_t>(s));
  }
  const auto runs = sbnn::ablate_theta(arch, train_set, test_set, cfg.train,
                                       parse_doubles(thetas), seed_list);
  ordered_json j = ordered_json::array();
  for (const auto& r : runs) {
    j.push_back({{"theta", r.theta},
                 {"seed", r.seed},
                 {"final_val_accuracy", r.record.final_val_accuracy()},
                 {"flips_per_epoch", r.flips_per_epoch},
                 {"oscillation", r.oscillation}});
    std::cout << "theta " << r.theta << " seed " << r.seed << " acc "
              << r.record.final_val_accuracy() << " oscillation " << r.oscillation << "\n";
  }
  write_file(out, j.dump(2) + "\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sub-bit binary neural networks: training, export, inference, "
               "cost accounting and accelerator simulation.\n"
               "SBNN_OUTPUT_DIR sets the default output directory."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sbnn 0.1.0");

  RunFlags train_flags, run_flags, ablate_flags;
  std::string train_out = default_out("train");
  auto* train = app.add_subcommand("train", "Train a network from a config or preset");
  train_flags.add_to(train);
  train->add_option("-o,--out", train_out, "Output directory");

  std::string ckpt, model_out = default_out("model.sbnn"), export_report;
  auto* exp = app.add_subcommand("export", "Pack a checkpoint into a .sbnn model");
  exp->add_option("--checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  exp->add_option("-o,--out", model_out, "Model file");
  exp->add_option("--report", export_report, "Write a JSON summary here");

  std::string model_in, input, labels, infer_report, sharing = "auto";
  int infer_batch = 256;
  auto* inf = app.add_subcommand("infer", "Run a .sbnn model on IDX images");
  inf->add_option("--model", model_in, "Model file")->required()->check(CLI::ExistingFile);
  inf->add_option("--input", input, "Directory with images.idx/labels.idx, or an IDX image file")
      ->required()->check(CLI::ExistingPath);
  inf->add_option("--labels", labels, "IDX label file");
  inf->add_option("--report", infer_report, "JSON report path ('-' for stdout)");
  inf->add_option("--sharing", sharing, "Shared convolution: auto, always or never")
      ->check(CLI::IsMember({"auto", "always", "never"}));
  inf->add_option("--batch", infer_batch, "Batch size")->check(CLI::PositiveNumber);

  std::string cost_arch, cost_geo, cost_mode = "snn", cost_csv;
  int cost_tau = 5, cost_tau_vector = 0;
  bool cost_first_last = false, cost_subsets = false, cost_json = false;
  auto* cost = app.add_subcommand("cost", "Parameter and Bit-OPs accounting");
  cost->add_option("--arch", cost_arch, "Preset name or architecture file")->required();
  cost->add_option("--geometry", cost_geo, "cifar or imagenet");
  cost->add_option("--mode", cost_mode, "fp, bnn, vanilla or snn");
  cost->add_option("--tau", cost_tau, "Bits per k x k kernel");
  cost->add_option("--tau-vector", cost_tau_vector, "Bits per 8-wide 1x1 vector");
  cost->add_flag("--include-first-last", cost_first_last,
                 "Also total the full-precision first and last layers");
  cost->add_flag("--count-subsets", cost_subsets, "Add subset table storage");
  cost->add_flag("--json", cost_json, "Print the JSON report");
  cost->add_option("--csv", cost_csv, "Write the per-layer CSV here");

  std::string sim_arch, sim_geo, sim_csv;
  int sim_tau = 5, sim_tau_vector = 0;
  bool sim_json = false;
  sbnn::HardwareConfig hw;
  auto* sim = app.add_subcommand("simulate", "Cycle model of the binary and sub-bit engines");
  sim->add_option("--arch", sim_arch, "Preset name or architecture file")->required();
  sim->add_option("--geometry", sim_geo, "cifar or imagenet");
  sim->add_option("--tau", sim_tau, "Bits per k x k kernel");
  sim->add_option("--tau-vector", sim_tau_vector, "Bits per 8-wide 1x1 vector");
  sim->add_option("--pes", hw.pe_count, "Processing engines");
  sim->add_option("--clock", hw.clock_ghz, "Clock in GHz");
  sim->add_option("--accumulators", hw.accumulators_per_pe, "Accumulators per PE");
  sim->add_option("--lb-width", hw.line_buffer_width, "Line buffer width in bits");
  sim->add_option("--fill-cycles", hw.fill_cycles, "Per-layer pipeline fill");
  sim->add_flag("--json", sim_json, "Print JSON reports");
  sim->add_option("--csv", sim_csv, "Write the per-layer timeline CSV here");

  std::string an_ckpt, an_run, an_out = default_out("analysis");
  auto* an = app.add_subcommand("analyze", "Kernel histograms, top-k coverage, subset evolution");
  an->add_option("--checkpoint", an_ckpt, "Checkpoint file")->check(CLI::ExistingFile);
  an->add_option("--run", an_run, "run.json from train")->check(CLI::ExistingFile);
  an->add_option("-o,--out", an_out, "Output directory");

  std::string run_out = default_out("run");
  auto* run = app.add_subcommand("run", "train, export, cost, simulate, analyze and check parity");
  run_flags.add_to(run);
  run->add_option("-o,--out", run_out, "Output directory");

  std::string ds_name = "desk", ds_split = "train", ds_out = default_out("data");
  int ds_count = 1000;
  long long ds_seed = 7;
  auto* ds = app.add_subcommand("dataset", "Write a synthetic dataset as IDX files");
  ds->add_option("--name", ds_name, "desk or blobs2");
  ds->add_option("--count", ds_count, "Samples")->check(CLI::PositiveNumber);
  ds->add_option("--seed", ds_seed, "Generator seed")->check(CLI::NonNegativeNumber);
  ds->add_option("--split", ds_split, "Sample stream, e.g. train or test");
  ds->add_option("-o,--out", ds_out, "Output directory");

  std::string thetas = "0,0.001,0.01", seeds = "1,2,3", ab_out = default_out("theta.json");
  auto* ab = app.add_subcommand("ablate-theta", "Train once per (theta, seed)");
  ablate_flags.add_to(ab);
  ab->add_option("--thetas", thetas, "Comma-separated thresholds");
  ab->add_option("--seeds", seeds, "Comma-separated seeds");
  ab->add_option("-o,--out", ab_out, "JSON output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  try {
    if (*train) return cmd_train(train_flags, train_out);
    if (*exp) return cmd_export(ckpt, model_out, export_report);
    if (*inf) return cmd_infer(model_in, input, labels, infer_report, sharing, infer_batch);
    if (*cost)
      return cmd_cost(cost_arch, cost_geo, cost_mode, cost_tau, cost_tau_vector,
                      cost_first_last, cost_subsets, cost_json, cost_csv);
    if (*sim) return cmd_simulate(sim_arch, sim_geo, sim_tau, sim_tau_vector, hw, sim_json, sim_csv);
    if (*an) return cmd_analyze(an_ckpt, an_run, an_out);
    if (*run) return cmd_run(run_flags, run_out);
    if (*ds) return cmd_dataset(ds_name, ds_count, ds_seed, ds_split, ds_out);
    if (*ab) return cmd_ablate(ablate_flags, thetas, seeds, ab_out);
  } catch (const sbnn::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const sbnn::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
