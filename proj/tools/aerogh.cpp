// aerogh: command-line entry point for the greenhouse simulator, telemetry
// service and leaf classifier. Exit codes: 0 success, 1 runtime fault,
// 2 validation or usage error (including an unusable output directory).

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <thread>

#include <CLI11.hpp>

#include "aerogh/datalog/datalog.hpp"
#include "aerogh/runtime/closed_loop.hpp"
#include "aerogh/runtime/manifest.hpp"
#include "aerogh/runtime/service.hpp"
#include "aerogh/vision/checkpoint.hpp"
#include "aerogh/vision/dataset.hpp"
#include "aerogh/vision/evaluate.hpp"
#include "aerogh/vision/synth.hpp"
#include "aerogh/vision/train.hpp"

namespace {

using namespace aerogh;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kFault = 1;
constexpr int kInvalid = 2;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void print_summary(const runtime::RunSummary& s, const fs::path& out_dir) {
  std::printf("simulated %lld s, log %s (%llu records)\n", static_cast<long long>(s.duration),
              out_dir.string().c_str(), static_cast<unsigned long long>(s.log_records));
  std::printf("energy by device (kWh):\n");
  for (const auto& [dev, kwh] : s.energy_kwh)
    if (kwh > 0.0) std::printf("  %-16s %10.4f\n", dev.c_str(), kwh);
  std::printf("  %-16s %10.4f\n", "total", s.energy_total_kwh);
  std::printf("water: dispensed %.3f L, returned %.3f L, consumed %.3f L, recharged %.3f L\n",
              s.water_dispensed, s.water_returned, s.water_consumed, s.water_recharged);
  std::printf("alerts: %zu\n", s.alert_count);
}

// An unusable output directory is a bad manifest; later write failures are faults.
template <class Make>
auto with_output_dir(Make make) {
  try {
    return make();
  } catch (const datalog::DatalogIoError& e) {
    throw ValidationError(e.what());
  }
}

int cmd_sim_run(const std::string& manifest_path) {
  const auto m = runtime::load_manifest(manifest_path);
  telemetry::Broker broker(telemetry::kDefaultSubscriberBuffer, false);
  auto log_ptr = with_output_dir([&] { return std::make_unique<datalog::DatalogWriter>(m.output_dir, 4096); });
  auto& log = *log_ptr;
  runtime::LoopOptions lo;
  lo.sim = m.config;
  runtime::ClosedLoop loop(lo, broker, log);
  loop.run_until(m.duration);
  const auto summary = loop.finish();
  log.close();
  print_summary(summary, m.output_dir);
  return kOk;
}

int cmd_serve(const std::string& manifest_path, const std::string& tcp, const std::string& http) {
  const auto m = runtime::load_manifest(manifest_path);
  runtime::ServeOptions opts;
  if (!tcp.empty()) opts.tcp = telemetry::parse_listen_address(tcp);
  if (!http.empty()) opts.http = telemetry::parse_listen_address(http);
  if (!opts.tcp && !opts.http) throw ValidationError("serve needs --listen-tcp and/or --listen-http");

  auto service_ptr = with_output_dir([&] { return std::make_unique<runtime::Service>(m, opts); });
  auto& service = *service_ptr;
  try {
    service.start();
  } catch (const telemetry::BindError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (opts.tcp) std::printf("tcp  listening on %s:%d\n", opts.tcp->host.c_str(), service.tcp_port());
  if (opts.http) std::printf("http listening on %s:%d\n", opts.http->host.c_str(), service.http_port());
  std::fflush(stdout);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  std::printf("shutdown complete\n");
  print_summary(service.summary(), m.output_dir);
  return kOk;
}

std::vector<vision::LabeledImage> load_images(const std::string& spec, std::uint64_t seed) {
  const std::string prefix = "synthetic:";
  if (spec.rfind(prefix, 0) == 0) {
    int n = 0;
    try {
      n = std::stoi(spec.substr(prefix.size()));
    } catch (const std::exception&) {
      throw ValidationError("bad dataset spec '" + spec + "'");
    }
    if (n <= 0 || n % 3 != 0) throw ValidationError("synthetic:N needs N > 0 and divisible by 3");
    return vision::synthesize_dataset(n / 3, seed);
  }
  if (!fs::is_directory(spec)) throw ValidationError("dataset directory '" + spec + "' does not exist");
  auto images = vision::load_directory(spec);
  if (images.empty()) throw ValidationError("no images under '" + spec + "'");
  return images;
}

void write_report(const vision::EvalReport& report, const std::string& path) {
  std::cout << vision::render_table(report);
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path);
  out << vision::to_json(report).dump(2) << '\n';
  std::ofstream table(path + ".txt");
  table << vision::render_table(report);
}

struct TrainArgs {
  std::string data = "synthetic:1200";
  std::string out = "model.bin";
  std::string report;
  int epochs = 100;
  int batch = 32;
  double lr = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  int freeze_epochs = 0;
  int augment_to = 0;
  bool balance = false;
};

int cmd_train(const TrainArgs& a) {
  vision::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.learning_rate = a.lr;
  cfg.momentum = a.momentum;
  cfg.seed = a.seed;
  cfg.freeze_backbone_epochs = a.freeze_epochs;
  vision::validate(cfg);

  auto images = load_images(a.data, a.seed);
  auto data = vision::split(images, {}, a.seed);
  if (a.balance) data.train = vision::balance_classes(data.train, a.seed);
  if (a.augment_to > 0)
    data.train = vision::augment(data.train, static_cast<std::size_t>(a.augment_to), a.seed);
  std::printf("train %zu / val %zu / test %zu images\n", data.train.size(), data.val.size(), data.test.size());

  vision::ConvNet<float> model(vision::Architecture{}, a.seed);
  const auto curves = vision::train(model, data, cfg, [](const vision::EpochStats& e) {
    std::printf("epoch %3d  loss %.4f  train %.4f  val %.4f%s\n", e.epoch + 1, e.train_loss, e.train_accuracy,
                e.val_accuracy, e.backbone_frozen ? "  (backbone frozen)" : "");
    std::fflush(stdout);
  });
  vision::save_checkpoint(model, a.out);
  auto report = vision::evaluate(model, data.test);
  report.train_curve = curves.train_curve;
  report.val_curve = curves.val_curve;
  std::printf("model written to %s\ntest set:\n", a.out.c_str());
  write_report(report, a.report);
  return kOk;
}

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& report_path,
             std::uint64_t seed) {
  if (!fs::exists(model_path)) throw ValidationError("model file '" + model_path + "' does not exist");
  vision::ConvNet<float> model = [&] {
    try {
      return vision::load_checkpoint(model_path);
    } catch (const vision::CheckpointError& e) {
      throw ValidationError(e.what());
    }
  }();
  const auto images = load_images(data, seed);
  write_report(vision::evaluate(model, images), report_path);
  return kOk;
}

int cmd_synth(const std::string& out, int per_class, std::uint64_t seed) {
  if (per_class < 1) throw ValidationError("--per-class must be >= 1");
  const auto images = vision::synthesize_dataset(per_class, seed);
  vision::save_directory(images, out);
  std::printf("wrote %zu images to %s\n", images.size(), out.c_str());
  return kOk;
}

int cmd_replay(const std::string& path, const std::vector<SimTime>& energy_window) {
  if (!fs::exists(path)) throw ValidationError("'" + path + "' does not exist");
  const auto result = datalog::replay(path);
  for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::map<std::string, std::size_t> by_kind;
  for (const auto& r : result.records) by_kind[std::string(datalog::to_string(r.kind))] += 1;
  std::printf("records: %zu\n", result.records.size());
  for (const auto& [k, n] : by_kind) std::printf("  %-10s %zu\n", k.c_str(), n);
  if (!result.records.empty())
    std::printf("span: %lld .. %lld s\n", static_cast<long long>(result.records.front().sim_time),
                static_cast<long long>(result.records.back().sim_time));
  if (energy_window.size() == 2) {
    const auto rep = datalog::energy_report(result.records, energy_window[0], energy_window[1]);
    std::printf("energy %lld .. %lld s (kWh):\n", static_cast<long long>(rep.from), static_cast<long long>(rep.to));
    for (const auto& [dev, kwh] : rep.kwh_by_device)
      if (kwh > 0.0) std::printf("  %-16s %10.4f\n", dev.c_str(), kwh);
    std::printf("  %-16s %10.4f\n", "total", rep.total_kwh);
    if (rep.notice) std::printf("note: %s\n", rep.notice->c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aeroponic greenhouse simulator, telemetry service and leaf classifier"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("sim", "Run the closed-loop simulation");
  sim->require_subcommand(1);
  std::string manifest;
  auto* sim_run = sim->add_subcommand("run", "Run a manifest to completion and write its datalog");
  sim_run->add_option("manifest", manifest, "Run manifest (JSON)")->required();
  auto* sim_defaults = sim->add_subcommand("defaults", "Print the default simulator config as JSON");

  auto* serve = app.add_subcommand("serve", "Run the paced loop with telemetry endpoints until SIGINT/SIGTERM");
  std::string serve_manifest, listen_tcp, listen_http;
  serve->add_option("manifest", serve_manifest, "Run manifest (JSON)")->required();
  serve->add_option("--listen-tcp", listen_tcp, "host:port for the NDJSON endpoint");
  serve->add_option("--listen-http", listen_http, "host:port for the HTTP endpoint");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the leaf classifier");
  train->add_option("--data", ta.data, "Dataset directory or synthetic:N")->capture_default_str();
  train->add_option("--epochs", ta.epochs)->capture_default_str();
  train->add_option("--batch-size", ta.batch)->capture_default_str();
  train->add_option("--lr", ta.lr)->capture_default_str();
  train->add_option("--momentum", ta.momentum)->capture_default_str();
  train->add_option("--seed", ta.seed)->capture_default_str();
  train->add_option("--freeze-epochs", ta.freeze_epochs, "Initial epochs updating only the head")
      ->capture_default_str();
  train->add_flag("--balance", ta.balance, "Resample the training split to equal class sizes");
  train->add_option("--augment-to", ta.augment_to, "Grow the training split to this many images");
  train->add_option("--out", ta.out, "Checkpoint path")->capture_default_str();
  train->add_option("--report", ta.report, "Write the test-set report (JSON) here");

  std::string model_path, eval_data, eval_report;
  std::uint64_t eval_seed = 1;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--model", model_path)->required();
  eval->add_option("--data", eval_data, "Dataset directory or synthetic:N")->required();
  eval->add_option("--report", eval_report, "Write the report (JSON) here");
  eval->add_option("--seed", eval_seed, "Seed for synthetic:N data")->capture_default_str();

  std::string synth_out;
  int per_class = 400;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "Write a procedural leaf dataset as PPM files");
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--per-class", per_class)->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();

  std::string replay_path;
  std::vector<SimTime> energy_window;
  auto* replay = app.add_subcommand("replay", "Read back a datalog file or directory");
  replay->add_option("path", replay_path)->required();
  replay->add_option("--energy", energy_window, "FROM TO: energy report over a window (s)")->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*sim_run) return cmd_sim_run(manifest);
    if (*sim_defaults) {
      std::cout << nlohmann::json(sim::SimConfig{}).dump(2) << '\n';
      return kOk;
    }
    if (*serve) return cmd_serve(serve_manifest, listen_tcp, listen_http);
    if (*train) return cmd_train(ta);
    if (*eval) return cmd_eval(model_path, eval_data, eval_report, eval_seed);
    if (*synth) return cmd_synth(synth_out, per_class, synth_seed);
    if (*replay) return cmd_replay(replay_path, energy_window);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kInvalid;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "invalid: %s\n", e.what());
    return kInvalid;
  } catch (const vision::ImageIoError& e) {
    std::fprintf(stderr, "image: %s\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFault;
  }
  return kOk;
}
