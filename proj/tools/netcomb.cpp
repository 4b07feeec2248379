// Batch CLI. Subcommands mirror the service endpoints so every workflow
// can run offline.
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "netcomb/channel.hpp"
#include "netcomb/csi.hpp"
#include "netcomb/dataset_store.hpp"
#include "netcomb/rl_env.hpp"
#include "netcomb/rng.hpp"
#include "netcomb/service.hpp"
#include "netcomb/traffic.hpp"
#include "netcomb/wire.hpp"

using namespace netcomb;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << data;
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Series files are either the text format or a JSON document.
CellCountSeries read_series_file(const std::string& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return series_from_json(json::parse(text), path);
  return read_series(text);
}

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_file(out, j.dump(2));
  }
}

struct SimulateArgs {
  std::string mode = "protocol-stack";
  std::string scenario;
  std::string request;
  std::uint64_t seed = 1;
  double duration = 10.0;
  std::size_t users = 10;
  std::string out = "netcomb-out";
};

int run_simulate(const SimulateArgs& a) {
  SimRequest req;
  if (!a.request.empty()) {
    req = request_from_json(read_json(a.request));
  } else {
    req.scenario = load_scenario_file(a.scenario);
    req.n_users = a.users;
    req.duration = a.duration;
    req.seed = a.seed;
  }
  req.mode = sim_mode_from_string(a.mode);
  const auto result = run_simulation(req);
  const fs::path dir(a.out);
  json doc = result;
  if (result.link) {
    write_file(dir / "channel.bin", result.link->payload);
    doc["payload_file"] = "channel.bin";
    doc["payload_sha256"] = sha256_hex(result.link->payload);
  }
  write_file(dir / "result.json", doc.dump(2));
  std::cout << to_string(req.mode) << ": " << result.metadata.num_ticks << " ticks, " << result.metadata.n_users
            << " users, " << result.metadata.num_cells << " cells -> " << (dir / "result.json").string() << "\n";
  return 0;
}

struct EnvArgs {
  std::string scenario;
  std::uint64_t seed = 1;
  std::size_t steps = 5;
  std::size_t users = 10;
  std::string policy = "identity";
  double w_cov = 1.0;
  double w_rate = 1.0;
  double rate_norm = 1e6;
  std::string out;
};

int run_env_demo(const EnvArgs& a) {
  SimRequest req;
  req.scenario = load_scenario_file(a.scenario);
  req.n_users = a.users;
  AntennaEnv env;
  const auto first = env.reset(req, a.steps, a.seed);
  Rng rng(a.seed, Stage::event, {0xE0});
  auto pick = [&](const std::vector<double>& v) { return v[rng.next_u64() % v.size()]; };
  json trajectory = json::array();
  trajectory.push_back({{"step", 0}, {"indicators", first.indicators}});
  while (!env.done()) {
    Action action;
    for (int id : env.optimized_cells()) {
      AntennaConfig cfg = env.state().beams.at(id);
      if (a.policy == "random") {
        const auto& g = env.grid();
        cfg = {pick(g.h_beamwidth()), pick(g.v_beamwidth()), pick(g.azimuth()), pick(g.downtilt()), true};
      }
      action[id] = cfg;
    }
    const auto r = env.step(action);
    const double reward = default_reward(r.indicators, a.w_cov, a.w_rate, a.rate_norm);
    std::cout << "step " << r.state.step_index << " coverage=" << r.indicators.coverage_ratio
              << " mean_rate=" << r.indicators.mean_user_rate << " reward=" << reward << (r.done ? " done" : "")
              << "\n";
    trajectory.push_back({{"step", r.state.step_index},
                          {"action", action_to_json(action)},
                          {"indicators", r.indicators},
                          {"reward", reward}});
  }
  if (!a.out.empty()) write_file(a.out, trajectory.dump(2));
  return 0;
}

struct CsiArgs {
  std::string store;
  std::string params;
  std::string scenario;
  std::size_t users = 4;
  std::size_t samples_per_user = 1;
  int subband = 48;
  std::uint64_t seed = 1;
  std::string key;
  std::string codec;
  std::string restored;
  std::string out;
};

int run_csi_gen(const CsiArgs& a) {
  CsiDatasetParams p;
  if (!a.params.empty()) {
    p = csi_params_from_json(read_json(a.params));
  } else {
    p.scenario = load_scenario_file(a.scenario);
    p.n_users = a.users;
    p.samples_per_user = a.samples_per_user;
    p.subband_size = a.subband;
    p.seed = a.seed;
  }
  DatasetStore store(a.store);
  CsiHarness harness(store);
  const auto d = harness.generate_or_fetch(p);
  std::cout << "key " << d.key << (d.cache_hit ? " (cached)" : " (simulated)") << ", " << d.samples.size()
            << " samples\n";
  if (!a.out.empty()) {
    json samples = json::array();
    for (const auto& s : d.samples) samples.push_back(s);
    write_file(a.out, json{{"key", d.key}, {"samples", samples}}.dump());
  }
  return 0;
}

int run_csi_verify(const CsiArgs& a) {
  DatasetStore store(a.store);
  CsiHarness harness(store);
  const auto d = harness.load(a.key);
  VerificationReport report;
  if (!a.restored.empty()) {
    const json doc = read_json(a.restored);
    const json& arr = doc.is_object() ? doc.at("samples") : doc;
    std::vector<CsiSample> restored;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      restored.push_back(csi_sample_from_json(arr[i], "restored[" + std::to_string(i) + "]"));
    }
    report = system_verify(d, restored);
  } else {
    report = system_verify(d, codec_by_name(a.codec.empty() ? "identity" : a.codec));
  }
  emit(report, a.out);
  return 0;
}

struct TrafficArgs {
  std::string scenario;
  std::string event;
  std::size_t users = 500;
  std::uint64_t seed = 1;
  std::string out;
  std::string pred;
  std::string truth;
  std::vector<std::string> history;
  std::size_t k = 5;
  std::string criterion = "peak";
};

int run_traffic_synth(const TrafficArgs& a) {
  const auto scenario = load_scenario_file(a.scenario);
  const auto spec = event_from_json(read_json(a.event));
  const auto series = synthesize_event(spec, scenario, a.users, a.seed);
  if (a.out.empty()) {
    std::cout << write_series(series);
  } else {
    write_file(a.out, write_series(series));
    std::cout << series.num_cells() << " cells x " << series.num_bins() << " bins -> " << a.out << "\n";
  }
  return 0;
}

int run_traffic_eval(const TrafficArgs& a) {
  const auto criterion = topk_criterion_from_string(a.criterion, "criterion");
  const auto truth = read_series_file(a.truth);
  json out;
  if (!a.history.empty()) {
    std::vector<CellCountSeries> history;
    for (const auto& h : a.history) history.push_back(read_series_file(h));
    const auto r = transfer_evaluate(history, truth, a.k, criterion);
    out = {{"metrics", r.metrics}, {"topk", r.topk}};
  } else {
    const auto pred = read_series_file(a.pred);
    out = {{"metrics", forecast_metrics(pred, truth)}, {"topk", topk_report(pred, truth, a.k, criterion)}};
  }
  emit(out, a.out);
  return 0;
}

int run_serve(const std::string& host, int port, const std::string& root) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);  // worker threads inherit the mask

  ServiceOptions opts;
  opts.data_root = root.empty() ? data_root_from_env() : fs::path(root);
  Service service(opts);
  const int bound = service.start(host, port);
  std::cout << "netcomb " << kVersion << " listening on " << host << ":" << bound << ", data root "
            << opts.data_root.string() << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  std::cout << "shutting down" << std::endl;
  service.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"netcomb: composable radio-network simulation"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run one combined emulator");
  simulate->add_option("--mode", sim.mode, "protocol-stack | coverage | link-channel")->capture_default_str();
  auto* scen_opt = simulate->add_option("--scenario", sim.scenario, "Scenario JSON file")->check(CLI::ExistingFile);
  auto* req_opt = simulate->add_option("--request", sim.request, "Full request JSON file")->check(CLI::ExistingFile);
  scen_opt->excludes(req_opt);
  simulate->add_option("--seed", sim.seed)->capture_default_str();
  simulate->add_option("--duration", sim.duration, "Seconds")->capture_default_str();
  simulate->add_option("--users", sim.users)->capture_default_str();
  simulate->add_option("--out", sim.out, "Output directory")->capture_default_str();

  EnvArgs env;
  auto* env_cmd = app.add_subcommand("env", "RL antenna environment");
  env_cmd->require_subcommand(1);
  auto* demo = env_cmd->add_subcommand("demo", "Run one episode with a fixed policy");
  demo->add_option("--scenario", env.scenario)->required()->check(CLI::ExistingFile);
  demo->add_option("--seed", env.seed)->capture_default_str();
  demo->add_option("--steps", env.steps, "Episode length")->capture_default_str();
  demo->add_option("--users", env.users)->capture_default_str();
  demo->add_option("--policy", env.policy)->check(CLI::IsMember({"identity", "random"}))->capture_default_str();
  demo->add_option("--w-cov", env.w_cov)->capture_default_str();
  demo->add_option("--w-rate", env.w_rate)->capture_default_str();
  demo->add_option("--rate-norm", env.rate_norm, "bit/s")->capture_default_str();
  demo->add_option("--out", env.out, "Trajectory JSON file");

  CsiArgs csi;
  csi.store = data_root_from_env().string();
  auto* csi_cmd = app.add_subcommand("csi", "CSI feedback datasets");
  csi_cmd->require_subcommand(1);
  csi_cmd->add_option("--store", csi.store, "Dataset store root")->capture_default_str();
  auto* gen = csi_cmd->add_subcommand("gen", "Generate or fetch a dataset");
  auto* params_opt = gen->add_option("--params", csi.params, "CsiDatasetParams JSON file")->check(CLI::ExistingFile);
  gen->add_option("--scenario", csi.scenario)->check(CLI::ExistingFile)->excludes(params_opt);
  gen->add_option("--users", csi.users)->capture_default_str();
  gen->add_option("--samples-per-user", csi.samples_per_user)->capture_default_str();
  gen->add_option("--subband", csi.subband, "REs per subband")->capture_default_str();
  gen->add_option("--seed", csi.seed)->capture_default_str();
  gen->add_option("--out", csi.out, "Write characteristic samples as JSON");
  auto* verify = csi_cmd->add_subcommand("verify", "NMSE and system-level verification");
  verify->add_option("--key", csi.key)->required();
  auto* codec_opt = verify->add_option("--codec", csi.codec, "identity | null | quantize:<bits>");
  verify->add_option("--restored", csi.restored, "Restored samples JSON")->check(CLI::ExistingFile)->excludes(codec_opt);
  verify->add_option("--out", csi.out);

  TrafficArgs tr;
  auto* traffic = app.add_subcommand("traffic", "High-traffic event studies");
  traffic->require_subcommand(1);
  auto* synth = traffic->add_subcommand("synth", "Synthesize per-cell counts for an event");
  synth->add_option("--scenario", tr.scenario)->required()->check(CLI::ExistingFile);
  synth->add_option("--event", tr.event, "EventSpec JSON file")->required()->check(CLI::ExistingFile);
  synth->add_option("--users", tr.users)->capture_default_str();
  synth->add_option("--seed", tr.seed)->capture_default_str();
  synth->add_option("--out", tr.out, "Series file");
  auto* eval = traffic->add_subcommand("eval", "Score a forecast against truth");
  eval->add_option("--truth", tr.truth)->required()->check(CLI::ExistingFile);
  auto* pred_opt = eval->add_option("--pred", tr.pred)->check(CLI::ExistingFile);
  eval->add_option("--history", tr.history, "Historical series; forecasts with the baseline")
      ->check(CLI::ExistingFile)
      ->excludes(pred_opt);
  eval->add_option("--k", tr.k)->capture_default_str();
  eval->add_option("--criterion", tr.criterion)->check(CLI::IsMember({"peak", "total"}))->capture_default_str();
  eval->add_option("--out", tr.out);

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string root;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--data-root", root, "Defaults to NETCOMB_DATA_ROOT");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      if (sim.scenario.empty() && sim.request.empty()) throw ValidationError("scenario", "--scenario or --request required");
      return run_simulate(sim);
    }
    if (*demo) return run_env_demo(env);
    if (*gen) {
      if (csi.scenario.empty() && csi.params.empty()) throw ValidationError("scenario", "--scenario or --params required");
      return run_csi_gen(csi);
    }
    if (*verify) return run_csi_verify(csi);
    if (*synth) return run_traffic_synth(tr);
    if (*eval) {
      if (tr.pred.empty() && tr.history.empty()) throw ValidationError("pred", "--pred or --history required");
      return run_traffic_eval(tr);
    }
    if (*serve) return run_serve(host, port, root);
  } catch (const ValidationError& e) {
    std::cerr << "error: invalid " << e.field() << ": " << e.detail() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
