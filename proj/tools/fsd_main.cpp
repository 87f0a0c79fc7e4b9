// fsd: run, compare and serve speculative decoding sessions; closed-form
// latency/cost calculators.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "fsd/adapter.hpp"
#include "fsd/analytics.hpp"
#include "fsd/errors.hpp"
#include "fsd/experiment.hpp"
#include "fsd/format.hpp"
#include "fsd/tcp.hpp"

namespace {

using namespace fsd;

constexpr int kConfigExit = 2;

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_serve(const std::string& config_path, const std::string& host, std::uint16_t port,
              int sessions) {
  const ExperimentConfig cfg = ExperimentConfig::load(config_path);
  ServeOptions opts;
  opts.model = cfg.model;
  opts.model.seed = cfg.seeds.front();
  opts.server_queue = cfg.server_queue;
  if (cfg.emulate_latency) opts.emulated_verify_ms = cfg.latency.t_q;

  TcpListener listener = TcpListener::bind(host, port);
  std::cerr << "listening on " << host << ':' << listener.port() << std::endl;
  for (int served = 0; sessions == 0 || served < sessions; ++served) {
    TcpStream stream = listener.accept();
    try {
      const ServeReport r = serve_session(std::move(stream), opts);
      std::cerr << "session done: mode=" << to_string(r.mode) << " rounds=" << r.rounds.size()
                << " exits_sent=" << r.exits_sent << " discarded=" << r.discarded << std::endl;
    } catch (const std::exception& e) {
      std::cerr << "session failed: " << e.what() << std::endl;
    }
  }
  return 0;
}

int cmd_client(const std::string& config_path, const std::string& host, std::uint16_t port,
               const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::load(config_path);
  cfg.transport = Transport::tcp;
  cfg.host = host;
  cfg.port = port;
  // The server was started with one model seed; only that session is meaningful.
  const RunRecord r = run_single(cfg, cfg.seeds.front());
  write_output(out, summary_csv(cfg, {r}));
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out, const std::string& per_round,
            const std::string& trace) {
  const ExperimentConfig cfg = ExperimentConfig::load(config_path);
  const std::vector<RunRecord> records = run_experiment(cfg);
  write_output(out, summary_csv(cfg, records));
  if (!per_round.empty()) write_output(per_round, per_round_csv(records));
  if (!trace.empty()) {
    std::string text;
    for (const RunRecord& r : records) text += trace_text(r);
    write_output(trace, text);
  }
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out) {
  const ExperimentConfig cfg = ExperimentConfig::load(config_path);
  write_output(out, compare_csv(compare_modes(cfg)));
  return 0;
}

int cmd_cost(const std::string& pricing_file, const PricingRow& defaults) {
  const std::vector<PricingRow> rows = parse_pricing_csv(read_file(pricing_file));
  if (rows.empty()) throw DomainError("pricing file has no rows");
  std::cout << "provider,cloud_ar,cloud_sd,edge_sd\n";
  for (PricingRow row : rows) {
    row.requests = defaults.requests;
    row.in_tokens = defaults.in_tokens;
    row.out_tokens = defaults.out_tokens;
    row.gamma = defaults.gamma;
    row.tau = defaults.tau;
    std::cout << row.provider << ',' << std::llround(cost_cloud_ar(row)) << ','
              << std::llround(cost_cloud_sd(row)) << ',' << std::llround(cost_edge_sd(row)) << '\n';
  }
  return 0;
}

int cmd_adapter(const std::string& config_path, std::uint64_t seed) {
  SyntheticParams params;
  if (!config_path.empty()) params = ExperimentConfig::load(config_path).model;
  if (params.beta.empty()) params.beta = default_beta(params.num_exits);
  params.seed = seed;
  run_model_adapter(params, std::cin, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speculative decoding with early-exit pre-drafting: simulator, TCP runtime, models"};
  app.require_subcommand(1);

  std::string config;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string out;

  auto* serve = app.add_subcommand("serve", "Serve verification sessions over TCP");
  int sessions = 0;
  serve->add_option("--config", config, "Config file (model and server queue)")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (0 = ephemeral)")->required();
  serve->add_option("--sessions", sessions, "Exit after this many sessions (0 = never)")->capture_default_str();

  auto* client = app.add_subcommand("client", "Run one session against a running server");
  client->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  client->add_option("--host", host, "Server host")->required();
  client->add_option("--port", port, "Server port")->required();
  client->add_option("--out", out, "Summary CSV path (default stdout)");

  auto* run = app.add_subcommand("run", "Run an experiment and write the summary CSV");
  std::string per_round;
  std::string trace;
  run->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Summary CSV path (default stdout)");
  run->add_option("--per-round", per_round, "Per-round CSV path");
  run->add_option("--trace", trace, "Event trace path (sim only)");

  auto* compare = app.add_subcommand("compare", "Run AR, SD and FSD and compare wall time");
  compare->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", out, "Report CSV path (default stdout)");

  auto* cost = app.add_subcommand("cost", "API cost of cloud AR, cloud SD and edge-cloud SD");
  std::string pricing_file;
  PricingRow defaults;
  cost->add_option("--pricing-file", pricing_file, "provider,draft_in,draft_out,target_in,target_out")
      ->required()
      ->check(CLI::ExistingFile);
  cost->add_option("--gamma", defaults.gamma, "Draft length")->capture_default_str();
  cost->add_option("--tau", defaults.tau, "Mean tokens per round")->capture_default_str();
  cost->add_option("--requests", defaults.requests, "Request count")->capture_default_str();
  cost->add_option("--in-tokens", defaults.in_tokens, "Prompt tokens per request")->capture_default_str();
  cost->add_option("--out-tokens", defaults.out_tokens, "Completion tokens per request")->capture_default_str();

  auto* project = app.add_subcommand("project", "Projected SD to FSD speedup");
  double gamma = 4;
  double c = 0;
  double r = 0;
  project->add_option("--gamma", gamma, "Draft length")->required();
  project->add_option("--c", c, "Tp / Tq")->required();
  project->add_option("--r", r, "Cache miss rate")->required();

  auto* heatmap = app.add_subcommand("heatmap", "Speedup projection over a (c, r) grid");
  AxisRange c_axis{0.0, 1.0};
  AxisRange r_axis{0.0, 1.0};
  std::size_t steps = 11;
  heatmap->add_option("--gamma", gamma, "Draft length")->required();
  heatmap->add_option("--c-min", c_axis.min)->capture_default_str();
  heatmap->add_option("--c-max", c_axis.max)->capture_default_str();
  heatmap->add_option("--r-min", r_axis.min)->capture_default_str();
  heatmap->add_option("--r-max", r_axis.max)->capture_default_str();
  heatmap->add_option("--steps", steps, "Points per axis")->capture_default_str();
  heatmap->add_option("--out", out, "CSV path (default stdout)");

  auto* adapter = app.add_subcommand("model-adapter", "NDJSON draft/verify service on stdin/stdout");
  std::uint64_t seed = 42;
  adapter->add_option("--config", config, "Config file for model parameters")->check(CLI::ExistingFile);
  adapter->add_option("--seed", seed, "Model seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(config, host, port, sessions);
    if (*client) return cmd_client(config, host, port, out);
    if (*run) return cmd_run(config, out, per_round, trace);
    if (*compare) return cmd_compare(config, out);
    if (*cost) return cmd_cost(pricing_file, defaults);
    if (*project) {
      std::cout << format_real(speedup_projection(gamma, c, r)) << '\n';
      return 0;
    }
    if (*heatmap) {
      write_output(out, heatmap_csv(heatmap_grid(gamma, c_axis, r_axis, steps)));
      return 0;
    }
    if (*adapter) return cmd_adapter(config, seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error:\n";
    for (const std::string& p : e.problems()) std::cerr << "  " << p << '\n';
    return kConfigExit;
  } catch (const ExactnessError& e) {
    std::cerr << "exactness violation: " << e.what() << '\n';
    return 3;
  } catch (const ScenarioError& e) {
    std::cerr << "simulation error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
