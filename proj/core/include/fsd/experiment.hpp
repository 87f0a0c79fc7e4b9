#pragma once

// Experiment harness: config files, single and multi-seed runs over either
// transport, mode comparison and CSV output.
//
// Config files are flat `key = value` lines; `#` starts a comment.
//
//   mode            ar | sd | fsd                      (fsd)
//   transport       sim | tcp                          (sim)
//   host, port      tcp endpoint; port 0 runs an in-process loopback server
//   seeds           "42", "1,2,3" or "1..100"          (42)
//   vocab, exits, alpha, beta (comma list), sharpness  model
//   gamma, n, threads                                  (4, 200, 3)
//   client_queue    priority | fifo | random           (priority)
//   server_queue    priority | fifo                    (priority)
//   verify          greedy | stochastic                (greedy)
//   payload         compact | full                     (compact; full for stochastic)
//   t_c, t_p, t_q   ms; required for sim. t_p is per drafted token.
//   t_r             ms, simulated cache-hit sync cost  (5)
//   prompt          comma list of token ids            (3,1,4)
//   force_miss_period                                  (0 = off, sim only)
//   emulate_latency true: tcp runs sleep for t_p and t_q (false)

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fsd/analytics.hpp"
#include "fsd/client.hpp"
#include "fsd/metrics.hpp"
#include "fsd/sim.hpp"
#include "fsd/toy_models.hpp"

namespace fsd {

enum class Transport { sim, tcp };

struct ExperimentConfig {
  Mode mode = Mode::fsd;
  Transport transport = Transport::sim;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  SyntheticParams model;
  ClientConfig client;
  QueueStrategy server_queue = QueueStrategy::priority;
  LatencyProfile latency;
  bool latency_given = false;
  TokenSeq prompt{3, 1, 4};
  std::vector<std::uint64_t> seeds{42};
  int force_miss_period = 0;
  bool emulate_latency = false;

  /// Throws ConfigError listing every bad field.
  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::string& path);
  void validate() const;

  /// The config with mode and seed applied to every component.
  ExperimentConfig for_run(Mode m, std::uint64_t seed) const;
  Scenario scenario() const;
};

struct RunRecord {
  std::uint64_t seed = 0;
  Mode mode = Mode::fsd;
  TokenSeq output;
  RunMetrics metrics;
  std::vector<RoundRecord> rounds;
  double wall_ms = 0.0;
  std::vector<std::string> trace;
};

RunRecord run_single(const ExperimentConfig& config, std::uint64_t seed);
/// One record per seed, sorted by seed.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config);

std::string summary_csv_header();
std::string summary_csv_row(const ExperimentConfig& config, const RunRecord& record);
std::string summary_csv(const ExperimentConfig& config, const std::vector<RunRecord>& records);
/// `seed,round,delta,tau_inst,hit,earliest_exit,draft_calls`; the seed
/// column is prepended so multi-seed runs stay in one file.
std::string per_round_csv(const std::vector<RunRecord>& records);
std::string trace_text(const RunRecord& record);

/// Token streams differ across modes under greedy verification.
class ExactnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CompareRow {
  std::uint64_t seed = 0;
  double ar_ms = 0.0;
  double sd_ms = 0.0;
  double fsd_ms = 0.0;
  double tau_sd = 0.0;
  double tau_fsd = 0.0;
  double miss_rate = 0.0;
  double predicted_ar_ms = 0.0;
  double predicted_sd_ms = 0.0;
  double predicted_fsd_ms = 0.0;
  bool tokens_match = true;

  double speedup_ar_sd() const { return ar_ms / sd_ms; }
  double speedup_sd_fsd() const { return sd_ms / fsd_ms; }
  double predicted_ar_sd() const { return predicted_ar_ms / predicted_sd_ms; }
  double predicted_sd_fsd() const { return predicted_sd_ms / predicted_fsd_ms; }
};

struct CompareReport {
  std::vector<CompareRow> rows;
  double mean_speedup_ar_sd() const;
  double mean_speedup_sd_fsd() const;
};

/// Runs AR, SD and FSD for every seed. Under greedy verification throws
/// ExactnessError if the three token streams differ in their first n tokens
/// (or SD and FSD differ anywhere).
CompareReport compare_modes(const ExperimentConfig& config);
std::string compare_csv(const CompareReport& report);

}  // namespace fsd
