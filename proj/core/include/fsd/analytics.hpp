#pragma once

// Closed-form latency, speedup and API cost models.
//
//   AR   2 Tc + n Tq
//   SD   (n / tau) (2 Tc + gamma Tp + Tq)
//   FSD  (n / tau) (2 Tc + r gamma Tp + (1 - r) Tr + Tq)
//
//   speedup SD -> FSD ~ (gamma c + 1) / (r gamma c + 1),  c = Tp / Tq
//
// Costs are per `requests` requests of in_tokens prompt and out_tokens
// completion tokens, prices in dollars per 1M tokens.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "fsd/metrics.hpp"

namespace fsd {

struct LatencyParams {
  double t_p = 0.0;
  double t_q = 0.0;
  double t_c = 0.0;
  double t_r = 0.0;
  int gamma = 4;
  std::size_t n = 200;
  double tau = 1.0;
  double miss_rate = 1.0;

  double c() const { return t_p / t_q; }
  void validate() const;
};

double latency_ar(const LatencyParams& p);
/// Throw DomainError when tau <= 0.
double latency_sd(const LatencyParams& p);
double latency_fsd(const LatencyParams& p);

double speedup_projection(double gamma, double c, double r);

struct AxisRange {
  double min = 0.0;
  double max = 0.0;
};

/// Row-major grid: one row per c value, one column per r value.
struct HeatmapGrid {
  double gamma = 0.0;
  std::vector<double> c_values;
  std::vector<double> r_values;
  std::vector<double> cells;

  double at(std::size_t ci, std::size_t ri) const { return cells[ci * r_values.size() + ri]; }
};

/// `steps` evenly spaced points per axis, endpoints included (steps = 1
/// gives the minimum only).
HeatmapGrid heatmap_grid(double gamma, AxisRange c, AxisRange r, std::size_t steps);
/// "# gamma=<g>" then "c,r,speedup" rows.
std::string heatmap_csv(const HeatmapGrid& grid);

struct PricingRow {
  std::string provider;
  double draft_in = 0.0;
  double draft_out = 0.0;
  double target_in = 0.0;
  double target_out = 0.0;
  double requests = 1'000'000.0;
  double in_tokens = 100.0;
  double out_tokens = 500.0;
  double gamma = 4.0;
  double tau = 2.5;

  void validate() const;
};

double cost_cloud_ar(const PricingRow& row);
double cost_edge_sd(const PricingRow& row);
/// Edge-cloud cost plus the draft model billed in the cloud: the prompt
/// once and gamma * out / tau drafted tokens per request.
double cost_cloud_sd(const PricingRow& row);

/// Parses `provider,draft_in,draft_out,target_in,target_out` with an
/// optional header line. Throws DomainError on malformed rows.
std::vector<PricingRow> parse_pricing_csv(std::string_view text);

/// 1 + sum_{k=1..gamma} alpha^k.
double expected_tau_greedy(double alpha, int gamma);

}  // namespace fsd
