#include "fsd/analytics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "fsd/errors.hpp"
#include "fsd/format.hpp"

namespace fsd {

MetricsSummary metrics_finalize(const RunMetrics& m) {
  if (m.rounds == 0) throw DomainError("no rounds recorded");
  MetricsSummary s;
  const auto rounds = static_cast<double>(m.rounds);
  s.tau = static_cast<double>(m.tokens_emitted) / rounds;
  const std::size_t lookups = m.cache_hits + m.cache_misses;
  s.miss_rate = lookups == 0 ? std::numeric_limits<double>::quiet_NaN()
                             : static_cast<double>(m.cache_misses) / static_cast<double>(lookups);
  s.avg_ee = m.rounds_with_match == 0
                 ? std::numeric_limits<double>::quiet_NaN()
                 : static_cast<double>(m.sum_earliest_matching_exit) /
                       static_cast<double>(m.rounds_with_match);
  return s;
}

void LatencyParams::validate() const {
  if (!(t_p >= 0 && t_q >= 0 && t_c >= 0 && t_r >= 0)) throw DomainError("latencies must be non-negative");
  if (gamma < 1) throw DomainError("gamma must be at least 1");
  if (!(tau > 0)) throw DomainError("tau must be positive");
  if (!(miss_rate >= 0 && miss_rate <= 1)) throw DomainError("miss rate must be in [0, 1]");
}

double latency_ar(const LatencyParams& p) {
  if (!(p.t_q >= 0 && p.t_c >= 0)) throw DomainError("latencies must be non-negative");
  return 2 * p.t_c + static_cast<double>(p.n) * p.t_q;
}

double latency_sd(const LatencyParams& p) {
  p.validate();
  return static_cast<double>(p.n) / p.tau * (2 * p.t_c + p.gamma * p.t_p + p.t_q);
}

double latency_fsd(const LatencyParams& p) {
  p.validate();
  const double r = p.miss_rate;
  return static_cast<double>(p.n) / p.tau *
         (2 * p.t_c + r * p.gamma * p.t_p + (1 - r) * p.t_r + p.t_q);
}

double speedup_projection(double gamma, double c, double r) {
  if (!(gamma > 0)) throw DomainError("gamma must be positive");
  if (!(c >= 0)) throw DomainError("c must be non-negative");
  if (!(r >= 0 && r <= 1)) throw DomainError("r must be in [0, 1]");
  return (gamma * c + 1) / (r * gamma * c + 1);
}

namespace {

std::vector<double> axis(AxisRange range, std::size_t steps) {
  std::vector<double> v;
  v.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    v.push_back(range.min + t * (range.max - range.min));
  }
  return v;
}

}  // namespace

HeatmapGrid heatmap_grid(double gamma, AxisRange c, AxisRange r, std::size_t steps) {
  if (steps == 0) throw DomainError("steps must be positive");
  if (c.min > c.max || r.min > r.max) throw DomainError("axis min exceeds max");
  HeatmapGrid g;
  g.gamma = gamma;
  g.c_values = axis(c, steps);
  g.r_values = axis(r, steps);
  g.cells.reserve(steps * steps);
  for (double cv : g.c_values) {
    for (double rv : g.r_values) g.cells.push_back(speedup_projection(gamma, cv, rv));
  }
  return g;
}

std::string heatmap_csv(const HeatmapGrid& grid) {
  std::string out = "# gamma=" + format_real(grid.gamma) + "\nc,r,speedup\n";
  for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci) {
    for (std::size_t ri = 0; ri < grid.r_values.size(); ++ri) {
      out += format_real(grid.c_values[ci]) + ',' + format_real(grid.r_values[ri]) + ',' +
             format_real(grid.at(ci, ri)) + '\n';
    }
  }
  return out;
}

void PricingRow::validate() const {
  for (double v : {draft_in, draft_out, target_in, target_out, requests, in_tokens, out_tokens}) {
    if (!(v >= 0)) throw DomainError("pricing values must be non-negative");
  }
  if (!(gamma > 0)) throw DomainError("gamma must be positive");
  if (!(tau > 0)) throw DomainError("tau must be positive");
}

double cost_cloud_ar(const PricingRow& row) {
  row.validate();
  return row.requests * (row.in_tokens * row.target_in + row.out_tokens * row.target_out) / 1e6;
}

double cost_edge_sd(const PricingRow& row) {
  row.validate();
  return row.requests * (row.in_tokens * row.target_in + row.out_tokens / row.tau * row.target_out) / 1e6;
}

double cost_cloud_sd(const PricingRow& row) {
  const double draft =
      row.requests * (row.in_tokens * row.draft_in + row.gamma * row.out_tokens / row.tau * row.draft_out) / 1e6;
  return cost_edge_sd(row) + draft;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size();
}

}  // namespace

std::vector<PricingRow> parse_pricing_csv(std::string_view text) {
  std::vector<PricingRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (fields.size() != 5) {
      throw DomainError("pricing line " + std::to_string(lineno) + ": expected 5 fields");
    }
    PricingRow row;
    row.provider = fields[0];
    double* targets[] = {&row.draft_in, &row.draft_out, &row.target_in, &row.target_out};
    bool numeric = true;
    for (std::size_t i = 0; i < 4; ++i) numeric = numeric && parse_number(fields[i + 1], *targets[i]);
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw DomainError("pricing line " + std::to_string(lineno) + ": non-numeric price");
    }
    row.validate();
    rows.push_back(std::move(row));
  }
  return rows;
}

double expected_tau_greedy(double alpha, int gamma) {
  if (!(alpha >= 0 && alpha <= 1)) throw DomainError("alpha must be in [0, 1]");
  if (gamma < 0) throw DomainError("gamma must be non-negative");
  double tau = 1.0;
  double a = 1.0;
  for (int k = 1; k <= gamma; ++k) {
    a *= alpha;
    tau += a;
  }
  return tau;
}

}  // namespace fsd
