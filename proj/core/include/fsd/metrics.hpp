#pragma once

#include <cstddef>
#include <cstdint>

namespace fsd {

/// One draft-verify round as seen by the harness.
struct RoundRecord {
  std::uint32_t round = 0;
  std::size_t delta = 0;
  /// Whether this round's draft came from the pre-draft cache.
  bool hit = false;
  /// Smallest early exit (1..L-1) whose output equals the final output; 0 if none.
  int earliest_exit = 0;
  /// Draft-model batch calls made during the round (fresh + pre-drafts).
  std::size_t draft_calls = 0;

  std::size_t tau_inst() const { return delta + 1; }
};

struct RunMetrics {
  std::size_t rounds = 0;
  std::size_t tokens_emitted = 0;
  std::size_t draft_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  std::size_t sum_earliest_matching_exit = 0;
  std::size_t rounds_with_match = 0;
  std::size_t stale_drops = 0;
  std::size_t server_discards = 0;
};

struct MetricsSummary {
  double tau = 0.0;
  /// NaN when the cache was never consulted (AR).
  double miss_rate = 0.0;
  /// NaN when no round had a matching early exit.
  double avg_ee = 0.0;
};

/// Throws DomainError when m.rounds == 0.
MetricsSummary metrics_finalize(const RunMetrics& m);

}  // namespace fsd
