#pragma once

// Deterministic discrete-event execution of a whole session on a virtual
// clock. Messages are encoded and decoded with the real codec, so the two
// state machines see exactly what they would see over TCP.
//
// Timing model:
//   drafting gamma tokens           gamma * Tp
//   exit i of L completes           (i / L) * Tq after the batch arrives
//   early exit transmission         serialized on the downlink, Tc each
//   final output                    own slot, arrives Tq + Tc after the batch
//   cache hit                       Tr before the cached batch is sent
//   AR request                      one uplink Tc, n * Tq, one downlink Tc

#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <vector>

#include "fsd/client.hpp"
#include "fsd/metrics.hpp"
#include "fsd/server.hpp"
#include "fsd/toy_models.hpp"
#include "fsd/types.hpp"

namespace fsd {

class VirtualClock {
 public:
  using Action = std::function<void()>;

  double now() const { return now_; }
  /// Throws DomainError when `at` is in the past.
  void schedule(double at, Action action);
  /// Runs the earliest event (ties by scheduling order). False when idle.
  bool step();
  bool idle() const { return events_.empty(); }

 private:
  struct Event {
    double time;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
};

/// One direction of a link. Each message holds the channel for the full
/// latency: delivery = max(now, free_at) + latency.
class SimChannel {
 public:
  explicit SimChannel(double latency_ms);
  double send(double now);
  double free_at() const { return free_at_; }
  double latency() const { return latency_; }

 private:
  double latency_;
  double free_at_ = 0.0;
};

struct LatencyProfile {
  double t_c = 0.0;
  /// Per drafted token.
  double t_p = 0.0;
  double t_q = 0.0;
  double t_r = 5.0;
};

struct Scenario {
  Mode mode = Mode::fsd;
  SyntheticParams model;
  ClientConfig client;
  QueueStrategy server_queue = QueueStrategy::priority;
  LatencyProfile latency;
  TokenSeq prompt;
  /// When k > 0, rounds whose id is a multiple of k bypass the cache.
  int force_miss_period = 0;
  bool record_trace = true;
};

struct SimResult {
  TokenSeq output;
  RunMetrics metrics;
  std::vector<RoundRecord> rounds;
  double wall_ms = 0.0;
  /// `time_ms,actor,event,round,detail` lines.
  std::vector<std::string> trace;
};

/// Client counters plus per-round earliest matching exit from the server.
/// Fills RoundRecord::earliest_exit in place.
RunMetrics merge_metrics(const ClientStats& client, std::vector<RoundRecord>& rounds,
                         const std::vector<ServerRoundStats>& server);

/// Throws ScenarioError if the event queue drains before completion.
SimResult sim_run(const Scenario& scenario);

}  // namespace fsd
