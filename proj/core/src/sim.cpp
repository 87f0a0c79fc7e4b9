#include "fsd/sim.hpp"

#include <memory>
#include <sstream>
#include <string>

#include "fsd/codec.hpp"
#include "fsd/errors.hpp"
#include "fsd/format.hpp"
#include "fsd/server.hpp"

namespace fsd {

void VirtualClock::schedule(double at, Action action) {
  if (at < now_) throw DomainError("cannot schedule an event in the past");
  events_.push(Event{at, next_seq_++, std::move(action)});
}

bool VirtualClock::step() {
  if (events_.empty()) return false;
  // priority_queue::top is const; the action is moved out through a copy of
  // the handle-sized std::function.
  Event ev = events_.top();
  events_.pop();
  now_ = ev.time;
  ev.action();
  return true;
}

SimChannel::SimChannel(double latency_ms) : latency_(latency_ms) {
  if (!(latency_ms >= 0.0)) throw DomainError("channel latency must be non-negative");
}

double SimChannel::send(double now) {
  const double start = std::max(now, free_at_);
  free_at_ = start + latency_;
  return free_at_;
}

RunMetrics merge_metrics(const ClientStats& client, std::vector<RoundRecord>& rounds,
                         const std::vector<ServerRoundStats>& server) {
  RunMetrics m;
  m.rounds = client.rounds;
  m.tokens_emitted = client.tokens_emitted;
  m.draft_calls = client.fresh_drafts + client.predraft_calls;
  m.cache_hits = client.cache_hits;
  m.cache_misses = client.cache_misses;
  m.stale_drops = client.stale_drops;
  for (const ServerRoundStats& s : server) m.server_discards += s.discarded;
  for (RoundRecord& r : rounds) {
    if (r.round == 0 || r.round > server.size()) continue;
    const ServerRoundStats& s = server[r.round - 1];
    r.earliest_exit = s.earliest_exit;
    if (s.earliest_exit > 0) {
      m.sum_earliest_matching_exit += static_cast<std::size_t>(s.earliest_exit);
      ++m.rounds_with_match;
    }
  }
  return m;
}

namespace {

void validate_latency(const LatencyProfile& l) {
  if (!(l.t_c >= 0.0 && l.t_p >= 0.0 && l.t_q >= 0.0 && l.t_r >= 0.0)) {
    throw DomainError("latencies must be non-negative");
  }
}

template <typename T>
T through_wire(const Message& m) {
  const std::vector<std::uint8_t> frame = encode_frame(m);
  return std::get<T>(decode_frame(frame));
}

class Session {
 public:
  explicit Session(const Scenario& sc)
      : sc_(sc),
        draft_model_(sc.model),
        target_model_(sc.model),
        uplink_(sc.latency.t_c),
        downlink_exits_(sc.latency.t_c),
        downlink_final_(sc.latency.t_c),
        server_(target_model_, sc.model.seed),
        server_queue_(sc.server_queue) {
    ClientConfig cc = sc.client;
    cc.predraft = sc.mode == Mode::fsd;
    client_ = std::make_unique<ClientCore>(cc, draft_model_, sc.prompt);
    idle_workers_ = sc.mode == Mode::fsd ? cc.worker_threads : 0;

    Hello hello;
    hello.vocab = static_cast<std::uint32_t>(sc.model.vocab);
    hello.num_exits = static_cast<std::uint16_t>(sc.model.num_exits);
    hello.gamma = static_cast<std::uint16_t>(sc.mode == Mode::ar ? 0 : cc.gamma);
    hello.mode = sc.mode;
    hello.total_tokens = static_cast<std::uint32_t>(cc.total_tokens);
    hello.prompt = sc.prompt;
    server_.open(through_wire<Hello>(hello));
  }

  SimResult run() {
    if (sc_.mode == Mode::ar) {
      start_ar();
    } else {
      DraftBatch first = client_->begin();
      log("client", "draft", first.round_id, "miss");
      clock_.schedule(draft_time(), [this, first] { send_draft(first); });
    }
    while (!done_) {
      if (!clock_.step()) throw ScenarioError("simulation stalled before completion", trace_);
    }

    SimResult result;
    result.wall_ms = done_at_;
    result.trace = std::move(trace_);
    if (sc_.mode == Mode::ar) {
      result.output = ar_output_;
      result.metrics.rounds = 1;
      result.metrics.tokens_emitted = ar_output_.size();
      result.rounds.push_back(RoundRecord{1, ar_output_.size() - 1, false, 0, 0});
      return result;
    }
    result.output = client_->output();
    result.rounds = client_->rounds();
    result.metrics = merge_metrics(client_->stats(), result.rounds, server_.round_stats());
    return result;
  }

 private:
  double draft_time() const { return sc_.latency.t_p * sc_.client.gamma; }

  void log(std::string_view actor, std::string_view event, std::uint32_t round,
           const std::string& detail = {}) {
    if (!sc_.record_trace) return;
    std::string line = format_real(clock_.now());
    line += ',';
    line += actor;
    line += ',';
    line += event;
    line += ',';
    line += std::to_string(round);
    line += ',';
    line += detail;
    trace_.push_back(std::move(line));
  }

  static std::string describe(const ExitOutput& e) {
    return "exit=" + std::to_string(e.exit_index) + " delta=" + std::to_string(e.accepted) +
           " score=" + format_real(e.score);
  }

  // --- AR ---------------------------------------------------------------------

  void start_ar() {
    DraftBatch request;
    request.round_id = 1;
    request.prefix_len = static_cast<std::uint32_t>(sc_.prompt.size());
    log("client", "ar_request", 1);
    const double at = uplink_.send(clock_.now());
    DraftBatch wire = through_wire<DraftBatch>(request);
    clock_.schedule(at, [this, wire] {
      log("server", "ar_recv", wire.round_id);
      ExitOutput out = server_.generate_ar(wire.round_id);
      const double ready = clock_.now() + sc_.latency.t_q * static_cast<double>(out.tokens.size());
      clock_.schedule(ready, [this, out] {
        log("server", "final_sent", out.round_id, describe(out));
        const double at = downlink_final_.send(clock_.now());
        ExitOutput wire_out = through_wire<ExitOutput>(out);
        clock_.schedule(at, [this, wire_out] {
          log("client", "final_recv", wire_out.round_id, describe(wire_out));
          ar_output_ = wire_out.tokens;
          finish();
        });
      });
    });
  }

  // --- speculative rounds ----------------------------------------------------

  void send_draft(const DraftBatch& batch) {
    log("client", "draft_sent", batch.round_id, "gamma=" + std::to_string(batch.gamma()));
    const double at = uplink_.send(clock_.now());
    DraftBatch wire = through_wire<DraftBatch>(batch);
    clock_.schedule(at, [this, wire] { server_receive(wire); });
  }

  void server_receive(const DraftBatch& batch) {
    log("server", "draft_recv", batch.round_id);
    std::vector<ExitOutput> outputs = server_.verify_round(batch);
    const double start = clock_.now();
    const auto L = static_cast<double>(outputs.size());
    const bool stream = sc_.mode == Mode::fsd;
    for (std::size_t i = 0; i + 1 < outputs.size(); ++i) {
      if (!stream) break;
      const double at = start + sc_.latency.t_q * static_cast<double>(i + 1) / L;
      clock_.schedule(at, [this, e = outputs[i]] {
        log("server", "exit_ready", e.round_id, describe(e));
        server_queue_.push(e, e.score);
        pump_sender();
      });
    }
    clock_.schedule(start + sc_.latency.t_q, [this, f = outputs.back()] { dispatch_final(f); });
  }

  void pump_sender() {
    if (sender_busy_) return;
    std::optional<ExitOutput> e = server_queue_.try_pop();
    if (!e) return;
    sender_busy_ = true;
    log("server", "exit_sent", e->round_id, describe(*e));
    const double at = downlink_exits_.send(clock_.now());
    ExitOutput wire = through_wire<ExitOutput>(*e);
    clock_.schedule(at, [this, wire] { client_receive(wire); });
    clock_.schedule(at, [this] {
      sender_busy_ = false;
      pump_sender();
    });
  }

  void dispatch_final(const ExitOutput& f) {
    log("server", "final_sent", f.round_id, describe(f));
    const std::size_t dropped = server_queue_.reset();
    if (dropped > 0) {
      server_.round_stats().back().discarded += dropped;
      log("server", "exits_discarded", f.round_id, "count=" + std::to_string(dropped));
    }
    const double at = downlink_final_.send(clock_.now());
    ExitOutput wire = through_wire<ExitOutput>(f);
    clock_.schedule(at, [this, wire] { client_receive(wire); });
  }

  void client_receive(const ExitOutput& e) {
    if (done_) return;
    log("client", e.isfinal ? "final_recv" : "exit_recv", e.round_id, describe(e));
    const IngestResult r = client_->ingest(e);
    if (r == IngestResult::stale) log("client", "stale_drop", e.round_id);
    if (r == IngestResult::final) {
      client_->take_final();
      on_final(e);
    } else if (r == IngestResult::queued) {
      dispatch_workers();
    }
  }

  void dispatch_workers() {
    while (idle_workers_ > 0) {
      std::optional<ExitOutput> popped = client_->queue().try_pop();
      if (!popped) return;
      std::optional<PreDraftJob> job = client_->prepare_job(*popped);
      if (!job) continue;
      --idle_workers_;
      log("worker", "predraft_start", job->round_id, "exit=" + std::to_string(job->exit.exit_index));
      DraftBatch result = client_->run_job(*job);
      clock_.schedule(clock_.now() + draft_time(), [this, job = *job, result]() mutable {
        const bool kept = client_->complete_job(job, std::move(result));
        log("worker", kept ? "predraft_done" : "predraft_stale", job.round_id,
            "exit=" + std::to_string(job.exit.exit_index));
        ++idle_workers_;
        dispatch_workers();
      });
    }
  }

  void on_final(const ExitOutput& f) {
    const std::uint32_t next_round = f.round_id + 1;
    const bool force_miss =
        sc_.force_miss_period > 0 && next_round % static_cast<std::uint32_t>(sc_.force_miss_period) == 0;
    ClientCore::RoundEnd end = client_->finish_round(f, force_miss);
    if (end.done) {
      log("client", "done", f.round_id,
          "tokens=" + std::to_string(client_->stats().tokens_emitted));
      finish();
      return;
    }
    log("client", end.hit ? "cache_hit" : "cache_miss", end.next->round_id);
    const double delay = end.hit ? sc_.latency.t_r : draft_time();
    clock_.schedule(clock_.now() + delay, [this, batch = std::move(*end.next)] { send_draft(batch); });
  }

  void finish() {
    done_ = true;
    done_at_ = clock_.now();
  }

  const Scenario& sc_;
  SyntheticDraft draft_model_;
  SyntheticTarget target_model_;
  VirtualClock clock_;
  SimChannel uplink_;
  SimChannel downlink_exits_;
  SimChannel downlink_final_;
  ServerCore server_;
  ServerQueue server_queue_;
  std::unique_ptr<ClientCore> client_;
  int idle_workers_ = 0;
  bool sender_busy_ = false;
  bool done_ = false;
  double done_at_ = 0.0;
  TokenSeq ar_output_;
  std::vector<std::string> trace_;
};

}  // namespace

SimResult sim_run(const Scenario& scenario) {
  scenario.model.validate();
  scenario.client.validate();
  validate_latency(scenario.latency);
  if (scenario.prompt.empty()) throw DomainError("prompt must be non-empty");
  if (scenario.force_miss_period < 0) throw DomainError("force_miss_period must be >= 0");
  if (scenario.server_queue == QueueStrategy::random) {
    throw DomainError("server queue is priority or fifo");
  }
  Session session(scenario);
  return session.run();
}

}  // namespace fsd
