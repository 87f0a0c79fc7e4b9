#pragma once

// Edge-side runtime: draft, ingest streamed exits, pre-draft from them into
// a per-round cache, and answer the final verification from the cache when
// it already holds the matching continuation.
//
// ClientCore is transport-agnostic. The simulator drives it from a single
// event loop; the TCP client drives it from a receiver thread, a worker
// pool and a coordinator. Lock order: ClientCore -> queue/cache.

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "fsd/metrics.hpp"
#include "fsd/scored_queue.hpp"
#include "fsd/toy_models.hpp"
#include "fsd/types.hpp"

namespace fsd {

using ClientQueue = ScoredQueue<ExitOutput>;

struct ClientConfig {
  int gamma = 4;
  std::size_t total_tokens = 200;
  int worker_threads = 3;
  QueueStrategy queue = QueueStrategy::priority;
  VerifyMode verify = VerifyMode::greedy;
  PayloadMode payload = PayloadMode::compact;
  /// False gives vanilla speculative decoding: early exits are ignored.
  bool predraft = true;
  /// Seeds sampled drafting and the random queue strategy.
  std::uint64_t seed = 0;

  void validate() const;
};

/// Pre-drafted batches keyed by the exact verified-token sequence of the
/// exit that produced them. A generation counter makes inserts from jobs
/// started before the last reset fail.
class PreDraftCache {
 public:
  std::uint64_t generation() const;

  /// Reserves `key` for a pre-draft job. False when the generation is stale
  /// or the key is already cached or being drafted.
  bool claim(std::uint64_t generation, const TokenSeq& key);
  /// False (and nothing stored) when `generation` is stale.
  bool insert(std::uint64_t generation, const TokenSeq& key, DraftBatch entry);

  std::optional<DraftBatch> lookup(const TokenSeq& key) const;
  /// lookup + reset under one lock.
  std::optional<DraftBatch> take_and_reset(const TokenSeq& key);
  void reset();

  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::uint64_t generation_ = 0;
  std::map<TokenSeq, DraftBatch> entries_;
  std::set<TokenSeq> pending_;
};

/// Drafts gamma tokens after prefix ++ exit.tokens.
DraftBatch pre_draft(const DraftModel& model, PrefixKey prefix, std::uint32_t prefix_len,
                     const ExitOutput& exit, int gamma, SamplingMode mode, std::uint64_t seed);

struct PreDraftJob {
  std::uint64_t generation = 0;
  std::uint32_t round_id = 0;
  PrefixKey prefix;
  std::uint32_t prefix_len = 0;
  ExitOutput exit;
};

enum class IngestResult { final, queued, stale, ignored };

struct ClientStats {
  std::size_t rounds = 0;
  std::size_t tokens_emitted = 0;
  std::size_t fresh_drafts = 0;
  std::size_t predraft_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  std::size_t stale_drops = 0;
  std::size_t stale_jobs = 0;
};

class ClientCore {
 public:
  ClientCore(ClientConfig config, const DraftModel& model, TokenSeq prompt);

  ClientCore(const ClientCore&) = delete;
  ClientCore& operator=(const ClientCore&) = delete;

  /// Drafts round 1. Counts as a miss.
  DraftBatch begin();

  /// Receiver: final outputs fill the final slot, current-round early exits
  /// are queued by score, older rounds are dropped. Throws ProtocolError for
  /// a round newer than the one in flight.
  IngestResult ingest(const ExitOutput& msg);

  /// Takes the final output of the round in flight, if it has arrived.
  std::optional<ExitOutput> take_final();

  /// Turns a popped queue entry into a job; nullopt if stale or duplicate.
  std::optional<PreDraftJob> prepare_job(const ExitOutput& popped);
  /// Pure; safe on any thread.
  DraftBatch run_job(const PreDraftJob& job) const;
  /// False when the round ended while the job ran.
  bool complete_job(const PreDraftJob& job, DraftBatch result);

  struct RoundEnd {
    bool done = false;
    bool hit = false;
    /// Next round's batch when !done.
    std::optional<DraftBatch> next;
  };

  /// Commits the final output and prepares the next round: cache hit sends
  /// the cached batch, miss (or force_miss) drafts afresh. Clears the cache
  /// and queue either way. Throws ProtocolError on a round-id mismatch.
  RoundEnd finish_round(const ExitOutput& final, bool force_miss = false);

  ClientQueue& queue() { return queue_; }
  const PreDraftCache& cache() const { return cache_; }
  const ClientConfig& config() const { return config_; }

  std::uint32_t current_round() const;
  /// Generated continuation, excluding the prompt.
  TokenSeq output() const;
  ClientStats stats() const;
  std::vector<RoundRecord> rounds() const;

 private:
  DraftBatch fresh_draft_locked();
  SamplingMode sampling() const;

  ClientConfig config_;
  const DraftModel& model_;
  ClientQueue queue_;
  PreDraftCache cache_;

  mutable std::mutex mu_;
  std::size_t prompt_len_ = 0;
  TokenSeq committed_;
  PrefixKey committed_key_;
  std::uint32_t round_ = 0;
  std::optional<ExitOutput> final_;
  ClientStats stats_;
  std::vector<RoundRecord> records_;
  std::size_t round_draft_calls_ = 0;
  bool round_hit_ = false;
};

}  // namespace fsd
