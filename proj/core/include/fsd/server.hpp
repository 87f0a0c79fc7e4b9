#pragma once

// Cloud-side runtime. ServerCore verifies a batch at every exit and keeps
// the committed prefix; StreamingServer adds the listener/sender pair:
// early exits go through a scored queue and are sent one at a time, the
// final output bypasses the queue and then clears it.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <vector>

#include "fsd/codec.hpp"
#include "fsd/scored_queue.hpp"
#include "fsd/toy_models.hpp"
#include "fsd/types.hpp"

namespace fsd {

using ServerQueue = ScoredQueue<ExitOutput>;

/// max of the per-token probabilities of the verified output.
double priority_score(const VerifyResult& result);

struct ServerRoundStats {
  std::uint32_t round = 0;
  /// Smallest early exit whose output equals the final one; 0 if none.
  int earliest_exit = 0;
  std::size_t discarded = 0;
};

class ServerCore {
 public:
  ServerCore(const TargetModel& target, std::uint64_t seed);

  /// Starts a session. Throws ProtocolError on a vocab/exit mismatch or
  /// an invalid prompt.
  void open(const Hello& hello);

  /// Verifies at every exit and commits the final output. Returns one
  /// ExitOutput per exit, in exit order; the last has isfinal set.
  /// Throws ProtocolError unless round_id is the successor of the last
  /// round and prefix_len matches the committed prefix.
  std::vector<ExitOutput> verify_round(const DraftBatch& batch);

  /// Answers an AR request: n greedy final-exit tokens in one output.
  ExitOutput generate_ar(std::uint32_t round_id);

  bool is_open() const { return open_; }
  const Hello& session() const { return hello_; }
  std::uint32_t last_round() const { return last_round_; }
  const TokenSeq& committed() const { return committed_; }
  std::vector<ServerRoundStats>& round_stats() { return stats_; }
  const std::vector<ServerRoundStats>& round_stats() const { return stats_; }

 private:
  const TargetModel& target_;
  std::uint64_t seed_;
  bool open_ = false;
  Hello hello_;
  TokenSeq committed_;
  PrefixKey committed_key_;
  std::uint32_t last_round_ = 0;
  std::vector<ServerRoundStats> stats_;
};

/// Where the streaming server writes messages. Implementations must write
/// each message atomically.
class MessageSink {
 public:
  virtual ~MessageSink() = default;
  virtual void send(const Message& m) = 0;
};

/// Listener + sender over a MessageSink. listener_handle runs on the
/// receiving thread; sender_drain runs on its own thread until close().
class StreamingServer {
 public:
  StreamingServer(ServerCore& core, QueueStrategy strategy, MessageSink& sink,
                  double emulated_verify_ms = 0.0);

  /// Verifies, queues exits 1..L-1 as they complete, sends the final output
  /// and clears whatever early exits are still unsent.
  void listener_handle(const DraftBatch& batch);
  /// Pops and sends early exits until the queue is closed and empty.
  void sender_drain();
  void close() { queue_.close(); }

  ServerQueue& queue() { return queue_; }
  std::size_t discarded() const;
  std::size_t exits_sent() const;

 private:
  ServerCore& core_;
  ServerQueue queue_;
  MessageSink& sink_;
  double emulated_verify_ms_;

  mutable std::mutex send_mu_;
  std::uint32_t finalized_round_ = 0;
  std::size_t discarded_ = 0;
  std::size_t exits_sent_ = 0;
};

}  // namespace fsd
