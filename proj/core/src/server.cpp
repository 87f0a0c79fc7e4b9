#include "fsd/server.hpp"

#include <algorithm>
#include <string>
#include <thread>

#include "fsd/errors.hpp"
#include "fsd/specdec.hpp"

namespace fsd {

double priority_score(const VerifyResult& result) {
  if (result.per_token_probs.empty()) return 0.0;
  return *std::max_element(result.per_token_probs.begin(), result.per_token_probs.end());
}

ServerCore::ServerCore(const TargetModel& target, std::uint64_t seed)
    : target_(target), seed_(seed) {}

void ServerCore::open(const Hello& hello) {
  if (hello.version != kProtocolVersion) {
    throw ProtocolError("unsupported protocol version " + std::to_string(hello.version));
  }
  if (hello.vocab != target_.vocab_size()) throw ProtocolError("client vocabulary does not match");
  if (hello.num_exits != target_.num_exits()) throw ProtocolError("client exit count does not match");
  if (hello.prompt.empty()) throw ProtocolError("empty prompt");
  if (hello.total_tokens == 0) throw ProtocolError("total token count must be positive");
  try {
    validate_tokens(hello.prompt, target_.vocab_size());
  } catch (const DomainError& e) {
    throw ProtocolError(e.what());
  }
  hello_ = hello;
  committed_ = hello.prompt;
  committed_key_ = PrefixKey::of(committed_);
  last_round_ = 0;
  stats_.clear();
  open_ = true;
}

std::vector<ExitOutput> ServerCore::verify_round(const DraftBatch& batch) {
  if (!open_) throw ProtocolError("draft received before HELLO");
  if (batch.round_id != last_round_ + 1) {
    throw ProtocolError("round " + std::to_string(batch.round_id) + " out of order, expected " +
                        std::to_string(last_round_ + 1));
  }
  if (batch.prefix_len != committed_.size()) {
    throw ProtocolError("prefix length " + std::to_string(batch.prefix_len) + " != committed " +
                        std::to_string(committed_.size()));
  }
  if (batch.gamma() == 0) throw ProtocolError("empty draft outside AR mode");
  if (batch.gamma() > 0xFFFE) throw ProtocolError("draft too long");
  try {
    validate_tokens(batch.tokens, target_.vocab_size());
  } catch (const DomainError& e) {
    throw ProtocolError(e.what());
  }

  const VerifyMode mode =
      batch.mode == PayloadMode::full ? VerifyMode::stochastic : VerifyMode::greedy;
  const std::vector<VerifyResult> results =
      verify_all_exits(target_, committed_key_, batch, mode, seed_);

  const int L = target_.num_exits();
  std::vector<ExitOutput> outputs;
  outputs.reserve(results.size());
  for (const VerifyResult& r : results) {
    outputs.push_back(ExitOutput{batch.round_id, static_cast<std::uint16_t>(r.exit_index),
                                 static_cast<std::uint16_t>(r.accepted), r.output,
                                 static_cast<float>(priority_score(r)), r.exit_index == L});
  }

  const TokenSeq& final_tokens = outputs.back().tokens;
  ServerRoundStats stats{batch.round_id, 0, 0};
  for (int i = 0; i + 1 < L; ++i) {
    if (outputs[static_cast<std::size_t>(i)].tokens == final_tokens) {
      stats.earliest_exit = i + 1;
      break;
    }
  }
  stats_.push_back(stats);

  committed_.insert(committed_.end(), final_tokens.begin(), final_tokens.end());
  committed_key_ = committed_key_.extend(final_tokens);
  last_round_ = batch.round_id;
  return outputs;
}

ExitOutput ServerCore::generate_ar(std::uint32_t round_id) {
  if (!open_) throw ProtocolError("AR request before HELLO");
  if (round_id != last_round_ + 1) throw ProtocolError("AR request out of order");
  const std::size_t n = hello_.total_tokens;
  if (n > 0x10000) throw ProtocolError("AR output does not fit one frame");

  ExitOutput out;
  out.round_id = round_id;
  out.exit_index = static_cast<std::uint16_t>(target_.num_exits());
  out.accepted = static_cast<std::uint16_t>(n - 1);
  out.isfinal = true;
  double best = 0.0;
  PrefixKey key = committed_key_;
  for (std::size_t i = 0; i < n; ++i) {
    const ProbVector q = target_.exit_distribution(key, target_.num_exits());
    const TokenId t = q.argmax();
    best = std::max(best, q[t]);
    out.tokens.push_back(t);
    key = key.extend(t);
  }
  out.score = static_cast<float>(best);
  committed_.insert(committed_.end(), out.tokens.begin(), out.tokens.end());
  committed_key_ = key;
  last_round_ = round_id;
  stats_.push_back(ServerRoundStats{round_id, 0, 0});
  return out;
}

// --- StreamingServer ---------------------------------------------------------

StreamingServer::StreamingServer(ServerCore& core, QueueStrategy strategy, MessageSink& sink,
                                 double emulated_verify_ms)
    : core_(core), queue_(strategy), sink_(sink), emulated_verify_ms_(emulated_verify_ms) {
  if (strategy == QueueStrategy::random) throw DomainError("server queue is priority or fifo");
}

void StreamingServer::listener_handle(const DraftBatch& batch) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto at_fraction = [&](double f) {
    return start + std::chrono::duration_cast<Clock::duration>(
                       std::chrono::duration<double, std::milli>(f * emulated_verify_ms_));
  };

  if (batch.gamma() == 0) {
    ExitOutput out = core_.generate_ar(batch.round_id);
    if (emulated_verify_ms_ > 0) {
      std::this_thread::sleep_until(at_fraction(static_cast<double>(out.tokens.size())));
    }
    std::lock_guard lock(send_mu_);
    finalized_round_ = batch.round_id;
    sink_.send(out);
    return;
  }

  std::vector<ExitOutput> outputs = core_.verify_round(batch);
  const std::size_t L = outputs.size();
  const bool stream = core_.session().mode == Mode::fsd;
  for (std::size_t i = 0; i + 1 < L; ++i) {
    if (emulated_verify_ms_ > 0) {
      std::this_thread::sleep_until(at_fraction(static_cast<double>(i + 1) / static_cast<double>(L)));
    }
    if (stream) queue_.push(outputs[i], outputs[i].score);
  }
  if (emulated_verify_ms_ > 0) std::this_thread::sleep_until(at_fraction(1.0));

  std::lock_guard lock(send_mu_);
  finalized_round_ = batch.round_id;
  sink_.send(outputs.back());
  const std::size_t dropped = queue_.reset();
  discarded_ += dropped;
  if (!core_.round_stats().empty()) core_.round_stats().back().discarded += dropped;
}

void StreamingServer::sender_drain() {
  while (std::optional<ExitOutput> e = queue_.wait_pop()) {
    std::lock_guard lock(send_mu_);
    if (e->round_id <= finalized_round_) {
      ++discarded_;
      continue;
    }
    sink_.send(*e);
    ++exits_sent_;
  }
}

std::size_t StreamingServer::discarded() const {
  std::lock_guard lock(send_mu_);
  return discarded_;
}

std::size_t StreamingServer::exits_sent() const {
  std::lock_guard lock(send_mu_);
  return exits_sent_;
}

}  // namespace fsd
