#include "fsd/client.hpp"

#include <string>

#include "fsd/errors.hpp"
#include "fsd/specdec.hpp"

namespace fsd {

void ClientConfig::validate() const {
  if (gamma < 1) throw DomainError("gamma must be at least 1");
  if (total_tokens < 1) throw DomainError("total token count must be at least 1");
  if (worker_threads < 0) throw DomainError("worker thread count must be non-negative");
  if (verify == VerifyMode::stochastic && payload != PayloadMode::full) {
    throw DomainError("stochastic verification needs the full payload mode");
  }
}

// --- PreDraftCache -----------------------------------------------------------

std::uint64_t PreDraftCache::generation() const {
  std::lock_guard lock(mu_);
  return generation_;
}

bool PreDraftCache::claim(std::uint64_t generation, const TokenSeq& key) {
  std::lock_guard lock(mu_);
  if (generation != generation_) return false;
  if (entries_.contains(key) || pending_.contains(key)) return false;
  pending_.insert(key);
  return true;
}

bool PreDraftCache::insert(std::uint64_t generation, const TokenSeq& key, DraftBatch entry) {
  std::lock_guard lock(mu_);
  if (generation != generation_) return false;
  pending_.erase(key);
  entries_.insert_or_assign(key, std::move(entry));
  return true;
}

std::optional<DraftBatch> PreDraftCache::lookup(const TokenSeq& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<DraftBatch> PreDraftCache::take_and_reset(const TokenSeq& key) {
  std::lock_guard lock(mu_);
  std::optional<DraftBatch> hit;
  if (auto it = entries_.find(key); it != entries_.end()) hit = std::move(it->second);
  entries_.clear();
  pending_.clear();
  ++generation_;
  return hit;
}

void PreDraftCache::reset() {
  std::lock_guard lock(mu_);
  entries_.clear();
  pending_.clear();
  ++generation_;
}

std::size_t PreDraftCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

DraftBatch pre_draft(const DraftModel& model, PrefixKey prefix, std::uint32_t prefix_len,
                     const ExitOutput& exit, int gamma, SamplingMode mode, std::uint64_t seed) {
  const PrefixKey extended = prefix.extend(exit.tokens);
  const auto extended_len = static_cast<std::uint32_t>(prefix_len + exit.tokens.size());
  return draft(model, extended, extended_len, gamma, mode, seed);
}

// --- ClientCore --------------------------------------------------------------

ClientCore::ClientCore(ClientConfig config, const DraftModel& model, TokenSeq prompt)
    : config_(std::move(config)), model_(model), queue_(config_.queue, config_.seed) {
  config_.validate();
  if (prompt.empty()) throw DomainError("prompt must be non-empty");
  validate_tokens(prompt, model_.vocab_size());
  prompt_len_ = prompt.size();
  committed_key_ = PrefixKey::of(prompt);
  committed_ = std::move(prompt);
}

SamplingMode ClientCore::sampling() const {
  return config_.verify == VerifyMode::greedy ? SamplingMode::greedy : SamplingMode::sampled;
}

DraftBatch ClientCore::fresh_draft_locked() {
  DraftBatch batch = draft(model_, committed_key_, static_cast<std::uint32_t>(committed_.size()),
                           config_.gamma, sampling(), config_.seed);
  batch.mode = config_.payload;
  ++stats_.fresh_drafts;
  ++round_draft_calls_;
  return batch;
}

DraftBatch ClientCore::begin() {
  std::lock_guard lock(mu_);
  if (round_ != 0) throw DomainError("session already started");
  round_ = 1;
  round_hit_ = false;
  ++stats_.cache_misses;
  DraftBatch batch = fresh_draft_locked();
  batch.round_id = round_;
  return batch;
}

IngestResult ClientCore::ingest(const ExitOutput& msg) {
  std::lock_guard lock(mu_);
  if (msg.round_id > round_) {
    throw ProtocolError("exit output for round " + std::to_string(msg.round_id) +
                        " while round " + std::to_string(round_) + " is in flight");
  }
  if (msg.round_id < round_) {
    ++stats_.stale_drops;
    return IngestResult::stale;
  }
  if (msg.isfinal) {
    final_ = msg;
    return IngestResult::final;
  }
  if (!config_.predraft) return IngestResult::ignored;
  queue_.push(msg, msg.score);
  return IngestResult::queued;
}

std::optional<ExitOutput> ClientCore::take_final() {
  std::lock_guard lock(mu_);
  std::optional<ExitOutput> out = std::move(final_);
  final_.reset();
  return out;
}

std::optional<PreDraftJob> ClientCore::prepare_job(const ExitOutput& popped) {
  std::lock_guard lock(mu_);
  if (popped.round_id != round_) {
    ++stats_.stale_jobs;
    return std::nullopt;
  }
  const std::uint64_t gen = cache_.generation();
  if (!cache_.claim(gen, popped.tokens)) return std::nullopt;
  ++stats_.predraft_calls;
  ++round_draft_calls_;
  return PreDraftJob{gen, round_, committed_key_, static_cast<std::uint32_t>(committed_.size()),
                     popped};
}

DraftBatch ClientCore::run_job(const PreDraftJob& job) const {
  DraftBatch batch = pre_draft(model_, job.prefix, job.prefix_len, job.exit, config_.gamma,
                               sampling(), config_.seed);
  batch.mode = config_.payload;
  return batch;
}

bool ClientCore::complete_job(const PreDraftJob& job, DraftBatch result) {
  if (cache_.insert(job.generation, job.exit.tokens, std::move(result))) return true;
  std::lock_guard lock(mu_);
  ++stats_.stale_jobs;
  return false;
}

ClientCore::RoundEnd ClientCore::finish_round(const ExitOutput& final, bool force_miss) {
  std::lock_guard lock(mu_);
  if (!final.isfinal) throw ProtocolError("finish_round needs the final exit output");
  if (final.round_id != round_) {
    throw ProtocolError("final output for round " + std::to_string(final.round_id) +
                        ", expected " + std::to_string(round_));
  }
  if (final.tokens.size() != static_cast<std::size_t>(final.accepted) + 1 ||
      final.accepted > config_.gamma) {
    throw ProtocolError("malformed final output");
  }
  validate_tokens(final.tokens, model_.vocab_size());

  committed_.insert(committed_.end(), final.tokens.begin(), final.tokens.end());
  committed_key_ = committed_key_.extend(final.tokens);
  ++stats_.rounds;
  stats_.tokens_emitted += final.tokens.size();
  records_.push_back(RoundRecord{round_, final.accepted, round_hit_, 0, round_draft_calls_});
  round_draft_calls_ = 0;
  final_.reset();

  RoundEnd end;
  std::optional<DraftBatch> cached = cache_.take_and_reset(final.tokens);
  queue_.reset();
  if (stats_.tokens_emitted >= config_.total_tokens) {
    end.done = true;
    return end;
  }

  ++round_;
  if (cached && !force_miss) {
    ++stats_.cache_hits;
    round_hit_ = true;
    end.hit = true;
    end.next = std::move(cached);
  } else {
    ++stats_.cache_misses;
    round_hit_ = false;
    end.next = fresh_draft_locked();
  }
  end.next->round_id = round_;
  return end;
}

std::uint32_t ClientCore::current_round() const {
  std::lock_guard lock(mu_);
  return round_;
}

TokenSeq ClientCore::output() const {
  std::lock_guard lock(mu_);
  return TokenSeq(committed_.begin() + static_cast<std::ptrdiff_t>(prompt_len_), committed_.end());
}

ClientStats ClientCore::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::vector<RoundRecord> ClientCore::rounds() const {
  std::lock_guard lock(mu_);
  return records_;
}

}  // namespace fsd
