#include "fsd/specdec.hpp"

#include <algorithm>
#include <string>

#include "fsd/errors.hpp"
#include "fsd/prf.hpp"

namespace fsd {

namespace {

double draw(std::uint64_t seed, std::uint64_t tag, PrefixKey at) {
  return prf::unit(prf::eval(seed, tag, at.value()));
}

VerifyResult finish(VerifyResult r) {
  r.confidence = r.per_token_probs.empty()
                     ? 0.0
                     : *std::max_element(r.per_token_probs.begin(), r.per_token_probs.end());
  return r;
}

}  // namespace

DraftBatch draft(const DraftModel& model, PrefixKey prefix, std::uint32_t prefix_len, int gamma,
                 SamplingMode mode, std::uint64_t rng_seed) {
  if (prefix_len == 0) throw DomainError("prefix must be non-empty");
  if (gamma < 0) throw DomainError("gamma must be non-negative");
  DraftBatch batch;
  batch.prefix_len = prefix_len;
  PrefixKey key = prefix;
  for (int k = 0; k < gamma; ++k) {
    ProbVector dist = model.next_distribution(key);
    const TokenId token = mode == SamplingMode::greedy
                              ? dist.argmax()
                              : dist.sample(draw(rng_seed, prf::tag::kDraftSample, key));
    batch.tokens.push_back(token);
    batch.chosen_probs.push_back(dist[token]);
    batch.dists.push_back(std::move(dist));
    key = key.extend(token);
  }
  return batch;
}

DraftBatch draft(const DraftModel& model, std::span<const TokenId> prefix, int gamma,
                 SamplingMode mode, std::uint64_t rng_seed) {
  if (prefix.empty()) throw DomainError("prefix must be non-empty");
  validate_tokens(prefix, model.vocab_size());
  return draft(model, PrefixKey::of(prefix), static_cast<std::uint32_t>(prefix.size()), gamma,
               mode, rng_seed);
}

VerifyResult verify_greedy(const DistFn& target, PrefixKey prefix, const DraftBatch& batch) {
  VerifyResult r;
  PrefixKey key = prefix;
  for (TokenId drafted : batch.tokens) {
    const ProbVector q = target(key);
    const TokenId best = q.argmax();
    r.output.push_back(best);
    r.per_token_probs.push_back(q[best]);
    if (best != drafted) return finish(std::move(r));
    ++r.accepted;
    key = key.extend(drafted);
  }
  const ProbVector q = target(key);
  const TokenId best = q.argmax();
  r.output.push_back(best);
  r.per_token_probs.push_back(q[best]);
  return finish(std::move(r));
}

double acceptance_probability(const ProbVector& q, const ProbVector& p, TokenId x) {
  if (x >= q.size() || x >= p.size()) throw DomainError("token outside distribution support");
  if (!(p[x] > 0.0)) throw ProtocolError("drafted token has zero draft probability");
  return std::min(1.0, q[x] / p[x]);
}

ProbVector residual_distribution(const ProbVector& q, const ProbVector& p) {
  if (q.size() != p.size()) throw DomainError("distribution sizes differ");
  std::vector<double> w(q.size());
  bool any = false;
  for (std::size_t i = 0; i < q.size(); ++i) {
    w[i] = std::max(0.0, q[i] - p[i]);
    any = any || w[i] > 0.0;
  }
  if (!any) throw DomainError("residual undefined: q equals p");
  return ProbVector::normalized(std::move(w));
}

VerifyResult verify_stochastic(const DistFn& target, PrefixKey prefix, const DraftBatch& batch,
                               std::uint64_t rng_seed) {
  if (batch.gamma() > 0 && !batch.has_full_dists()) {
    throw ProtocolError("stochastic verification needs full draft distributions");
  }
  VerifyResult r;
  PrefixKey key = prefix;
  for (std::size_t k = 0; k < batch.gamma(); ++k) {
    const TokenId x = batch.tokens[k];
    const ProbVector& p = batch.dists[k];
    const ProbVector q = target(key);
    if (q.size() != p.size()) throw ProtocolError("draft distribution has the wrong vocabulary size");
    if (x >= p.size() || !(p[x] > 0.0)) {
      throw ProtocolError("drafted token " + std::to_string(x) + " has zero draft probability");
    }
    if (draw(rng_seed, prf::tag::kAccept, key) < acceptance_probability(q, p, x)) {
      r.output.push_back(x);
      r.per_token_probs.push_back(q[x]);
      ++r.accepted;
      key = key.extend(x);
      continue;
    }
    // A rejection implies q(x) < p(x), so the residual has mass unless p
    // lost precision on the wire; fall back to q in that case.
    std::vector<double> w(q.size());
    bool any = false;
    for (std::size_t i = 0; i < q.size(); ++i) {
      w[i] = std::max(0.0, q[i] - p[i]);
      any = any || w[i] > 0.0;
    }
    const ProbVector resid = any ? ProbVector::normalized(std::move(w)) : q;
    const TokenId y = resid.sample(draw(rng_seed, prf::tag::kResidual, key));
    r.output.push_back(y);
    r.per_token_probs.push_back(q[y]);
    return finish(std::move(r));
  }
  const ProbVector q = target(key);
  const TokenId y = q.sample(draw(rng_seed, prf::tag::kBonus, key));
  r.output.push_back(y);
  r.per_token_probs.push_back(q[y]);
  return finish(std::move(r));
}

std::vector<VerifyResult> verify_all_exits(const TargetModel& target, PrefixKey prefix,
                                           const DraftBatch& batch, VerifyMode mode,
                                           std::uint64_t rng_seed) {
  std::vector<VerifyResult> results;
  results.reserve(static_cast<std::size_t>(target.num_exits()));
  for (int i = 1; i <= target.num_exits(); ++i) {
    DistFn exit_fn = [&target, i](PrefixKey k) { return target.exit_distribution(k, i); };
    VerifyResult r = mode == VerifyMode::greedy
                         ? verify_greedy(exit_fn, prefix, batch)
                         : verify_stochastic(exit_fn, prefix, batch, rng_seed);
    r.exit_index = i;
    results.push_back(std::move(r));
  }
  return results;
}

TokenSeq greedy_continuation(const TargetModel& target, PrefixKey prefix, std::size_t n) {
  TokenSeq out;
  out.reserve(n);
  PrefixKey key = prefix;
  const int final_exit = target.num_exits();
  for (std::size_t i = 0; i < n; ++i) {
    const TokenId t = target.exit_distribution(key, final_exit).argmax();
    out.push_back(t);
    key = key.extend(t);
  }
  return out;
}

}  // namespace fsd
