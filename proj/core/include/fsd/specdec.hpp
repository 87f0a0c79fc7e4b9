#pragma once

// Draft and verify. Greedy verification accepts the longest draft prefix
// matching the target's argmaxes. Stochastic verification is the standard
// speculative-sampling rule: accept x with probability min(1, q(x)/p(x)),
// on rejection resample from normalize(max(0, q - p)), and draw a bonus
// token from q when the whole draft survives. Emitted tokens are then
// distributed exactly as sampling from q.
//
// All randomness is prf(rng_seed, tag, key at that position), so every
// call is a pure function of its arguments.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fsd/toy_models.hpp"
#include "fsd/types.hpp"

namespace fsd {

using DistFn = std::function<ProbVector(PrefixKey)>;

/// Autoregressively drafts `gamma` tokens after a prefix of length
/// `prefix_len` whose key is `prefix`. gamma = 0 yields an empty batch.
DraftBatch draft(const DraftModel& model, PrefixKey prefix, std::uint32_t prefix_len, int gamma,
                 SamplingMode mode, std::uint64_t rng_seed);
DraftBatch draft(const DraftModel& model, std::span<const TokenId> prefix, int gamma,
                 SamplingMode mode, std::uint64_t rng_seed);

VerifyResult verify_greedy(const DistFn& target, PrefixKey prefix, const DraftBatch& batch);

/// Requires batch.dists (full payload). Throws ProtocolError when a
/// drafted token has zero draft probability.
VerifyResult verify_stochastic(const DistFn& target, PrefixKey prefix, const DraftBatch& batch,
                               std::uint64_t rng_seed);

/// min(1, q(x) / p(x)); p(x) must be positive.
double acceptance_probability(const ProbVector& q, const ProbVector& p, TokenId x);

/// normalize(max(0, q - p)). Throws DomainError when q == p.
ProbVector residual_distribution(const ProbVector& q, const ProbVector& p);

/// One result per exit, in exit order; result L is authoritative.
std::vector<VerifyResult> verify_all_exits(const TargetModel& target, PrefixKey prefix,
                                           const DraftBatch& batch, VerifyMode mode,
                                           std::uint64_t rng_seed);

/// Greedy continuation of the final exit: the autoregressive reference.
TokenSeq greedy_continuation(const TargetModel& target, PrefixKey prefix, std::size_t n);

}  // namespace fsd
