#pragma once

// Seeded synthetic draft/target models with early exits.
//
// The final exit's greedy token at a prefix is prf(seed, TARGET, key) mod V.
// Exit i < L copies it with probability beta[i-1] (one PRF coin per prefix
// and exit), otherwise picks a different id. The drafter copies it with
// probability alpha. Every distribution puts weight exp(sharpness * g) on
// its argmax and weight 1 on each other id. g = 1 for the drafter and the
// final exit; early exits get g = depth * (agree ? 0.8+0.4u : 0.4+0.4u)
// with depth = 0.5 + 0.5*i/L, so deeper and agreeing exits are more
// confident.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fsd/types.hpp"

namespace fsd {

struct SyntheticParams {
  std::uint64_t seed = 0;
  std::size_t vocab = 16;
  int num_exits = 1;
  double alpha = 0.8;
  /// beta[i-1] is exit i's agreement probability, i in 1..L-1.
  std::vector<double> beta;
  double sharpness = 3.0;

  /// Throws DomainError when an invariant does not hold.
  void validate() const;
};

/// beta_i = i / L for i = 1..L-1.
std::vector<double> default_beta(int num_exits);

/// Distribution of exit `exit_index` (1-based, L = final) at `prefix`.
ProbVector target_distribution(const SyntheticParams& params, PrefixKey prefix, int exit_index);
ProbVector target_distribution(const SyntheticParams& params, std::span<const TokenId> prefix,
                               int exit_index);

ProbVector draft_distribution(const SyntheticParams& params, PrefixKey prefix);
ProbVector draft_distribution(const SyntheticParams& params, std::span<const TokenId> prefix);

/// Final-exit greedy token; cheaper than building the distribution.
TokenId target_final_argmax(const SyntheticParams& params, PrefixKey prefix);

/// Max softmax probability.
double confidence(const ProbVector& dist);

/// Next-token distribution of a drafter.
class DraftModel {
 public:
  virtual ~DraftModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual ProbVector next_distribution(PrefixKey prefix) const = 0;
};

/// A verifier with `num_exits()` output heads; head num_exits() is final.
class TargetModel {
 public:
  virtual ~TargetModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual int num_exits() const = 0;
  virtual ProbVector exit_distribution(PrefixKey prefix, int exit_index) const = 0;
};

class SyntheticDraft final : public DraftModel {
 public:
  explicit SyntheticDraft(SyntheticParams params);
  std::size_t vocab_size() const override { return params_.vocab; }
  ProbVector next_distribution(PrefixKey prefix) const override;
  const SyntheticParams& params() const { return params_; }

 private:
  SyntheticParams params_;
};

class SyntheticTarget final : public TargetModel {
 public:
  explicit SyntheticTarget(SyntheticParams params);
  std::size_t vocab_size() const override { return params_.vocab; }
  int num_exits() const override { return params_.num_exits; }
  ProbVector exit_distribution(PrefixKey prefix, int exit_index) const override;
  const SyntheticParams& params() const { return params_; }

 private:
  SyntheticParams params_;
};

}  // namespace fsd
