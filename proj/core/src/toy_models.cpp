#include "fsd/toy_models.hpp"

#include <cmath>
#include <string>

#include "fsd/errors.hpp"
#include "fsd/prf.hpp"

namespace fsd {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

TokenId final_argmax(const SyntheticParams& p, PrefixKey key) {
  return static_cast<TokenId>(prf::eval(p.seed, prf::tag::kTarget, key.value()) % p.vocab);
}

// Uniform over the V-1 ids other than `avoid`.
TokenId other_token(const SyntheticParams& p, std::uint64_t tag, PrefixKey key, TokenId avoid) {
  std::uint64_t offset = 1 + prf::eval(p.seed, tag, key.value()) % (p.vocab - 1);
  return static_cast<TokenId>((avoid + offset) % p.vocab);
}

bool coin(const SyntheticParams& p, std::uint64_t tag, PrefixKey key, double prob) {
  return prf::unit(prf::eval(p.seed, tag, key.value())) < prob;
}

}  // namespace

void SyntheticParams::validate() const {
  if (vocab < 2) throw DomainError("vocab size must be at least 2");
  if (num_exits < 1) throw DomainError("number of exits must be positive");
  if (!is_probability(alpha)) throw DomainError("alpha must lie in [0, 1]");
  if (beta.size() != static_cast<std::size_t>(num_exits - 1)) {
    throw DomainError("beta needs " + std::to_string(num_exits - 1) + " entries, got " +
                      std::to_string(beta.size()));
  }
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (!is_probability(beta[i])) throw DomainError("beta entries must lie in [0, 1]");
    if (i > 0 && beta[i] < beta[i - 1]) throw DomainError("beta must be non-decreasing");
  }
  if (!(sharpness > 0.0)) throw DomainError("sharpness must be positive");
}

std::vector<double> default_beta(int num_exits) {
  std::vector<double> beta;
  for (int i = 1; i < num_exits; ++i) beta.push_back(static_cast<double>(i) / num_exits);
  return beta;
}

TokenId target_final_argmax(const SyntheticParams& params, PrefixKey prefix) {
  return final_argmax(params, prefix);
}

ProbVector target_distribution(const SyntheticParams& params, PrefixKey prefix, int exit_index) {
  const int L = params.num_exits;
  if (exit_index < 1 || exit_index > L) {
    throw DomainError("exit index " + std::to_string(exit_index) + " outside 1.." +
                      std::to_string(L));
  }
  const TokenId final_token = final_argmax(params, prefix);
  if (exit_index == L) return ProbVector::peaked(params.vocab, final_token, params.sharpness);

  const bool agree = coin(params, prf::tag::exit_coin(exit_index), prefix,
                          params.beta[static_cast<std::size_t>(exit_index - 1)]);
  const TokenId token =
      agree ? final_token : other_token(params, prf::tag::exit_alt(exit_index), prefix, final_token);
  const double u =
      prf::unit(prf::eval(params.seed, prf::tag::exit_conf(exit_index), prefix.value()));
  const double depth = 0.5 + 0.5 * exit_index / static_cast<double>(L);
  const double gain = depth * (agree ? 0.8 + 0.4 * u : 0.4 + 0.4 * u);
  return ProbVector::peaked(params.vocab, token, params.sharpness * gain);
}

ProbVector target_distribution(const SyntheticParams& params, std::span<const TokenId> prefix,
                               int exit_index) {
  if (prefix.empty()) throw DomainError("prefix must be non-empty");
  validate_tokens(prefix, params.vocab);
  return target_distribution(params, PrefixKey::of(prefix), exit_index);
}

ProbVector draft_distribution(const SyntheticParams& params, PrefixKey prefix) {
  const TokenId final_token = final_argmax(params, prefix);
  const TokenId token = coin(params, prf::tag::kDraftCoin, prefix, params.alpha)
                            ? final_token
                            : other_token(params, prf::tag::kDraftAlt, prefix, final_token);
  return ProbVector::peaked(params.vocab, token, params.sharpness);
}

ProbVector draft_distribution(const SyntheticParams& params, std::span<const TokenId> prefix) {
  if (prefix.empty()) throw DomainError("prefix must be non-empty");
  validate_tokens(prefix, params.vocab);
  return draft_distribution(params, PrefixKey::of(prefix));
}

double confidence(const ProbVector& dist) { return dist.max(); }

SyntheticDraft::SyntheticDraft(SyntheticParams params) : params_(std::move(params)) {
  params_.validate();
}

ProbVector SyntheticDraft::next_distribution(PrefixKey prefix) const {
  return draft_distribution(params_, prefix);
}

SyntheticTarget::SyntheticTarget(SyntheticParams params) : params_(std::move(params)) {
  params_.validate();
}

ProbVector SyntheticTarget::exit_distribution(PrefixKey prefix, int exit_index) const {
  return target_distribution(params_, prefix, exit_index);
}

}  // namespace fsd
