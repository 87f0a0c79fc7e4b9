#include <gtest/gtest.h>

#include <array>
#include <random>

#include "fsd/errors.hpp"
#include "fsd/specdec.hpp"

namespace fsd {
namespace {

SyntheticParams reference() {
  SyntheticParams p;
  p.seed = 42;
  p.vocab = 16;
  p.num_exits = 4;
  p.beta = {0.3, 0.6, 0.9};
  p.alpha = 0.8;
  return p;
}

const TokenSeq kPrompt{3, 1, 4};

TEST(Draft, GreedyMatchesOracle) {
  const SyntheticDraft model(reference());
  EXPECT_EQ(draft(model, kPrompt, 2, SamplingMode::greedy, 0).tokens, (TokenSeq{8, 14}));
  const DraftBatch b = draft(model, kPrompt, 4, SamplingMode::greedy, 0);
  EXPECT_EQ(b.tokens, (TokenSeq{8, 14, 3, 11}));
  EXPECT_EQ(b.prefix_len, 3U);
  ASSERT_TRUE(b.has_full_dists());
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(b.chosen_probs[k], b.dists[k][b.tokens[k]]);
}

TEST(Draft, GammaZeroAndErrors) {
  const SyntheticDraft model(reference());
  EXPECT_TRUE(draft(model, kPrompt, 0, SamplingMode::greedy, 0).tokens.empty());
  EXPECT_THROW(draft(model, TokenSeq{}, 2, SamplingMode::greedy, 0), DomainError);
  EXPECT_THROW(draft(model, kPrompt, -1, SamplingMode::greedy, 0), DomainError);
}

TEST(Draft, SampledIsDeterministicPerSeed) {
  const SyntheticDraft model(reference());
  const DraftBatch a = draft(model, kPrompt, 8, SamplingMode::sampled, 5);
  const DraftBatch b = draft(model, kPrompt, 8, SamplingMode::sampled, 5);
  EXPECT_EQ(a, b);
}

TEST(VerifyGreedy, PerExitMatchesOracle) {
  const SyntheticTarget target(reference());
  const DraftBatch b = draft(SyntheticDraft(reference()), kPrompt, 4, SamplingMode::greedy, 0);
  const auto results = verify_all_exits(target, PrefixKey::of(kPrompt), b, VerifyMode::greedy, 0);
  ASSERT_EQ(results.size(), 4U);
  EXPECT_EQ(results[0].accepted, 0U);
  EXPECT_EQ(results[0].output, (TokenSeq{14}));
  EXPECT_NEAR(results[0].confidence, 0.19407247593895702, 1e-15);
  EXPECT_EQ(results[1].output, (TokenSeq{7}));
  EXPECT_NEAR(results[1].confidence, 0.14376270998789092, 1e-15);
  EXPECT_EQ(results[2].accepted, 4U);
  EXPECT_EQ(results[2].output, (TokenSeq{8, 14, 3, 11, 10}));
  EXPECT_NEAR(results[2].confidence, 0.5991723051049034, 1e-15);
  EXPECT_EQ(results[3].output, (TokenSeq{8, 14, 3, 11, 10}));
  EXPECT_NEAR(results[3].confidence, 0.5724734088339787, 1e-15);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(results[static_cast<std::size_t>(i)].exit_index, i + 1);
}

TEST(VerifyGreedy, AllAcceptedAddsBonus) {
  SyntheticParams p = reference();
  p.alpha = 1.0;
  const SyntheticTarget target(p);
  const DraftBatch b = draft(SyntheticDraft(p), kPrompt, 6, SamplingMode::greedy, 0);
  const auto r = verify_all_exits(target, PrefixKey::of(kPrompt), b, VerifyMode::greedy, 0).back();
  EXPECT_EQ(r.accepted, 6U);
  EXPECT_EQ(r.output.size(), 7U);
  EXPECT_EQ(r.output, greedy_continuation(target, PrefixKey::of(kPrompt), 7));
}

TEST(VerifyGreedy, EmptyDraftGivesOneToken) {
  const SyntheticTarget target(reference());
  const auto r = verify_all_exits(target, PrefixKey::of(kPrompt), DraftBatch{}, VerifyMode::greedy, 0);
  EXPECT_EQ(r.back().output, (TokenSeq{8}));
}

TEST(Stochastic, AcceptanceProbability) {
  const ProbVector q(std::vector<double>{0.2, 0.3, 0.5});
  const ProbVector p(std::vector<double>{0.4, 0.3, 0.3});
  EXPECT_DOUBLE_EQ(acceptance_probability(q, p, 0), 0.5);
  EXPECT_DOUBLE_EQ(acceptance_probability(q, p, 1), 1.0);
  EXPECT_DOUBLE_EQ(acceptance_probability(q, p, 2), 1.0);
  const ProbVector pz(std::vector<double>{0.0, 0.5, 0.5});
  EXPECT_THROW(acceptance_probability(q, pz, 0), ProtocolError);
}

TEST(Stochastic, Residual) {
  const ProbVector q(std::vector<double>{0.2, 0.3, 0.5});
  const ProbVector p(std::vector<double>{0.4, 0.3, 0.3});
  const ProbVector r = residual_distribution(q, p);
  EXPECT_DOUBLE_EQ(r[0], 0.0);
  EXPECT_DOUBLE_EQ(r[1], 0.0);
  EXPECT_DOUBLE_EQ(r[2], 1.0);
  EXPECT_THROW(residual_distribution(q, q), DomainError);
}

// Output law of one verification step with gamma = 1, by enumeration.
std::array<double, 3> first_token_law(const ProbVector& q, const ProbVector& p) {
  std::array<double, 3> law{};
  for (TokenId x = 0; x < 3; ++x) {
    if (p[x] == 0) continue;
    const double a = acceptance_probability(q, p, x);
    law[x] += p[x] * a;
    if (a < 1) {
      const ProbVector r = residual_distribution(q, p);
      for (TokenId y = 0; y < 3; ++y) law[y] += p[x] * (1 - a) * r[y];
    }
  }
  return law;
}

TEST(Stochastic, ExactLawEqualsTarget) {
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::vector<ProbVector> dists;
  for (double a : grid) {
    for (double b : grid) {
      const double c = 1.0 - a - b;
      if (c > 0.05) dists.emplace_back(std::vector<double>{a, b, c});
    }
  }
  for (const ProbVector& q : dists) {
    for (const ProbVector& p : dists) {
      const auto law = first_token_law(q, p);
      for (TokenId y = 0; y < 3; ++y) ASSERT_NEAR(law[y], q[y], 1e-12);
    }
  }
}

TEST(Stochastic, MonteCarloMatchesTarget) {
  const ProbVector q(std::vector<double>{0.6, 0.3, 0.1});
  const ProbVector p(std::vector<double>{0.2, 0.3, 0.5});
  const DistFn target = [&q](PrefixKey) { return q; };
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::array<double, 3> counts{};
  constexpr int kTrials = 200000;
  for (int t = 0; t < kTrials; ++t) {
    DraftBatch b;
    b.prefix_len = 1;
    b.mode = PayloadMode::full;
    const TokenId x = p.sample(unif(rng));
    b.tokens = {x};
    b.chosen_probs = {p[x]};
    b.dists = {p};
    const VerifyResult r = verify_stochastic(target, PrefixKey().extend(0), b, static_cast<std::uint64_t>(t));
    counts[r.output.front()] += 1;
  }
  double tv = 0;
  for (TokenId y = 0; y < 3; ++y) tv += std::abs(counts[y] / kTrials - q[y]);
  EXPECT_LT(tv / 2, 0.01);
}

TEST(Stochastic, RejectsMissingDistsAndZeroMass) {
  const SyntheticTarget target(reference());
  DraftBatch b;
  b.prefix_len = 3;
  b.tokens = {1};
  b.chosen_probs = {0.5};
  const DistFn fn = [&target](PrefixKey k) { return target.exit_distribution(k, 4); };
  EXPECT_THROW(verify_stochastic(fn, PrefixKey::of(kPrompt), b, 0), ProtocolError);
  std::vector<double> v(16, 1.0 / 15);
  v[1] = 0.0;
  b.dists = {ProbVector(v)};
  EXPECT_THROW(verify_stochastic(fn, PrefixKey::of(kPrompt), b, 0), ProtocolError);
}

TEST(Stochastic, IdenticalModelsAcceptEverything) {
  SyntheticParams p = reference();
  p.num_exits = 1;
  p.beta.clear();
  p.alpha = 1.0;
  const SyntheticTarget target(p);
  // With q == p every drafted token is accepted.
  const DistFn fn = [&target](PrefixKey k) { return target.exit_distribution(k, 1); };
  const DraftBatch b = draft(SyntheticDraft(p), kPrompt, 5, SamplingMode::sampled, 3);
  EXPECT_EQ(verify_stochastic(fn, PrefixKey::of(kPrompt), b, 9).accepted, 5U);
}

}  // namespace
}  // namespace fsd
