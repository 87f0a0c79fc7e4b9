// Expected values come from tests/oracles/prf_oracle.py.
#include <gtest/gtest.h>

#include "fsd/errors.hpp"
#include "fsd/toy_models.hpp"

namespace fsd {
namespace {

SyntheticParams reference() {
  SyntheticParams p;
  p.seed = 42;
  p.vocab = 16;
  p.num_exits = 4;
  p.beta = {0.3, 0.6, 0.9};
  p.alpha = 0.8;
  p.sharpness = 3.0;
  return p;
}

const TokenSeq kPrompt{3, 1, 4};

TEST(PrefixKey, MatchesOracle) {
  EXPECT_EQ(PrefixKey::of(kPrompt).value(), 0x67760ae1a9cd9c3cULL);
}

TEST(PrefixKey, ExtendIsIncremental) {
  const TokenSeq a{3, 1};
  EXPECT_EQ(PrefixKey::of(a).extend(4), PrefixKey::of(kPrompt));
  EXPECT_EQ(PrefixKey().extend(kPrompt), PrefixKey::of(kPrompt));
  EXPECT_NE(PrefixKey::of(TokenSeq{1, 3, 4}), PrefixKey::of(kPrompt));
}

TEST(SyntheticTarget, ExitArgmaxesMatchOracle) {
  const SyntheticParams p = reference();
  const PrefixKey k = PrefixKey::of(kPrompt);
  EXPECT_EQ(target_final_argmax(p, k), 8U);
  EXPECT_EQ(target_distribution(p, k, 1).argmax(), 14U);
  EXPECT_EQ(target_distribution(p, k, 2).argmax(), 7U);
  EXPECT_EQ(target_distribution(p, k, 3).argmax(), 8U);
  EXPECT_EQ(target_distribution(p, k, 4).argmax(), 8U);
}

TEST(SyntheticTarget, ConfidencesMatchOracle) {
  const SyntheticParams p = reference();
  const PrefixKey k = PrefixKey::of(kPrompt);
  EXPECT_NEAR(confidence(target_distribution(p, k, 1)), 0.19407247593895702, 1e-15);
  EXPECT_NEAR(confidence(target_distribution(p, k, 2)), 0.14376270998789092, 1e-15);
  EXPECT_NEAR(confidence(target_distribution(p, k, 3)), 0.3763859341849709, 1e-15);
  EXPECT_NEAR(confidence(target_distribution(p, k, 4)), 0.5724734088339787, 1e-15);
}

TEST(SyntheticTarget, BetaExtremes) {
  SyntheticParams p;
  p.seed = 7;
  p.vocab = 8;
  p.num_exits = 3;
  p.beta = {0.0, 1.0};
  const PrefixKey k = PrefixKey::of(TokenSeq{1});
  EXPECT_EQ(target_distribution(p, k, 1).argmax(), 2U);
  EXPECT_EQ(target_distribution(p, k, 2).argmax(), 3U);
  EXPECT_EQ(target_distribution(p, k, 3).argmax(), 3U);
}

TEST(SyntheticTarget, DistributionsAreValid) {
  const SyntheticParams p = reference();
  for (TokenId t = 0; t < 16; ++t) {
    const PrefixKey k = PrefixKey::of(TokenSeq{t, 2});
    for (int i = 1; i <= 4; ++i) {
      const ProbVector d = target_distribution(p, k, i);
      double sum = 0;
      for (double v : d.values()) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(SyntheticDraft, ArgmaxMatchesOracle) {
  EXPECT_EQ(draft_distribution(reference(), PrefixKey::of(kPrompt)).argmax(), 8U);
}

TEST(SyntheticDraft, AlphaOneAlwaysAgrees) {
  SyntheticParams p = reference();
  p.alpha = 1.0;
  for (TokenId t = 0; t < 16; ++t) {
    const PrefixKey k = PrefixKey::of(TokenSeq{t, t, 5});
    EXPECT_EQ(draft_distribution(p, k).argmax(), target_final_argmax(p, k));
  }
}

TEST(SyntheticTarget, SpanOverloadRejectsOutOfVocab) {
  EXPECT_THROW(target_distribution(reference(), TokenSeq{16}, 1), DomainError);
  EXPECT_THROW(draft_distribution(reference(), TokenSeq{99}), DomainError);
}

TEST(SyntheticParams, Validation) {
  SyntheticParams p = reference();
  EXPECT_NO_THROW(p.validate());
  p.beta = {0.3};
  EXPECT_THROW(p.validate(), DomainError);
  p = reference();
  p.alpha = 1.5;
  EXPECT_THROW(p.validate(), DomainError);
  p = reference();
  p.vocab = 1;
  EXPECT_THROW(p.validate(), DomainError);
  p = reference();
  p.num_exits = 0;
  EXPECT_THROW(p.validate(), DomainError);
  p = reference();
  p.sharpness = 0;
  EXPECT_THROW(p.validate(), DomainError);
  p = reference();
  EXPECT_THROW(target_distribution(p, PrefixKey::of(kPrompt), 5), DomainError);
}

TEST(SyntheticParams, DefaultBeta) {
  EXPECT_EQ(default_beta(4), (std::vector<double>{0.25, 0.5, 0.75}));
  EXPECT_TRUE(default_beta(1).empty());
}

TEST(ProbVector, ArgmaxTiesPickLowestId) {
  const ProbVector u = ProbVector::uniform(5);
  EXPECT_EQ(u.argmax(), 0U);
  EXPECT_THROW(ProbVector(std::vector<double>{0.5, 0.6}), DomainError);
  EXPECT_THROW(ProbVector(std::vector<double>{-0.1, 1.1}), DomainError);
  EXPECT_THROW(ProbVector::normalized({0.0, 0.0}), DomainError);
}

TEST(ProbVector, SampleSkipsZeroMass) {
  const ProbVector p(std::vector<double>{0.0, 0.25, 0.0, 0.75});
  EXPECT_EQ(p.sample(0.0), 1U);
  EXPECT_EQ(p.sample(0.2499), 1U);
  EXPECT_EQ(p.sample(0.25), 3U);
  EXPECT_EQ(p.sample(0.999999), 3U);
}

}  // namespace
}  // namespace fsd
