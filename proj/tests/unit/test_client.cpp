#include <gtest/gtest.h>

#include "fsd/client.hpp"
#include "fsd/errors.hpp"
#include "fsd/server.hpp"
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

TEST(PreDraftCache, GenerationGuardsInsert) {
  PreDraftCache c;
  const auto g = c.generation();
  const TokenSeq key{1, 2};
  EXPECT_TRUE(c.claim(g, key));
  EXPECT_FALSE(c.claim(g, key));
  c.reset();
  EXPECT_FALSE(c.insert(g, key, DraftBatch{}));
  EXPECT_EQ(c.size(), 0U);
  const auto g2 = c.generation();
  EXPECT_TRUE(c.claim(g2, key));
  EXPECT_TRUE(c.insert(g2, key, DraftBatch{}));
  EXPECT_FALSE(c.claim(g2, key));
  EXPECT_TRUE(c.lookup(key).has_value());
  EXPECT_TRUE(c.take_and_reset(key).has_value());
  EXPECT_EQ(c.size(), 0U);
  EXPECT_FALSE(c.take_and_reset(key).has_value());
}

TEST(ClientCore, ReferenceRoundOne) {
  const SyntheticDraft model(reference());
  const SyntheticTarget target(reference());
  ClientConfig cfg;
  ClientCore client(cfg, model, kPrompt);
  const DraftBatch first = client.begin();
  EXPECT_EQ(first.round_id, 1U);
  EXPECT_EQ(first.tokens, (TokenSeq{8, 14, 3, 11}));
  EXPECT_THROW(client.begin(), DomainError);

  ServerCore server(target, 42);
  server.open(Hello{kProtocolVersion, 16, 4, 4, Mode::fsd, 200, kPrompt});
  const std::vector<ExitOutput> outs = server.verify_round(first);

  EXPECT_EQ(client.ingest(outs[1]), IngestResult::queued);
  const auto popped = client.queue().try_pop();
  ASSERT_TRUE(popped);
  const auto job = client.prepare_job(*popped);
  ASSERT_TRUE(job);
  EXPECT_FALSE(client.prepare_job(*popped)) << "duplicate key must not be drafted twice";
  const DraftBatch pre = client.run_job(*job);
  EXPECT_EQ(pre.tokens, (TokenSeq{13, 4, 12, 14}));
  EXPECT_EQ(pre.prefix_len, 4U);
  EXPECT_TRUE(client.complete_job(*job, pre));
  EXPECT_EQ(client.cache().lookup(TokenSeq{7})->tokens, pre.tokens);
}

TEST(ClientCore, HitUsesCachedBatch) {
  const SyntheticDraft model(reference());
  const SyntheticTarget target(reference());
  ClientCore client(ClientConfig{}, model, kPrompt);
  ServerCore server(target, 42);
  server.open(Hello{kProtocolVersion, 16, 4, 4, Mode::fsd, 200, kPrompt});
  const std::vector<ExitOutput> outs = server.verify_round(client.begin());

  // Exit 3 equals the final output, so its pre-draft is the next round's draft.
  ASSERT_EQ(client.ingest(outs[2]), IngestResult::queued);
  const auto job = client.prepare_job(*client.queue().try_pop());
  ASSERT_TRUE(job);
  const DraftBatch pre = client.run_job(*job);
  client.complete_job(*job, pre);

  EXPECT_EQ(client.ingest(outs[3]), IngestResult::final);
  const auto final = client.take_final();
  ASSERT_TRUE(final);
  const ClientCore::RoundEnd end = client.finish_round(*final);
  EXPECT_FALSE(end.done);
  EXPECT_TRUE(end.hit);
  EXPECT_EQ(end.next->round_id, 2U);
  EXPECT_EQ(end.next->tokens, pre.tokens);
  EXPECT_EQ(end.next->prefix_len, 8U);
  EXPECT_EQ(client.stats().cache_hits, 1U);
  EXPECT_EQ(client.stats().cache_misses, 1U);
  EXPECT_EQ(client.output(), (TokenSeq{8, 14, 3, 11, 10}));

  // The server accepts the cached batch as round 2.
  EXPECT_NO_THROW(server.verify_round(*end.next));
}

TEST(ClientCore, ForceMissAndStaleJobs) {
  const SyntheticDraft model(reference());
  const SyntheticTarget target(reference());
  ClientCore client(ClientConfig{}, model, kPrompt);
  ServerCore server(target, 42);
  server.open(Hello{kProtocolVersion, 16, 4, 4, Mode::fsd, 200, kPrompt});
  const std::vector<ExitOutput> outs = server.verify_round(client.begin());
  client.ingest(outs[2]);
  const auto job = client.prepare_job(*client.queue().try_pop());
  ASSERT_TRUE(job);
  client.complete_job(*job, client.run_job(*job));
  client.ingest(outs[0]);

  const ClientCore::RoundEnd end = client.finish_round(outs[3], true);
  EXPECT_FALSE(end.hit);
  EXPECT_TRUE(client.queue().empty());
  EXPECT_EQ(client.cache().size(), 0U);
  // A job prepared in round 1 is stale now.
  EXPECT_FALSE(client.complete_job(*job, client.run_job(*job)));
  EXPECT_EQ(client.ingest(outs[1]), IngestResult::stale);
  EXPECT_EQ(client.stats().stale_drops, 1U);
  EXPECT_EQ(end.next->tokens, draft(model, TokenSeq{3, 1, 4, 8, 14, 3, 11, 10}, 4, SamplingMode::greedy, 0).tokens);
}

TEST(ClientCore, ProtocolViolations) {
  const SyntheticDraft model(reference());
  ClientCore client(ClientConfig{}, model, kPrompt);
  client.begin();
  EXPECT_THROW(client.ingest(ExitOutput{2, 1, 0, {1}, 0.5F, false}), ProtocolError);
  EXPECT_THROW(client.finish_round(ExitOutput{1, 1, 0, {1}, 0.5F, false}), ProtocolError);
  EXPECT_THROW(client.finish_round(ExitOutput{2, 4, 0, {1}, 0.5F, true}), ProtocolError);
  EXPECT_THROW(client.finish_round(ExitOutput{1, 4, 1, {1}, 0.5F, true}), ProtocolError);
  EXPECT_THROW(client.finish_round(ExitOutput{1, 4, 5, {1, 1, 1, 1, 1, 1}, 0.5F, true}), ProtocolError);
  EXPECT_THROW(client.finish_round(ExitOutput{1, 4, 0, {16}, 0.5F, true}), DomainError);
}

TEST(ClientCore, IgnoresExitsWithoutPredraft) {
  const SyntheticDraft model(reference());
  ClientConfig cfg;
  cfg.predraft = false;
  ClientCore client(cfg, model, kPrompt);
  client.begin();
  EXPECT_EQ(client.ingest(ExitOutput{1, 1, 0, {1}, 0.5F, false}), IngestResult::ignored);
  EXPECT_TRUE(client.queue().empty());
}

TEST(ClientConfig, Validation) {
  ClientConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = ClientConfig{};
  c.total_tokens = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = ClientConfig{};
  c.worker_threads = -1;
  EXPECT_THROW(c.validate(), DomainError);
  c = ClientConfig{};
  c.verify = VerifyMode::stochastic;
  EXPECT_THROW(c.validate(), DomainError);
  c.payload = PayloadMode::full;
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(ClientCore(ClientConfig{}, SyntheticDraft(reference()), TokenSeq{}), DomainError);
}

}  // namespace
}  // namespace fsd
