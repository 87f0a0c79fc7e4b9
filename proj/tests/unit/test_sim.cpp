#include <gtest/gtest.h>

#include "fsd/errors.hpp"
#include "fsd/metrics.hpp"
#include "fsd/sim.hpp"
#include "reference_run.hpp"

namespace fsd {
namespace {

using testing::kReferenceOutput;
using testing::reference_scenario;

TEST(VirtualClock, OrdersByTimeThenScheduling) {
  VirtualClock c;
  std::string order;
  c.schedule(2.0, [&] { order += 'c'; });
  c.schedule(1.0, [&] { order += 'a'; });
  c.schedule(1.0, [&] { order += 'b'; });
  while (c.step()) {
  }
  EXPECT_EQ(order, "abc");
  EXPECT_EQ(c.now(), 2.0);
  EXPECT_THROW(c.schedule(1.5, [] {}), DomainError);
  EXPECT_TRUE(c.idle());
}

TEST(SimChannel, SerializesMessages) {
  SimChannel ch(10.0);
  EXPECT_EQ(ch.send(0.0), 10.0);
  EXPECT_EQ(ch.send(5.0), 20.0);
  EXPECT_EQ(ch.send(30.0), 40.0);
  EXPECT_THROW(SimChannel(-1.0), DomainError);
}

// Golden values: output from the AR oracle, tau and avg_ee from the
// straight-line oracle, miss rate and wall time recorded from this simulator.
TEST(Sim, ReferenceRunGolden) {
  const SimResult r = sim_run(reference_scenario());
  EXPECT_EQ(r.output, kReferenceOutput);
  EXPECT_EQ(r.metrics.rounds, 56U);
  EXPECT_EQ(r.metrics.tokens_emitted, 200U);
  EXPECT_EQ(r.metrics.cache_misses, 51U);
  EXPECT_EQ(r.metrics.cache_hits, 5U);
  const MetricsSummary s = metrics_finalize(r.metrics);
  EXPECT_DOUBLE_EQ(s.tau, 3.5714285714285716);
  EXPECT_DOUBLE_EQ(s.miss_rate, 51.0 / 56.0);
  EXPECT_DOUBLE_EQ(s.avg_ee, 2.5);
  EXPECT_DOUBLE_EQ(r.wall_ms, 55531.0);
  EXPECT_EQ(r.rounds.front().earliest_exit, 3);
}

TEST(Sim, ArSingleTokenIsOneRoundTrip) {
  Scenario s = reference_scenario();
  s.mode = Mode::ar;
  s.client.total_tokens = 1;
  const SimResult r = sim_run(s);
  EXPECT_EQ(r.wall_ms, 2 * 95.0 + 497.0);
  EXPECT_EQ(r.output, TokenSeq{8});
}

TEST(Sim, SdAndFsdAgreeOnTokens) {
  Scenario s = reference_scenario();
  s.mode = Mode::sd;
  const SimResult sd = sim_run(s);
  s.mode = Mode::fsd;
  const SimResult fsd = sim_run(s);
  EXPECT_EQ(sd.output, fsd.output);
  EXPECT_NE(sd.wall_ms, fsd.wall_ms);
  EXPECT_EQ(sd.metrics.cache_hits, 0U);
  EXPECT_EQ(sd.metrics.rounds, sd.metrics.cache_misses);
  // Every SD round costs exactly gamma*Tp + 2Tc + Tq.
  EXPECT_DOUBLE_EQ(sd.wall_ms, static_cast<double>(sd.metrics.rounds) * (4 * 83.5 + 2 * 95.0 + 497.0));
}

TEST(Sim, NoWorkersMeansSd) {
  Scenario s = reference_scenario();
  s.client.worker_threads = 0;
  const SimResult fsd = sim_run(s);
  s.mode = Mode::sd;
  const SimResult sd = sim_run(s);
  EXPECT_EQ(fsd.wall_ms, sd.wall_ms);
  EXPECT_EQ(fsd.metrics.cache_hits, 0U);
}

TEST(Sim, PerfectExitsHitEveryRoundAfterFirst) {
  Scenario s = reference_scenario();
  s.model.alpha = 1.0;
  s.model.beta = {1.0, 1.0, 1.0};
  s.latency = LatencyProfile{10.0, 10.0, 100.0, 5.0};
  const SimResult r = sim_run(s);
  EXPECT_EQ(r.metrics.rounds, 40U);
  EXPECT_EQ(r.metrics.cache_misses, 1U);
  EXPECT_EQ(r.metrics.cache_hits, 39U);
  EXPECT_DOUBLE_EQ(r.wall_ms, 40 * (2 * 10.0 + 100.0) + 40.0 + 39 * 5.0);
  for (const RoundRecord& rr : r.rounds) EXPECT_EQ(rr.earliest_exit, 1);
}

TEST(Sim, ForceMissPeriod) {
  Scenario s = reference_scenario();
  s.model.alpha = 1.0;
  s.model.beta = {1.0, 1.0, 1.0};
  s.latency = LatencyProfile{10.0, 10.0, 100.0, 5.0};
  s.force_miss_period = 2;
  const SimResult r = sim_run(s);
  EXPECT_EQ(r.metrics.cache_misses, 21U);  // round 1 plus every even round
  for (const RoundRecord& rr : r.rounds) EXPECT_EQ(rr.hit, rr.round % 2 == 1 && rr.round > 1);
}

TEST(Sim, TraceIsDeterministic) {
  const SimResult a = sim_run(reference_scenario());
  const SimResult b = sim_run(reference_scenario());
  EXPECT_EQ(a.trace, b.trace);
  ASSERT_FALSE(a.trace.empty());
  EXPECT_EQ(a.trace.front(), "0.0,client,draft,1,miss");
  EXPECT_EQ(a.trace[1], "334.0,client,draft_sent,1,gamma=4");
  Scenario quiet = reference_scenario();
  quiet.record_trace = false;
  EXPECT_TRUE(sim_run(quiet).trace.empty());
}

TEST(Sim, StochasticModeRuns) {
  Scenario s = reference_scenario();
  s.client.verify = VerifyMode::stochastic;
  s.client.payload = PayloadMode::full;
  const SimResult a = sim_run(s);
  EXPECT_GE(a.output.size(), 200U);
  EXPECT_EQ(sim_run(s).output, a.output);
}

TEST(Sim, RejectsInvalidScenarios) {
  Scenario s = reference_scenario();
  s.server_queue = QueueStrategy::random;
  EXPECT_THROW(sim_run(s), DomainError);
  s = reference_scenario();
  s.latency.t_c = -1;
  EXPECT_THROW(sim_run(s), DomainError);
  s = reference_scenario();
  s.prompt.clear();
  EXPECT_THROW(sim_run(s), DomainError);
  s = reference_scenario();
  s.model.beta.pop_back();
  EXPECT_THROW(sim_run(s), DomainError);
}

}  // namespace
}  // namespace fsd
