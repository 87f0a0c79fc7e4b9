#include <benchmark/benchmark.h>

#include "fsd/codec.hpp"
#include "fsd/sim.hpp"
#include "fsd/specdec.hpp"

namespace {

using namespace fsd;

SyntheticParams model(int exits) {
  SyntheticParams p;
  p.seed = 42;
  p.vocab = 16;
  p.num_exits = exits;
  p.beta = default_beta(exits);
  p.alpha = 0.8;
  return p;
}

DraftBatch batch(PayloadMode mode, int gamma) {
  const TokenSeq prompt{3, 1, 4};
  DraftBatch b = draft(SyntheticDraft(model(4)), prompt, gamma, SamplingMode::sampled, 7);
  b.round_id = 1;
  b.mode = mode;
  return b;
}

void BM_EncodeDraft(benchmark::State& state) {
  const DraftBatch b = batch(static_cast<PayloadMode>(state.range(0)), 8);
  const Message m = b;
  for (auto _ : state) benchmark::DoNotOptimize(encode_frame(m));
}
BENCHMARK(BM_EncodeDraft)->Arg(static_cast<int>(PayloadMode::compact))->Arg(static_cast<int>(PayloadMode::full));

void BM_DecodeDraft(benchmark::State& state) {
  const std::vector<std::uint8_t> frame = encode_frame(batch(static_cast<PayloadMode>(state.range(0)), 8));
  for (auto _ : state) benchmark::DoNotOptimize(decode_frame(frame));
}
BENCHMARK(BM_DecodeDraft)->Arg(static_cast<int>(PayloadMode::compact))->Arg(static_cast<int>(PayloadMode::full));

void BM_VerifyAllExits(benchmark::State& state) {
  const int exits = static_cast<int>(state.range(0));
  const SyntheticTarget target(model(exits));
  const DraftBatch b = batch(PayloadMode::compact, 4);
  const PrefixKey key = PrefixKey::of(TokenSeq{3, 1, 4});
  for (auto _ : state) benchmark::DoNotOptimize(verify_all_exits(target, key, b, VerifyMode::greedy, 0));
}
BENCHMARK(BM_VerifyAllExits)->Arg(1)->Arg(4)->Arg(16);

void BM_SimReference(benchmark::State& state) {
  Scenario s;
  s.model = model(4);
  s.model.beta = {0.3, 0.6, 0.9};
  s.client.seed = 42;
  s.mode = static_cast<Mode>(state.range(0));
  s.latency = LatencyProfile{95.0, 83.5, 497.0, 5.0};
  s.prompt = {3, 1, 4};
  s.record_trace = false;
  for (auto _ : state) benchmark::DoNotOptimize(sim_run(s).wall_ms);
}
BENCHMARK(BM_SimReference)
    ->Arg(static_cast<int>(Mode::ar))
    ->Arg(static_cast<int>(Mode::sd))
    ->Arg(static_cast<int>(Mode::fsd))
    ->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
