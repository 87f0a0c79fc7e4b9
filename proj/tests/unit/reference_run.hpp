#pragma once

// Seed-42 reference configuration (configs/reference.cfg) and its expected
// 200-token output, produced by tests/oracles/prf_oracle.py.

#include "fsd/sim.hpp"

namespace fsd::testing {

inline const TokenSeq kReferenceOutput{
    8, 14, 3, 11, 10, 15, 3, 6, 3, 5, 12, 14, 4, 14, 8, 10, 1, 3, 13, 11, 3, 11, 15, 7, 3, 1,
    4, 2, 11, 2, 0, 0, 4, 0, 3, 1, 11, 15, 8, 2, 0, 7, 5, 4, 1, 1, 2, 4, 8, 1, 3, 3, 13, 15,
    14, 6, 0, 9, 7, 5, 2, 7, 0, 6, 12, 10, 0, 8, 1, 15, 3, 6, 8, 8, 11, 4, 4, 6, 14, 4, 4, 6,
    6, 10, 1, 3, 9, 0, 14, 5, 7, 14, 11, 12, 9, 7, 12, 4, 8, 5, 14, 13, 13, 10, 1, 1, 12, 1,
    1, 7, 15, 12, 3, 6, 6, 8, 3, 14, 12, 0, 10, 2, 1, 8, 12, 11, 13, 1, 13, 11, 12, 10, 5, 0,
    12, 4, 10, 11, 9, 10, 13, 2, 15, 12, 7, 9, 9, 0, 0, 7, 11, 5, 0, 6, 1, 12, 2, 4, 15, 5,
    12, 3, 3, 4, 2, 4, 9, 2, 14, 11, 4, 4, 3, 3, 0, 13, 3, 15, 0, 6, 11, 15, 5, 8, 9, 10, 15,
    15, 2, 13, 12, 14, 4, 12, 0, 8, 7, 10, 15, 10};

inline SyntheticParams reference_model() {
  SyntheticParams p;
  p.seed = 42;
  p.vocab = 16;
  p.num_exits = 4;
  p.beta = {0.3, 0.6, 0.9};
  p.alpha = 0.8;
  p.sharpness = 3.0;
  return p;
}

inline Scenario reference_scenario() {
  Scenario s;
  s.mode = Mode::fsd;
  s.model = reference_model();
  s.client.gamma = 4;
  s.client.total_tokens = 200;
  s.client.worker_threads = 3;
  s.client.seed = 42;
  s.latency = LatencyProfile{95.0, 83.5, 497.0, 5.0};
  s.prompt = {3, 1, 4};
  return s;
}

}  // namespace fsd::testing
