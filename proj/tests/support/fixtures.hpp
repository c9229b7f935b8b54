#pragma once

#include <cstdint>
#include <vector>

#include "pathagg/model.hpp"
#include "pathagg/random.hpp"
#include "pathagg/regression.hpp"

namespace pathagg::testing {

// Toy-A: alphabet {a,b}; B (background) and M (counted, cap 2); start B;
// B->B 0.6, B->M 0.4, M->B 1; B emits (0.8, 0.2), M emits (0.1, 0.9);
// regression beta = 5, no intercept, sigma = 1.
HmmParams toy_a_params();
VisitCaps toy_a_caps();
RegressionParams toy_a_regression();

struct RandomInstance {
  HmmParams params;
  VisitCaps caps;
  RegressionParams regression;
  std::vector<Symbol> x;
  double y = 0.0;
};

// Random topology with <= 4 states, <= 2 counted states, caps <= 3,
// alphabet <= 4 and 1 <= L <= 8, with random valid parameters.
RandomInstance random_instance(Rng& rng);

// Random instance whose topology and parameters are fixed per call but
// with a small dataset of `count` sequences.
struct RandomProblem {
  HmmParams params;
  VisitCaps caps;
  RegressionParams regression;
  std::vector<std::vector<Symbol>> sequences;
  std::vector<double> responses;
};
RandomProblem random_problem(Rng& rng, std::size_t count, std::size_t max_length);

}  // namespace pathagg::testing
