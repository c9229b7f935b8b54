#include "pathagg/predict.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "pathagg/error.hpp"

namespace pathagg {
namespace {

TrainedModel toy_a_model() {
  return TrainedModel{
      testing::toy_a_params(), testing::toy_a_caps(), testing::toy_a_regression(), {}, {}};
}

Dataset dataset(std::vector<std::pair<std::string, double>> rows) {
  Dataset d;
  for (auto& [s, y] : rows) d.examples.push_back({s, y});
  return d;
}

TEST(Predict, ToyAViterbiPrediction) { EXPECT_DOUBLE_EQ(predict(toy_a_model(), "ab"), 5.0); }

TEST(Predict, ZeroCoefficientsPredictZero) {
  auto m = toy_a_model();
  m.regression.coefficients = {0.0};
  m.regression.intercept.reset();
  for (const char* x : {"a", "ab", "bbbb", "abababab"}) EXPECT_EQ(predict(m, x), 0.0);
}

TEST(Predict, UnreachableCountedStatePredictsIntercept) {
  // Toy-A with B -> M at probability zero: no path can visit M.
  const auto toy = testing::toy_a_params();
  HmmParams params(toy.topology(), toy.alphabet(), toy.start(), {{1.0, 0.0}, {1.0}},
                   toy.emission());
  TrainedModel m{params, testing::toy_a_caps(), RegressionParams{{4.0}, 1.5, 1.0}, {}, {}};
  for (const char* x : {"a", "bb", "abab"}) EXPECT_EQ(predict(m, x), 1.5);
}

TEST(Predict, EqualsMeanOfViterbiVisits) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = testing::random_instance(rng);
    TrainedModel m{inst.params, inst.caps, inst.regression, {}, {}};
    ViterbiResult vit;
    try {
      vit = viterbi_decode(inst.params, inst.caps, inst.x);
    } catch (const DecodeFailure&) {
      EXPECT_THROW(predict(m, inst.x), DecodeFailure);
      continue;
    }
    EXPECT_EQ(predict(m, inst.x), predict_mean(inst.regression, std::span<const int>(vit.visits)));
  }
}

// The Viterbi path is at least as probable as any path drawn from the
// posterior over paths.
TEST(Viterbi, DominatesPosteriorSamples) {
  Rng rng(13);
  int checked = 0;
  while (checked < 20) {
    const auto inst = testing::random_instance(rng);
    const auto paths = testing::enumerate_paths(inst.params, inst.caps, inst.x);
    if (paths.empty()) continue;
    ++checked;
    const auto vit = viterbi_decode(inst.params, inst.caps, inst.x);
    std::vector<double> weights;
    for (const auto& p : paths) weights.push_back(p.probability);
    std::discrete_distribution<std::size_t> draw(weights.begin(), weights.end());
    for (int s = 0; s < 1000; ++s) {
      const auto& p = paths[draw(rng)];
      EXPECT_GE(vit.log_probability, std::log(p.probability) - 1e-12);
    }
  }
}

TEST(EvaluateMae, PerfectAndConstantPredictors) {
  const MeanBaseline four{4.0};
  EXPECT_DOUBLE_EQ(evaluate_mae(four, dataset({{"a", 3.0}, {"c", 5.0}})), 1.0);
  EXPECT_DOUBLE_EQ(evaluate_mae(four, dataset({{"a", 4.0}, {"c", 4.0}})), 0.0);
  EXPECT_DOUBLE_EQ(evaluate_mae(toy_a_model(), dataset({{"ab", 5.0}})), 0.0);
}

TEST(EvaluateMae, BaselineOnOwnTrainingSetIsMeanAbsoluteDeviation) {
  const auto d = dataset({{"a", 1.0}, {"c", 2.0}, {"g", 6.0}});
  const auto b = mean_baseline(d);
  EXPECT_DOUBLE_EQ(b.mean, 3.0);
  EXPECT_DOUBLE_EQ(evaluate_mae(b, d), (2.0 + 1.0 + 3.0) / 3.0);
}

TEST(EvaluateMae, PermutationInvariant) {
  Rng rng(5);
  std::uniform_int_distribution<int> len(1, 10), bit(0, 1);
  std::normal_distribution<double> y(3.0, 2.0);
  Dataset d;
  for (int i = 0; i < 50; ++i) {
    std::string x;
    for (int j = len(rng); j > 0; --j) x += bit(rng) ? 'b' : 'a';
    d.examples.push_back({x, y(rng)});
  }
  const double base = evaluate_mae(toy_a_model(), d);
  for (int round = 0; round < 5; ++round) {
    std::shuffle(d.examples.begin(), d.examples.end(), rng);
    EXPECT_NEAR(evaluate_mae(toy_a_model(), d), base, 1e-12);
  }
}

TEST(EvaluateMae, EmptyTestSet) {
  EXPECT_THROW(evaluate_mae(toy_a_model(), Dataset{}), InvalidInput);
  EXPECT_THROW(evaluate_mae(MeanBaseline{1.0}, Dataset{}), InvalidInput);
}

TEST(EvaluateMae, BadSymbolNamesExample) {
  try {
    evaluate_mae(toy_a_model(), dataset({{"ab", 1.0}, {"ax", 1.0}}));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("example 1"), std::string::npos);
  }
}

}  // namespace
}  // namespace pathagg
