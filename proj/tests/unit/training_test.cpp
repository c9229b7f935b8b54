#include "pathagg/training.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "pathagg/datagen.hpp"
#include "pathagg/error.hpp"
#include "pathagg/predict.hpp"

namespace pathagg {
namespace {

using testing::toy_a_caps;
using testing::toy_a_params;
using testing::toy_a_regression;

TrainedModel wrap(HmmParams params, VisitCaps caps, RegressionParams reg) {
  return TrainedModel{std::move(params), std::move(caps), std::move(reg), {}, {}};
}

EncodedDataset encoded(const Alphabet& a, std::vector<std::pair<std::string, double>> rows) {
  Dataset d;
  for (auto& [s, y] : rows) d.examples.push_back({s, y});
  return encode(d, a);
}

// Small synthetic task shared by the slower tests below.
const GeneratedDataset& small_task() {
  static const GeneratedDataset data = [] {
    SyntheticConfig c;
    c.seq_len = 40;
    c.motif_len = 4;
    c.train_size = 30;
    c.tune_size = 20;
    c.test_size = 20;
    c.seed = 17;
    return generate_dataset(c);
  }();
  return data;
}

TrainConfig small_config() {
  TrainConfig c;
  c.max_iterations = 15;
  c.restarts = 3;
  c.seed = 99;
  return c;
}

HmmTopology small_topology() { return build_occurrence_topology(2, 4, Alphabet::dna()); }

void expect_rows_near(const std::vector<std::vector<double>>& a,
                      const std::vector<std::vector<double>>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), b[i].size());
    for (std::size_t j = 0; j < a[i].size(); ++j) EXPECT_NEAR(a[i][j], b[i][j], tol);
  }
}

TEST(EmStepTest, ToyATransitionIsSmoothedExpectedCount) {
  const auto params = toy_a_params();
  const auto reg = toy_a_regression();
  const auto data = encoded(params.alphabet(), {{"ab", 5.0}});
  const auto oracle = testing::oracle(params, toy_a_caps(), data.sequences[0], &reg, 5.0);
  const double to_motif = oracle.transition_counts[0][1];
  EXPECT_NEAR(to_motif, 0.9999988, 1e-7);

  TrainConfig config;
  config.alphabet = params.alphabet();
  config.use_intercept = false;
  const auto next = em_step(wrap(params, toy_a_caps(), reg), data, config);
  EXPECT_NEAR(next.params.transition()[0][1], (to_motif + kPseudocount) / (1.0 + 2 * kPseudocount),
              1e-12);
  EXPECT_DOUBLE_EQ(next.params.transition()[1][0], 1.0);
  // The starting objective is recorded first.
  ASSERT_EQ(next.training_trace.size(), 2u);
  EXPECT_EQ(next.meta.iterations, 1);
}

TEST(EmStepTest, DegeneratePosteriorIsAFixedPoint) {
  // Single path per sequence: B at position 0, then M.
  TopologySpec spec;
  spec.start = {1.0, 0.0};
  spec.successors = {{1}, {1}};
  spec.counted = {1};
  const Alphabet ab("ab");
  HmmParams start(HmmTopology(spec), ab, {1.0, 0.0}, {{1.0}, {1.0}}, {{0.5, 0.5}, {0.3, 0.7}});
  auto reg = toy_a_regression();
  const auto data = encoded(ab, {{"ab", 4.0}, {"aa", 6.0}});
  TrainConfig config;
  config.alphabet = ab;
  config.use_intercept = false;

  const auto once = em_step(wrap(start, VisitCaps({4}), reg), data, config);
  EXPECT_NEAR(once.params.emission()[0][0], 2.01 / 2.02, 1e-12);
  EXPECT_NEAR(once.params.emission()[1][0], 0.5, 1e-12);
  EXPECT_NEAR(once.regression.coefficients[0], 5.0, 1e-7);
  EXPECT_NEAR(once.regression.sigma, 1.0, 1e-7);

  const auto twice = em_step(once, data, config);
  expect_rows_near(twice.params.emission(), once.params.emission(), 1e-9);
  expect_rows_near(twice.params.transition(), once.params.transition(), 1e-9);
  EXPECT_NEAR(twice.regression.coefficients[0], once.regression.coefficients[0], 1e-9);
  EXPECT_NEAR(twice.regression.sigma, once.regression.sigma, 1e-9);
}

TEST(EmStepTest, FlatResponseWeightingIsBaumWelch) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = testing::random_problem(rng, 5, 7);
    EncodedDataset data{p.sequences, p.responses};
    auto flat = p.regression;
    flat.sigma = 1e9;
    const auto weighted = e_step_stats(p.params, p.caps, data, &flat);
    const auto plain = e_step_stats(p.params, p.caps, data, nullptr);
    expect_rows_near(weighted.transition, plain.transition, 1e-9);
    expect_rows_near(weighted.emission, plain.emission, 1e-9);
    for (std::size_t s = 0; s < plain.start.size(); ++s) {
      EXPECT_NEAR(weighted.start[s], plain.start[s], 1e-9);
    }
  }
}

TEST(EmStepTest, RowsStayNormalized) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = testing::random_problem(rng, 4, 6);
    TrainConfig config;
    config.alphabet = p.params.alphabet();
    const auto next =
        em_step(wrap(p.params, p.caps, p.regression), {p.sequences, p.responses}, config);
    for (const auto& row : next.params.transition()) {
      double sum = 0.0;
      for (double v : row) sum += v;
      EXPECT_NEAR(sum, 1.0, kRowSumTolerance);
    }
    for (const auto& row : next.params.emission()) {
      double sum = 0.0;
      for (double v : row) sum += v;
      EXPECT_NEAR(sum, 1.0, kRowSumTolerance);
    }
  }
}

TEST(EmTrainTest, ForcedPathGivesEmpiricalEmissions) {
  TopologySpec spec;
  spec.start = {1.0, 0.0, 0.0};
  spec.successors = {{1}, {2}, {2}};
  spec.counted = {2};
  const Alphabet ab("ab");
  const auto topology = HmmTopology(spec);
  HmmParams params(topology, ab, {1.0, 0.0, 0.0}, {{1.0}, {1.0}, {1.0}},
                   {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
  const auto data = encoded(ab, {{"aab", 1.0}, {"abb", 2.0}, {"aba", 0.5}, {"bab", 1.5}});
  TrainConfig config;
  config.alphabet = ab;
  config.use_intercept = false;
  const auto model = em_train(config, wrap(params, VisitCaps({1}), toy_a_regression()), data);
  const double n = 4.0 + 2 * kPseudocount;
  EXPECT_NEAR(model.params.emission()[0][0], (3 + kPseudocount) / n, 1e-12);
  EXPECT_NEAR(model.params.emission()[1][0], (2 + kPseudocount) / n, 1e-12);
  EXPECT_NEAR(model.params.emission()[2][1], (3 + kPseudocount) / n, 1e-12);
  EXPECT_TRUE(model.meta.converged);
}

TEST(EmTrainTest, TraceIsMonotoneOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    auto p = testing::random_problem(rng, 6, 8);
    TrainConfig config;
    config.alphabet = p.params.alphabet();
    config.max_iterations = 60;
    config.tolerance = 1e-12;
    const auto model =
        em_train(config, wrap(p.params, p.caps, p.regression), {p.sequences, p.responses});
    for (std::size_t i = 1; i < model.training_trace.size(); ++i) {
      EXPECT_GE(model.training_trace[i], model.training_trace[i - 1])
          << "seed " << seed << " iteration " << i;
    }
  }
}

// Without the stopping guard, the objective plus the pseudocount prior is
// what each round maximizes.
TEST(EmStepTest, SmoothedObjectiveNeverDecreases) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(5000 + seed);
    auto p = testing::random_problem(rng, 6, 8);
    TrainConfig config;
    config.alphabet = p.params.alphabet();
    const EncodedDataset data{p.sequences, p.responses};
    auto model = wrap(p.params, p.caps, p.regression);
    double previous = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < 40; ++it) {
      const auto next = em_step(model, data, config);
      const double before =
          next.training_trace[next.training_trace.size() - 2] + log_smoothing_prior(model.params);
      const double after = next.training_trace.back() + log_smoothing_prior(next.params);
      EXPECT_GE(before, previous - 1e-9 * std::abs(previous)) << "seed " << seed;
      EXPECT_GE(after - before, -1e-9 * std::abs(before)) << "seed " << seed << " round " << it;
      previous = after;
      model = next;
    }
  }
}

TEST(EmTrainTest, StopsAtIterationLimit) {
  auto config = small_config();
  config.max_iterations = 3;
  config.tolerance = 1e-300;
  const auto model = em_train(config, small_topology(), small_task().train.data);
  EXPECT_EQ(model.meta.iterations, 3);
  EXPECT_FALSE(model.meta.converged);
  EXPECT_EQ(model.training_trace.size(), 4u);
}

TEST(EmTrainTest, DeterministicUnderSeed) {
  const auto a = em_train(small_config(), small_topology(), small_task().train.data);
  const auto b = em_train(small_config(), small_topology(), small_task().train.data);
  EXPECT_EQ(a, b);
  auto other = small_config();
  other.seed = 100;
  EXPECT_FALSE(em_train(other, small_topology(), small_task().train.data) == a);
}

TEST(EmTrainTest, ErrorNamesExample) {
  Dataset bad = small_task().train.data;
  bad.examples[3].sequence[0] = 'x';
  try {
    em_train(small_config(), small_topology(), bad);
    FAIL() << "expected InvalidInput";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("example 3"), std::string::npos) << e.what();
  }
}

TEST(EmTrainTest, VerboseLogHasHeaderAndOneRowPerIterate) {
  auto config = small_config();
  config.max_iterations = 2;
  config.tolerance = 1e-300;
  std::ostringstream log;
  config.log = &log;
  em_train(config, small_topology(), small_task().train.data);
  const std::string text = log.str();
  EXPECT_EQ(
      text.rfind("# learner\tseed\titeration\tobjective\tsigma\tintercept\tbeta_1\tbeta_2\n", 0),
      0u)
      << text;
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST(TwoPhaseTest, ToyADesignRows) {
  const auto params = toy_a_params();
  const auto design =
      response_free_design(params, toy_a_caps(), encoded(params.alphabet(), {{"ab", 5.0}}));
  ASSERT_EQ(design.rows.size(), 2u);
  EXPECT_EQ(design.rows[0].visits, std::vector<double>{0.0});
  EXPECT_NEAR(design.rows[0].weight, 0.25, 1e-12);
  EXPECT_EQ(design.rows[1].visits, std::vector<double>{1.0});
  EXPECT_NEAR(design.rows[1].weight, 0.75, 1e-12);
  EXPECT_EQ(design.rows[1].response, 5.0);
}

TEST(TwoPhaseTest, PhaseOneNeverReadsResponses) {
  auto config = small_config();
  config.learner = Learner::kTwoPhase;
  Dataset shuffled = small_task().train.data;
  std::vector<double> ys;
  for (const auto& ex : shuffled.examples) ys.push_back(ex.response);
  std::reverse(ys.begin(), ys.end());
  for (std::size_t i = 0; i < ys.size(); ++i) shuffled.examples[i].response = ys[i] * 3.0 + 1.0;
  const auto a = two_phase_train(config, small_topology(), small_task().train.data);
  const auto b = two_phase_train(config, small_topology(), shuffled);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.training_trace, b.training_trace);
  EXPECT_FALSE(a.regression == b.regression);
}

TEST(TwoPhaseTest, TraceIsMonotoneLikelihood) {
  auto config = small_config();
  config.learner = Learner::kTwoPhase;
  config.tolerance = 1e-12;
  const auto model = two_phase_train(config, small_topology(), small_task().train.data);
  EXPECT_EQ(model.meta.learner, Learner::kTwoPhase);
  for (std::size_t i = 1; i < model.training_trace.size(); ++i) {
    EXPECT_GE(model.training_trace[i] - model.training_trace[i - 1],
              -1e-7 * std::abs(model.training_trace[i - 1]));
  }
  EXPECT_EQ(model, two_phase_train(config, small_topology(), small_task().train.data));
}

TEST(RestartTest, SingleRestartIsPlainTraining) {
  auto config = small_config();
  config.restarts = 1;
  const auto& task = small_task();
  const auto picked =
      train_with_restarts(config, small_topology(), task.train.data, task.tune.data);
  auto plain = em_train(config, small_topology(), task.train.data);
  EXPECT_EQ(picked.params, plain.params);
  EXPECT_EQ(picked.regression, plain.regression);
  EXPECT_EQ(picked.training_trace, plain.training_trace);
  EXPECT_DOUBLE_EQ(*picked.meta.tuning_mae, evaluate_mae(plain, task.tune.data));
}

TEST(RestartTest, PicksLowestTuningError) {
  const auto& task = small_task();
  std::vector<RestartOutcome> outcomes;
  const auto picked = train_with_restarts(small_config(), small_topology(), task.train.data,
                                          task.tune.data, &outcomes);
  ASSERT_EQ(outcomes.size(), 3u);
  for (const auto& o : outcomes) {
    ASSERT_TRUE(o.tuning_mae);
    EXPECT_LE(*picked.meta.tuning_mae, *o.tuning_mae);
    EXPECT_EQ(o.seed, restart_seed(small_config().seed, o.restart));
  }
  EXPECT_EQ(picked.meta.seed, restart_seed(small_config().seed, picked.meta.restart));
  const auto again =
      train_with_restarts(small_config(), small_topology(), task.train.data, task.tune.data);
  EXPECT_EQ(picked, again);
}

TEST(RestartTest, AllFailuresAreAggregated) {
  Dataset bad = small_task().train.data;
  bad.examples[0].sequence[0] = 'x';
  auto config = small_config();
  config.restarts = 2;
  try {
    train_with_restarts(config, small_topology(), bad, small_task().tune.data);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("restart 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("restart 1"), std::string::npos) << msg;
  }
}

TEST(RestartTest, SeedsAreDistinct) {
  EXPECT_EQ(restart_seed(42, 0), 42u);
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < 10; ++r) seeds.push_back(restart_seed(42, r));
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(std::unique(seeds.begin(), seeds.end()), seeds.end());
}

TEST(TrainConfigTest, Validates) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.max_iterations = 0;
  EXPECT_THROW(c.validate(), InvalidConfiguration);
  c = {};
  c.restarts = 0;
  EXPECT_THROW(c.validate(), InvalidConfiguration);
  c = {};
  c.tolerance = 0.0;
  EXPECT_THROW(c.validate(), InvalidConfiguration);
}

TEST(LearnerNameTest, RoundTrips) {
  EXPECT_EQ(learner_from_string("path-aggregate"), Learner::kPathAggregate);
  EXPECT_EQ(learner_from_string("two_phase"), Learner::kTwoPhase);
  EXPECT_EQ(learner_from_string(to_string(Learner::kTwoPhase)), Learner::kTwoPhase);
  EXPECT_THROW(learner_from_string("gradient"), InvalidConfiguration);
}

TEST(MeanBaselineTest, Examples) {
  Dataset d{{{"a", 3.0}, {"c", 5.0}}};
  const auto b = mean_baseline(d);
  EXPECT_DOUBLE_EQ(b.predict(), 4.0);
  EXPECT_DOUBLE_EQ(evaluate_mae(b, d), 1.0);
  EXPECT_DOUBLE_EQ(mean_baseline(Dataset{{{"g", 9.0}}}).predict(), 9.0);
  EXPECT_THROW(mean_baseline(Dataset{}), InvalidInput);
}

TEST(MeanBaselineTest, OwnTrainingErrorIsMeanAbsoluteDeviation) {
  const auto& train = small_task().train.data;
  const auto b = mean_baseline(train);
  double mad = 0.0;
  for (const auto& ex : train.examples) mad += std::abs(ex.response - b.mean);
  EXPECT_NEAR(evaluate_mae(b, train), mad / static_cast<double>(train.size()), 1e-12);
}

}  // namespace
}  // namespace pathagg
