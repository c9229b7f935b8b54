#include "pathagg/experiment.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "pathagg/error.hpp"

namespace pathagg {
namespace {

ExperimentSpec tiny_spec() {
  ExperimentSpec spec;
  spec.sweep = SweepVariable::kDecoyMotifs;
  spec.grid = {0, 1};
  spec.replicates = 2;
  spec.learners = {ExperimentLearner::kPathAggregate, ExperimentLearner::kTwoPhase,
                   ExperimentLearner::kMeanBaseline};
  spec.base.seq_len = 30;
  spec.base.motif_len = 3;
  spec.base.train_size = 12;
  spec.base.tune_size = 8;
  spec.base.test_size = 8;
  spec.search.motif_width = 3;
  spec.search.max_motifs = 1;
  spec.search.train.restarts = 1;
  spec.search.train.max_iterations = 3;
  spec.seed = 4;
  return spec;
}

int count_lines(const std::string& s, const std::string& prefix) {
  std::istringstream in(s);
  int n = 0;
  for (std::string line; std::getline(in, line);) n += line.rfind(prefix, 0) == 0;
  return n;
}

TEST(Experiment, SingleBaselineCell) {
  ExperimentSpec spec;
  spec.grid = {0};
  spec.learners = {ExperimentLearner::kMeanBaseline};
  spec.seed = 1;
  const auto results = run_experiment(spec);
  ASSERT_EQ(results.cells.size(), 1u);
  ASSERT_TRUE(results.cells[0].test_mae.has_value());
  const auto csv = results_csv(results);
  EXPECT_EQ(count_lines(csv, "cell,"), 1);
  EXPECT_EQ(count_lines(csv, "summary,"), 1);
  EXPECT_EQ(csv.rfind("kind,sweep,value,learner,replicate,test_mae,std_error,count,status\n", 0),
            0u);
  EXPECT_EQ(results.summary(0, ExperimentLearner::kMeanBaseline).count, 1);
  EXPECT_FALSE(results.summary(0, ExperimentLearner::kMeanBaseline).std_error.has_value());
}

TEST(Experiment, CsvIsIndependentOfWorkerCount) {
  auto spec = tiny_spec();
  const auto serial = results_csv(run_experiment(spec));
  spec.workers = 3;
  const auto parallel = results_csv(run_experiment(spec));
  EXPECT_EQ(serial, parallel);
  EXPECT_EQ(count_lines(serial, "cell,"), 12);
  EXPECT_EQ(count_lines(serial, "summary,"), 6);
  spec.seed = 5;
  EXPECT_NE(results_csv(run_experiment(spec)), serial);
}

TEST(Experiment, CellOrderAndSummaries) {
  const auto results = run_experiment(tiny_spec());
  ASSERT_EQ(results.cells.size(), 12u);
  EXPECT_EQ(results.cells[0].value, 0);
  EXPECT_EQ(results.cells[0].replicate, 0);
  EXPECT_EQ(results.cells[0].learner, ExperimentLearner::kPathAggregate);
  EXPECT_EQ(results.cells[2].learner, ExperimentLearner::kMeanBaseline);
  EXPECT_EQ(results.cells[3].replicate, 1);
  EXPECT_EQ(results.cells[6].value, 1);
  const auto& s = results.summary(1, ExperimentLearner::kTwoPhase);
  ASSERT_EQ(s.count, 2);
  const double a = *results.cells[7].test_mae;
  const double b = *results.cells[10].test_mae;
  EXPECT_DOUBLE_EQ(*s.mean_mae, (a + b) / 2.0);
  EXPECT_NEAR(*s.std_error, std::abs(a - b) / 2.0, 1e-12);
}

TEST(Experiment, FailedCellsAreRecorded) {
  auto spec = tiny_spec();
  spec.grid = {0, 40};
  spec.replicates = 1;
  spec.learners = {ExperimentLearner::kMeanBaseline};
  const auto results = run_experiment(spec);
  ASSERT_EQ(results.cells.size(), 2u);
  EXPECT_TRUE(results.cells[0].test_mae.has_value());
  EXPECT_FALSE(results.cells[1].test_mae.has_value());
  EXPECT_EQ(results.cells[1].error.rfind("generation: ", 0), 0u) << results.cells[1].error;
  const auto csv = results_csv(results);
  EXPECT_NE(csv.find("no_successful_cells"), std::string::npos);
  EXPECT_NE(csv.find(",error: generation: "), std::string::npos);
}

TEST(Experiment, SpecFromJson) {
  const auto spec = experiment_spec_from_json(R"({
    "sweep": "mutation_rate", "grid": [0, 1, 2], "replicates": 3,
    "learners": ["path_aggregate", "two-phase"],
    "base": {"seq_len": 100, "decoy_motifs": 5},
    "search": {"motif_width": 10, "max_motifs": 2},
    "train": {"restarts": 4, "intercept": false},
    "workers": 2, "seed": 9})");
  EXPECT_EQ(spec.sweep, SweepVariable::kMutationRate);
  EXPECT_EQ(spec.grid, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(spec.replicates, 3);
  EXPECT_EQ(spec.learners.size(), 2u);
  EXPECT_EQ(spec.base.seq_len, 100);
  EXPECT_EQ(spec.base.decoy_motifs, 5);
  EXPECT_EQ(spec.search.motif_width, 10);
  EXPECT_EQ(spec.search.train.restarts, 4);
  EXPECT_FALSE(spec.search.train.use_intercept);
  EXPECT_EQ(spec.workers, 2);
  EXPECT_EQ(spec.seed, 9u);
  EXPECT_NO_THROW(spec.validate());
}

TEST(Experiment, SpecRejectsBadInput) {
  EXPECT_THROW(experiment_spec_from_json(R"({"sweep": "decoy_motifs", "grid": [0], "bogus": 1})"),
               InvalidConfiguration);
  EXPECT_THROW(experiment_spec_from_json(R"({"sweep": "length", "grid": [0]})"),
               InvalidConfiguration);
  EXPECT_THROW(experiment_spec_from_json("{"), Error);
  auto spec = tiny_spec();
  spec.grid.clear();
  EXPECT_THROW(spec.validate(), InvalidConfiguration);
  spec = tiny_spec();
  spec.replicates = 0;
  EXPECT_THROW(spec.validate(), InvalidConfiguration);
  spec = tiny_spec();
  spec.sweep = SweepVariable::kMutationRate;
  spec.grid = {4};
  EXPECT_THROW(spec.validate(), InvalidConfiguration);
}

TEST(Experiment, SeedsSeparateCells) {
  const auto spec = tiny_spec();
  EXPECT_NE(cell_data_seed(spec, 0, 0), cell_data_seed(spec, 0, 1));
  EXPECT_NE(cell_data_seed(spec, 0, 0), cell_data_seed(spec, 1, 0));
  EXPECT_NE(cell_train_seed(cell_data_seed(spec, 0, 0)), cell_data_seed(spec, 0, 0));
}

TEST(SyntheticConfigJson, OverridesBase) {
  const auto c = synthetic_config_from_json(
      R"({"seq_len": 80, "effect_coefficients": [1, 2, 3], "noise_sigma": 0.5})");
  EXPECT_EQ(c.seq_len, 80);
  EXPECT_EQ(c.effect_coefficients, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(c.noise_sigma, 0.5);
  EXPECT_EQ(c.motif_len, 10);
  EXPECT_THROW(synthetic_config_from_json(R"({"seqlen": 80})"), InvalidConfiguration);
}

}  // namespace
}  // namespace pathagg
