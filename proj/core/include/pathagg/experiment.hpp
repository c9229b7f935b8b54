#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pathagg/datagen.hpp"
#include "pathagg/structure.hpp"

namespace pathagg {

enum class SweepVariable { kMutationRate, kDecoyMotifs };

std::string_view to_string(SweepVariable sweep);
SweepVariable sweep_from_string(std::string_view name);

enum class ExperimentLearner { kPathAggregate, kTwoPhase, kMeanBaseline };

std::string_view to_string(ExperimentLearner learner);
ExperimentLearner experiment_learner_from_string(std::string_view name);

struct ExperimentSpec {
  SweepVariable sweep = SweepVariable::kDecoyMotifs;
  std::vector<int> grid;
  int replicates = 1;
  std::vector<ExperimentLearner> learners;
  // Sweep value overrides the swept field; seed is replaced per cell.
  SyntheticConfig base;
  std::uint64_t seed = 0;
  // Template, width, motif limit and training settings shared by both HMM
  // learners. Its seed and logs are ignored.
  StructureSearchConfig search;
  int workers = 1;

  // Throws InvalidConfiguration.
  void validate() const;
};

// Strict JSON readers; unknown keys are rejected. Missing keys keep the
// defaults of `base` / the default spec.
SyntheticConfig synthetic_config_from_json(const std::string& text, SyntheticConfig base = {});
ExperimentSpec experiment_spec_from_json(const std::string& text);

// Seeds of one grid cell. All learners share the data and training seed.
std::uint64_t cell_data_seed(const ExperimentSpec& spec, int value, int replicate);
std::uint64_t cell_train_seed(std::uint64_t data_seed);

struct CellResult {
  int value = 0;
  ExperimentLearner learner = ExperimentLearner::kMeanBaseline;
  int replicate = 0;
  std::optional<double> test_mae;
  // "kind: message" when the cell failed.
  std::string error;
};

struct CellSummary {
  int value = 0;
  ExperimentLearner learner = ExperimentLearner::kMeanBaseline;
  // Over the replicates that succeeded.
  std::optional<double> mean_mae;
  std::optional<double> std_error;
  int count = 0;
};

struct ExperimentResults {
  SweepVariable sweep = SweepVariable::kDecoyMotifs;
  // Grid order, then replicate, then learner order of the spec.
  std::vector<CellResult> cells;
  // Grid order, then learner order.
  std::vector<CellSummary> summaries;

  const CellSummary& summary(int value, ExperimentLearner learner) const;
};

// Cells run on up to spec.workers threads; results do not depend on the
// worker count. One line per finished cell goes to `progress` when set.
ExperimentResults run_experiment(const ExperimentSpec& spec, std::ostream* progress = nullptr);

// Header kind,sweep,value,learner,replicate,test_mae,std_error,count,status
// followed by cell rows and then summary rows.
std::string results_csv(const ExperimentResults& results);

}  // namespace pathagg
