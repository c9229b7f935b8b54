#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pathagg/dataset.hpp"
#include "pathagg/inference.hpp"
#include "pathagg/model.hpp"
#include "pathagg/regression.hpp"

namespace pathagg {

enum class Learner { kPathAggregate, kTwoPhase };

std::string_view to_string(Learner learner);
Learner learner_from_string(std::string_view name);

enum class InitMode { kSampled, kRandom, kUniform };

std::string_view to_string(InitMode mode);
InitMode init_mode_from_string(std::string_view name);

struct TrainConfig {
  Alphabet alphabet = Alphabet::dna();
  int max_iterations = 100;
  // Stop once the relative objective improvement falls below this.
  double tolerance = 1e-6;
  int restarts = 10;
  InitMode init = InitMode::kSampled;
  bool use_intercept = true;
  std::size_t lattice_budget = kDefaultLatticeBudget;
  std::uint64_t seed = 0;
  // Cap for counted states that lie on a cycle.
  int visit_cap = 4;
  Learner learner = Learner::kPathAggregate;
  // Per-iteration TSV log when set.
  std::ostream* log = nullptr;

  // Throws InvalidConfiguration.
  void validate() const;
  InferenceOptions inference() const { return {lattice_budget}; }
};

struct TrainingMeta {
  Learner learner = Learner::kPathAggregate;
  std::uint64_t seed = 0;
  int restart = 0;
  int iterations = 0;
  bool converged = false;
  // Lattice exceeded the budget and expected visits were used instead.
  bool expected_visits_fallback = false;
  // Tuning MAE when the model was picked from several candidates.
  std::optional<double> tuning_mae;

  bool operator==(const TrainingMeta&) const = default;
};

struct TrainedModel {
  HmmParams params;
  VisitCaps caps;
  RegressionParams regression;
  // Path-aggregate: joint log objective of each iterate. Two-phase: log
  // likelihood of the sequences alone.
  std::vector<double> training_trace;
  TrainingMeta meta;

  bool operator==(const TrainedModel&) const = default;
};

// Fresh parameters for `topology` seeded by `seed`, with a regression fitted
// to the response-free visit posteriors under those parameters.
TrainedModel initial_model(const TrainConfig& config, const HmmTopology& topology,
                           const Dataset& train, std::uint64_t seed);

// One E-step / M-step round. The returned model's trace gains the joint
// objective of the updated parameters.
TrainedModel em_step(const TrainedModel& model, const EncodedDataset& data,
                     const TrainConfig& config);

// kPseudocount times the sum of log start (over allowed starts), transition
// and emission (once per tied group) probabilities. Each M-step maximizes
// the expected objective plus this term, so their sum never decreases.
double log_smoothing_prior(const HmmParams& params);

// Path-aggregate EM from initial_model(config.seed). A round that would
// lower the objective is discarded and training stops there.
TrainedModel em_train(const TrainConfig& config, const HmmTopology& topology, const Dataset& train);
// Continues EM from an existing model.
TrainedModel em_train(const TrainConfig& config, TrainedModel model, const EncodedDataset& data);

// Baum-Welch ignoring responses, then a single regression fit on P(v | x).
TrainedModel two_phase_train(const TrainConfig& config, const HmmTopology& topology,
                             const Dataset& train);

// Design rows (v, y, P(v | x)) used by the two-phase regression fit.
WeightedDesign response_free_design(const HmmParams& params, const VisitCaps& caps,
                                    const EncodedDataset& data);

struct RestartOutcome {
  int restart = 0;
  std::uint64_t seed = 0;
  // Empty when the restart failed.
  std::optional<double> tuning_mae;
  std::string error;
};

// Runs config.learner from config.restarts derived seeds and keeps the model
// with the lowest tuning MAE (earliest restart on ties). Per-restart results
// are appended to `outcomes` when given.
TrainedModel train_with_restarts(const TrainConfig& config, const HmmTopology& topology,
                                 const Dataset& train, const Dataset& tune,
                                 std::vector<RestartOutcome>* outcomes = nullptr);

// Seed of restart `index` under a master seed. Restart 0 uses the master
// itself, so a single restart is a plain em_train call.
std::uint64_t restart_seed(std::uint64_t master, int index);

struct MeanBaseline {
  double mean = 0.0;

  double predict() const noexcept { return mean; }
};

MeanBaseline mean_baseline(const Dataset& train);

}  // namespace pathagg
