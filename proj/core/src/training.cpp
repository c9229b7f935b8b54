#include "pathagg/training.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>

#include "pathagg/error.hpp"
#include "pathagg/predict.hpp"
#include "pathagg/random.hpp"

namespace pathagg {

std::string_view to_string(Learner learner) {
  switch (learner) {
    case Learner::kPathAggregate: return "path-aggregate";
    case Learner::kTwoPhase: return "two-phase";
  }
  return "unknown";
}

Learner learner_from_string(std::string_view name) {
  if (name == "path-aggregate" || name == "path_aggregate") return Learner::kPathAggregate;
  if (name == "two-phase" || name == "two_phase") return Learner::kTwoPhase;
  throw InvalidConfiguration("unknown learner \"" + std::string(name) + "\"");
}

std::string_view to_string(InitMode mode) {
  switch (mode) {
    case InitMode::kSampled: return "sampled";
    case InitMode::kRandom: return "random";
    case InitMode::kUniform: return "uniform";
  }
  return "unknown";
}

InitMode init_mode_from_string(std::string_view name) {
  if (name == "sampled") return InitMode::kSampled;
  if (name == "random") return InitMode::kRandom;
  if (name == "uniform") return InitMode::kUniform;
  throw InvalidConfiguration("unknown init mode \"" + std::string(name) + "\"");
}

void TrainConfig::validate() const {
  if (max_iterations < 1) throw InvalidConfiguration("max_iterations must be positive");
  if (restarts < 1) throw InvalidConfiguration("restarts must be positive");
  if (!(tolerance > 0.0)) throw InvalidConfiguration("tolerance must be positive");
  if (visit_cap < 1) throw InvalidConfiguration("visit cap must be at least 1");
  if (lattice_budget < 1) throw InvalidConfiguration("lattice budget must be positive");
}

namespace {

HmmParams m_step_params(const HmmParams& params, const SufficientStats& stats) {
  const auto& topology = params.topology();
  const std::size_t n = topology.state_count();
  const std::size_t a = params.alphabet().size();

  std::vector<double> start(n, 0.0);
  double start_total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    if (topology.start_distribution()[s] > 0.0) {
      start[s] = stats.start[s] + kPseudocount;
      start_total += start[s];
    }
  }
  for (double& p : start) p /= start_total;

  std::vector<std::vector<double>> transition(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& counts = stats.transition[s];
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0) +
                         kPseudocount * static_cast<double>(counts.size());
    transition[s].resize(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) {
      transition[s][j] = (counts[j] + kPseudocount) / total;
    }
  }

  // Tied states pool their counts.
  std::vector<std::vector<double>> group_counts(topology.emission_group_count(),
                                                std::vector<double>(a, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    auto& g =
        group_counts[static_cast<std::size_t>(topology.emission_group(static_cast<StateIndex>(s)))];
    for (std::size_t c = 0; c < a; ++c) g[c] += stats.emission[s][c];
  }
  for (auto& g : group_counts) {
    const double total =
        std::accumulate(g.begin(), g.end(), 0.0) + kPseudocount * static_cast<double>(a);
    for (double& c : g) c = (c + kPseudocount) / total;
  }
  std::vector<std::vector<double>> emission(n);
  for (std::size_t s = 0; s < n; ++s) {
    emission[s] =
        group_counts[static_cast<std::size_t>(topology.emission_group(static_cast<StateIndex>(s)))];
  }
  return HmmParams(topology, params.alphabet(), std::move(start), std::move(transition),
                   std::move(emission));
}

RegressionParams fit_expected_rows(const std::vector<std::vector<double>>& visits,
                                   const std::vector<double>& responses, bool use_intercept) {
  std::vector<ExpectedVisitRow> rows(visits.size());
  for (std::size_t i = 0; i < visits.size(); ++i) rows[i] = {visits[i], responses[i]};
  return fit_expected(rows, use_intercept);
}

RegressionParams m_step_regression(const SufficientStats& stats, bool use_intercept) {
  if (stats.expected_visits_fallback) {
    return fit_expected_rows(stats.expected_visits, stats.responses, use_intercept);
  }
  return fit_weighted(design_from_posteriors(stats.visit_posteriors, stats.responses),
                      use_intercept);
}

// Regression fitted once to response-free visit information.
RegressionParams response_free_regression(const HmmParams& params, const VisitCaps& caps,
                                          const EncodedDataset& data, const TrainConfig& config) {
  const auto options = config.inference();
  if (exceeds_budget(caps, options)) {
    std::vector<std::vector<double>> visits;
    for (const auto& x : data.sequences) {
      visits.push_back(expected_visits(params, caps, x, std::nullopt, options));
    }
    return fit_expected_rows(visits, data.responses, config.use_intercept);
  }
  return fit_weighted(response_free_design(params, caps, data), config.use_intercept);
}

double relative_improvement(double previous, double current) {
  const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
  return (current - previous) / scale;
}

void log_header(const TrainConfig& config, const HmmTopology& topology) {
  if (config.log == nullptr) return;
  *config.log << "# learner\tseed\titeration\tobjective\tsigma\tintercept";
  for (std::size_t k = 0; k < topology.counted_count(); ++k) *config.log << "\tbeta_" << k + 1;
  *config.log << '\n';
}

void log_iteration(const TrainConfig& config, const TrainedModel& model, int iteration,
                   double objective) {
  if (config.log == nullptr) return;
  auto& out = *config.log;
  out << to_string(model.meta.learner) << '\t' << model.meta.seed << '\t' << iteration << '\t'
      << format_double(objective) << '\t' << format_double(model.regression.sigma) << '\t'
      << format_double(model.regression.intercept_or_zero());
  for (double b : model.regression.coefficients) out << '\t' << format_double(b);
  out << '\n';
}

// Runs E/M rounds until the traced objective stops improving. With
// `conditioned` the E-step carries the response weights and the regression
// is refitted every round; without, only Θ is updated.
//
// The pseudocounts make each M-step maximize the objective plus
// log_smoothing_prior, so the objective alone can dip slightly near a fixed
// point. A round that lowers it is undone and ends training.
TrainedModel iterate(const TrainConfig& config, TrainedModel model, const EncodedDataset& data,
                     bool conditioned) {
  const auto options = config.inference();
  log_header(config, model.params.topology());
  std::optional<TrainedModel> before;
  for (int it = 0;; ++it) {
    SufficientStats stats;
    try {
      // Without the response weights the expected counts do not depend on
      // visit tracking, so the plain state lattice gives the same result.
      stats = conditioned ? e_step_stats(model.params, model.caps, data, &model.regression, options)
                          : e_step_stats(model.params, VisitCaps(), data, nullptr, options);
    } catch (const Error& e) {
      rethrow_with_context(e, "iteration " + std::to_string(it));
    }
    if (conditioned) model.meta.expected_visits_fallback = stats.expected_visits_fallback;
    const double objective = stats.log_objective;
    log_iteration(config, model, it, objective);
    if (!std::isfinite(objective)) {
      throw TrainingError("objective is not finite at iteration " + std::to_string(it));
    }
    const bool has_previous = !model.training_trace.empty();
    const double previous = has_previous ? model.training_trace.back() : 0.0;
    if (before && objective < previous) {
      model = std::move(*before);
      model.meta.converged = true;
      break;
    }
    model.training_trace.push_back(objective);
    if (has_previous && relative_improvement(previous, objective) < config.tolerance) {
      model.meta.converged = true;
      break;
    }
    if (model.meta.iterations >= config.max_iterations) break;
    before = model;
    model.params = m_step_params(model.params, stats);
    if (conditioned) model.regression = m_step_regression(stats, config.use_intercept);
    ++model.meta.iterations;
  }
  return model;
}

// Objective in whichever form e_step_stats would report it.
double traced_objective(const TrainedModel& model, const EncodedDataset& data,
                        const InferenceOptions& options) {
  if (exceeds_budget(model.caps, options)) {
    return e_step_stats(model.params, model.caps, data, &model.regression, options).log_objective;
  }
  return joint_objective(model.params, model.caps, model.regression, data);
}

InitSpec init_spec(const TrainConfig& config, const Dataset& train, std::uint64_t seed) {
  switch (config.init) {
    case InitMode::kSampled: return SampledInit{&train, seed};
    case InitMode::kRandom: return RandomInit{seed};
    case InitMode::kUniform: return UniformInit{};
  }
  return UniformInit{};
}

}  // namespace

TrainedModel initial_model(const TrainConfig& config, const HmmTopology& topology,
                           const Dataset& train, std::uint64_t seed) {
  config.validate();
  if (train.empty()) throw InvalidInput("training set is empty");
  const auto data = encode(train, config.alphabet);
  auto params = init_params(topology, config.alphabet, init_spec(config, train, seed));
  auto caps = default_caps(topology, config.visit_cap);
  auto regression = response_free_regression(params, caps, data, config);
  TrainingMeta meta;
  meta.learner = config.learner;
  meta.seed = seed;
  meta.expected_visits_fallback = exceeds_budget(caps, config.inference());
  return TrainedModel{std::move(params), std::move(caps), std::move(regression), {}, meta};
}

double log_smoothing_prior(const HmmParams& params) {
  const auto& topology = params.topology();
  double total = 0.0;
  for (std::size_t s = 0; s < topology.state_count(); ++s) {
    if (topology.start_distribution()[s] > 0.0) total += std::log(params.start()[s]);
    for (double p : params.transition()[s]) total += std::log(p);
  }
  std::vector<bool> seen(topology.emission_group_count(), false);
  for (std::size_t s = 0; s < topology.state_count(); ++s) {
    const auto g = static_cast<std::size_t>(topology.emission_group(static_cast<StateIndex>(s)));
    if (seen[g]) continue;
    seen[g] = true;
    for (double p : params.emission()[s]) total += std::log(p);
  }
  return kPseudocount * total;
}

TrainedModel em_step(const TrainedModel& model, const EncodedDataset& data,
                     const TrainConfig& config) {
  if (data.empty()) throw InvalidInput("training set is empty");
  const auto options = config.inference();
  const auto stats = e_step_stats(model.params, model.caps, data, &model.regression, options);
  TrainedModel next = model;
  if (next.training_trace.empty()) next.training_trace.push_back(stats.log_objective);
  next.params = m_step_params(model.params, stats);
  next.regression = m_step_regression(stats, config.use_intercept);
  next.meta.expected_visits_fallback = stats.expected_visits_fallback;
  ++next.meta.iterations;
  next.training_trace.push_back(traced_objective(next, data, options));
  return next;
}

TrainedModel em_train(const TrainConfig& config, TrainedModel model, const EncodedDataset& data) {
  config.validate();
  if (data.empty()) throw InvalidInput("training set is empty");
  model.meta.learner = Learner::kPathAggregate;
  return iterate(config, std::move(model), data, true);
}

TrainedModel em_train(const TrainConfig& config, const HmmTopology& topology,
                      const Dataset& train) {
  auto model = initial_model(config, topology, train, config.seed);
  return em_train(config, std::move(model), encode(train, config.alphabet));
}

WeightedDesign response_free_design(const HmmParams& params, const VisitCaps& caps,
                                    const EncodedDataset& data) {
  std::vector<VisitDistribution> posteriors;
  posteriors.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      posteriors.push_back(visit_distribution(params, caps, data.sequences[i]));
    } catch (const Error& e) {
      rethrow_with_context(e, "example " + std::to_string(i));
    }
  }
  return design_from_posteriors(posteriors, data.responses);
}

TrainedModel two_phase_train(const TrainConfig& config, const HmmTopology& topology,
                             const Dataset& train) {
  auto model = initial_model(config, topology, train, config.seed);
  model.meta.learner = Learner::kTwoPhase;
  const auto data = encode(train, config.alphabet);
  model = iterate(config, std::move(model), data, false);
  model.regression = response_free_regression(model.params, model.caps, data, config);
  return model;
}

std::uint64_t restart_seed(std::uint64_t master, int index) {
  return index == 0 ? master : derive_seed(master, static_cast<std::uint64_t>(index));
}

TrainedModel train_with_restarts(const TrainConfig& config, const HmmTopology& topology,
                                 const Dataset& train, const Dataset& tune,
                                 std::vector<RestartOutcome>* outcomes) {
  config.validate();
  if (tune.empty()) throw InvalidInput("tuning set is empty");
  std::optional<TrainedModel> best;
  std::string failures;
  for (int r = 0; r < config.restarts; ++r) {
    TrainConfig run = config;
    run.seed = restart_seed(config.seed, r);
    RestartOutcome outcome{r, run.seed, std::nullopt, {}};
    try {
      TrainedModel model = config.learner == Learner::kPathAggregate
                               ? em_train(run, topology, train)
                               : two_phase_train(run, topology, train);
      model.meta.restart = r;
      model.meta.tuning_mae = evaluate_mae(model, tune);
      outcome.tuning_mae = model.meta.tuning_mae;
      if (!best || *model.meta.tuning_mae < *best->meta.tuning_mae) best = std::move(model);
    } catch (const Error& e) {
      outcome.error = e.what();
      failures += "; restart " + std::to_string(r) + ": " + e.what();
    }
    if (outcomes != nullptr) outcomes->push_back(std::move(outcome));
  }
  if (!best) throw TrainingError("all restarts failed" + failures);
  return *std::move(best);
}

MeanBaseline mean_baseline(const Dataset& train) {
  if (train.empty()) throw InvalidInput("mean baseline needs at least one example");
  double total = 0.0;
  for (const auto& e : train.examples) total += e.response;
  return MeanBaseline{total / static_cast<double>(train.size())};
}

}  // namespace pathagg
