#pragma once

#include <span>
#include <string_view>

#include "pathagg/dataset.hpp"
#include "pathagg/training.hpp"

namespace pathagg {

// Viterbi decode, then predict_mean on the decoded visit vector.
double predict(const TrainedModel& model, std::span<const Symbol> x);
double predict(const TrainedModel& model, std::string_view sequence);

// Mean absolute error over a non-empty dataset.
double evaluate_mae(const TrainedModel& model, const Dataset& test);
double evaluate_mae(const MeanBaseline& baseline, const Dataset& test);

}  // namespace pathagg
