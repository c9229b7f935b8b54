#include "pathagg/predict.hpp"

#include <cmath>

#include "pathagg/error.hpp"

namespace pathagg {

double predict(const TrainedModel& model, std::span<const Symbol> x) {
  const auto decoded = viterbi_decode(model.params, model.caps, x);
  return predict_mean(model.regression, std::span<const int>(decoded.visits));
}

double predict(const TrainedModel& model, std::string_view sequence) {
  return predict(model, model.params.alphabet().encode(sequence));
}

double evaluate_mae(const TrainedModel& model, const Dataset& test) {
  if (test.empty()) throw InvalidInput("test set is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& e = test.examples[i];
    try {
      total += std::abs(e.response - predict(model, e.sequence));
    } catch (const Error& err) {
      rethrow_with_context(err, "example " + std::to_string(i));
    }
  }
  return total / static_cast<double>(test.size());
}

double evaluate_mae(const MeanBaseline& baseline, const Dataset& test) {
  if (test.empty()) throw InvalidInput("test set is empty");
  double total = 0.0;
  for (const auto& e : test.examples) total += std::abs(e.response - baseline.predict());
  return total / static_cast<double>(test.size());
}

}  // namespace pathagg
