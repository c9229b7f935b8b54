#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pathagg/visits.hpp"

namespace pathagg {

inline constexpr double kSigmaFloor = 1e-6;
// Added to the normal-equation diagonal; keeps the system solvable when a
// counted state is never visited.
inline constexpr double kRidge = 1e-8;

// Linear Gaussian response: y ~ N(intercept + coefficients . v, sigma^2).
struct RegressionParams {
  std::vector<double> coefficients;
  std::optional<double> intercept;
  double sigma = 1.0;

  std::size_t dimension() const noexcept { return coefficients.size(); }
  double intercept_or_zero() const noexcept { return intercept.value_or(0.0); }

  // Throws InvalidConfiguration when sigma is below the floor or a value is
  // not finite.
  void validate() const;

  bool operator==(const RegressionParams&) const = default;
};

double predict_mean(const RegressionParams& reg, std::span<const double> visits);
double predict_mean(const RegressionParams& reg, std::span<const int> visits);

double log_predict_density(const RegressionParams& reg, std::span<const int> visits, double y);
double predict_density(const RegressionParams& reg, std::span<const int> visits, double y);

// Mixture over the distribution's support of the per-vector densities.
double marginal_response_density(const RegressionParams& reg, const VisitDistribution& dist,
                                 double y);

struct DesignRow {
  std::vector<double> visits;
  double response = 0.0;
  double weight = 1.0;
};

struct WeightedDesign {
  std::vector<DesignRow> rows;

  std::size_t dimension() const;
};

// Rows (v, y_i, P(v | ...)) for every positive-probability v of each
// example. Zero-weight rows are dropped; they do not change the fit.
WeightedDesign design_from_posteriors(std::span<const VisitDistribution> posteriors,
                                      std::span<const double> responses);

// Minimizes sum w (y - b0 - beta . v)^2 via ridge-stabilized normal
// equations; sigma^2 is the weighted mean squared residual (floored).
RegressionParams fit_weighted(const WeightedDesign& design, bool use_intercept);

struct ExpectedVisitRow {
  std::vector<double> expected_visits;
  double response = 0.0;
};

// Ordinary least squares on expected-visit rows.
RegressionParams fit_expected(std::span<const ExpectedVisitRow> rows, bool use_intercept);

// Sum of w (y - prediction)^2 over the design.
double weighted_squared_error(const WeightedDesign& design, const RegressionParams& reg);

// Cholesky solve of a symmetric positive definite system, row-major.
// Throws InvalidInput if the matrix is not positive definite.
std::vector<double> solve_spd(std::vector<double> matrix, std::vector<double> rhs);

}  // namespace pathagg
