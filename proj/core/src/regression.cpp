#include "pathagg/regression.hpp"

#include <cmath>
#include <numbers>

#include "pathagg/error.hpp"

namespace pathagg {

namespace {

constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

void check_dimension(const RegressionParams& reg, std::size_t n) {
  if (reg.coefficients.size() != n) {
    throw InvalidInput("visit vector has dimension " + std::to_string(n) + ", regression expects " +
                       std::to_string(reg.coefficients.size()));
  }
}

// Accumulates the weighted normal equations for a design whose rows are
// [1?, v...].
struct NormalEquations {
  std::size_t p;
  std::size_t offset;
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::vector<double> row;

  NormalEquations(std::size_t dim, bool intercept)
      : p(dim + (intercept ? 1 : 0)),
        offset(intercept ? 1 : 0),
        lhs(p * p, 0.0),
        rhs(p, 0.0),
        row(p, 1.0) {}

  void add(std::span<const double> visits, double y, double w) {
    for (std::size_t k = 0; k < visits.size(); ++k) row[offset + k] = visits[k];
    for (std::size_t i = 0; i < p; ++i) {
      const double wi = w * row[i];
      rhs[i] += wi * y;
      for (std::size_t j = 0; j <= i; ++j) lhs[i * p + j] += wi * row[j];
    }
  }

  RegressionParams solve() {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < i; ++j) lhs[j * p + i] = lhs[i * p + j];
      lhs[i * p + i] += kRidge;
    }
    std::vector<double> beta = solve_spd(lhs, rhs);
    RegressionParams reg;
    if (offset == 1) reg.intercept = beta[0];
    reg.coefficients.assign(beta.begin() + static_cast<std::ptrdiff_t>(offset), beta.end());
    return reg;
  }
};

}  // namespace

void RegressionParams::validate() const {
  if (!std::isfinite(sigma) || sigma < kSigmaFloor) {
    throw InvalidConfiguration("regression sigma " + std::to_string(sigma) +
                               " is below the floor 1e-6");
  }
  for (double b : coefficients) {
    if (!std::isfinite(b)) throw InvalidConfiguration("non-finite regression coefficient");
  }
  if (intercept && !std::isfinite(*intercept)) {
    throw InvalidConfiguration("non-finite regression intercept");
  }
}

double predict_mean(const RegressionParams& reg, std::span<const double> visits) {
  check_dimension(reg, visits.size());
  double y = reg.intercept_or_zero();
  for (std::size_t k = 0; k < visits.size(); ++k) y += reg.coefficients[k] * visits[k];
  return y;
}

double predict_mean(const RegressionParams& reg, std::span<const int> visits) {
  check_dimension(reg, visits.size());
  double y = reg.intercept_or_zero();
  for (std::size_t k = 0; k < visits.size(); ++k) y += reg.coefficients[k] * visits[k];
  return y;
}

double log_predict_density(const RegressionParams& reg, std::span<const int> visits, double y) {
  const double r = (y - predict_mean(reg, visits)) / reg.sigma;
  return -0.5 * r * r - std::log(reg.sigma) - kLogSqrtTwoPi;
}

double predict_density(const RegressionParams& reg, std::span<const int> visits, double y) {
  return std::exp(log_predict_density(reg, visits, y));
}

double marginal_response_density(const RegressionParams& reg, const VisitDistribution& dist,
                                 double y) {
  double total = 0.0;
  for (const auto& [index, p] : dist.support()) {
    total += p * predict_density(reg, dist.caps().visits_at(index), y);
  }
  return total;
}

std::size_t WeightedDesign::dimension() const {
  return rows.empty() ? 0 : rows.front().visits.size();
}

WeightedDesign design_from_posteriors(std::span<const VisitDistribution> posteriors,
                                      std::span<const double> responses) {
  if (posteriors.size() != responses.size()) {
    throw InvalidInput("posterior and response counts differ");
  }
  WeightedDesign design;
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const auto& caps = posteriors[i].caps();
    for (const auto& [index, p] : posteriors[i].support()) {
      DesignRow row;
      row.visits.resize(caps.dimension());
      for (std::size_t k = 0; k < caps.dimension(); ++k) row.visits[k] = caps.component(index, k);
      row.response = responses[i];
      row.weight = p;
      design.rows.push_back(std::move(row));
    }
  }
  return design;
}

RegressionParams fit_weighted(const WeightedDesign& design, bool use_intercept) {
  const std::size_t dim = design.dimension();
  NormalEquations eq(dim, use_intercept);
  double total_weight = 0.0;
  for (const auto& row : design.rows) {
    if (row.visits.size() != dim) throw InvalidInput("design rows differ in dimension");
    if (!(row.weight >= 0.0)) throw InvalidInput("negative design weight");
    if (row.weight == 0.0) continue;
    eq.add(row.visits, row.response, row.weight);
    total_weight += row.weight;
  }
  if (total_weight <= 0.0) throw InvalidInput("design has no row with positive weight");
  RegressionParams reg = eq.solve();
  const double mse = weighted_squared_error(design, reg) / total_weight;
  reg.sigma = std::max(std::sqrt(mse), kSigmaFloor);
  return reg;
}

RegressionParams fit_expected(std::span<const ExpectedVisitRow> rows, bool use_intercept) {
  if (rows.empty()) throw InvalidInput("no expected-visit rows to fit");
  const std::size_t dim = rows.front().expected_visits.size();
  NormalEquations eq(dim, use_intercept);
  for (const auto& row : rows) {
    if (row.expected_visits.size() != dim) throw InvalidInput("rows differ in dimension");
    eq.add(row.expected_visits, row.response, 1.0);
  }
  RegressionParams reg = eq.solve();
  double sse = 0.0;
  for (const auto& row : rows) {
    const double r = row.response - predict_mean(reg, std::span<const double>(row.expected_visits));
    sse += r * r;
  }
  reg.sigma = std::max(std::sqrt(sse / static_cast<double>(rows.size())), kSigmaFloor);
  return reg;
}

double weighted_squared_error(const WeightedDesign& design, const RegressionParams& reg) {
  double total = 0.0;
  for (const auto& row : design.rows) {
    if (row.weight == 0.0) continue;
    const double r = row.response - predict_mean(reg, std::span<const double>(row.visits));
    total += row.weight * r * r;
  }
  return total;
}

std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  if (a.size() != n * n) throw InvalidInput("matrix and right-hand side sizes differ");
  // In-place lower Cholesky factor.
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) throw InvalidInput("normal equations are not positive definite");
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / d;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
    b[i] = s / a[i * n + i];
  }
  return b;
}

}  // namespace pathagg
