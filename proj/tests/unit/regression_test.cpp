#include "pathagg/regression.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pathagg/error.hpp"

namespace pathagg {
namespace {

RegressionParams make(std::vector<double> beta, std::optional<double> b0, double sigma = 1.0) {
  RegressionParams r;
  r.coefficients = std::move(beta);
  r.intercept = b0;
  r.sigma = sigma;
  return r;
}

TEST(PredictTest, MeanExamples) {
  EXPECT_DOUBLE_EQ(predict_mean(make({3, 6}, std::nullopt), std::vector<int>{1, 1}), 9.0);
  EXPECT_DOUBLE_EQ(predict_mean(make({7, 3}, -2.0), std::vector<int>{1, 1}), 8.0);
  EXPECT_DOUBLE_EQ(predict_mean(make({0, 0}, 4.5), std::vector<int>{3, 2}), 4.5);
  EXPECT_THROW(predict_mean(make({1}, std::nullopt), std::vector<int>{1, 1}), InvalidInput);
}

TEST(PredictTest, DensityExamples) {
  const auto r = make({5}, std::nullopt);
  EXPECT_NEAR(predict_density(r, std::vector<int>{1}, 5.0), 1.0 / std::sqrt(2 * std::numbers::pi),
              1e-15);
  EXPECT_NEAR(predict_density(r, std::vector<int>{0}, 5.0), 1.4867e-6, 1e-10);
  const auto wide = make({5}, std::nullopt, 2.0);
  EXPECT_NEAR(predict_density(wide, std::vector<int>{1}, 5.0),
              0.5 * predict_density(r, std::vector<int>{1}, 5.0), 1e-15);
}

TEST(MarginalDensityTest, ToyAMixture) {
  const auto r = make({5}, std::nullopt);
  VisitDistribution dist(VisitCaps({2}), {0.25, 0.75, 0.0});
  EXPECT_NEAR(marginal_response_density(r, dist, 5.0), 0.29921, 1e-5);
  const auto point = VisitDistribution::point_mass(VisitCaps({2}), std::vector<int>{2});
  EXPECT_DOUBLE_EQ(marginal_response_density(r, point, 7.0),
                   predict_density(r, std::vector<int>{2}, 7.0));
}

TEST(MarginalDensityTest, IntegratesToOne) {
  const auto r = make({2, -1}, 0.5, 0.7);
  VisitDistribution dist(VisitCaps({1, 2}), {0.1, 0.2, 0.3, 0.1, 0.2, 0.1});
  double total = 0.0;
  const double h = 1e-3;
  for (double y = -15.0; y <= 15.0; y += h) total += marginal_response_density(r, dist, y) * h;
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(FitWeightedTest, ExactInterpolation) {
  WeightedDesign d{{{{1.0}, 7.0, 1.0}, {{0.0}, 0.0, 1.0}}};
  const auto r = fit_weighted(d, false);
  EXPECT_NEAR(r.coefficients[0], 7.0, 1e-7);
  EXPECT_FALSE(r.intercept);
}

TEST(FitWeightedTest, HandSolvedExample) {
  WeightedDesign d{{{{1.0}, 5.0, 1.0}, {{0.0}, 0.0, 0.5}, {{1.0}, 0.0, 0.5}}};
  const auto r = fit_weighted(d, false);
  EXPECT_NEAR(r.coefficients[0], 10.0 / 3.0, 1e-7);
  EXPECT_NEAR(r.sigma, std::sqrt(25.0 / 6.0), 1e-7);
  EXPECT_NEAR(r.sigma, 2.0412, 1e-4);
}

TEST(FitWeightedTest, DuplicatedHalvedRowsGiveSameFit) {
  WeightedDesign d{{{{1.0, 0.0}, 5.0, 1.0},
                    {{0.0, 1.0}, 2.0, 0.4},
                    {{1.0, 1.0}, 6.5, 0.6},
                    {{0.0, 0.0}, -1.0, 0.3}}};
  WeightedDesign twice;
  for (auto row : d.rows) {
    row.weight /= 2;
    twice.rows.push_back(row);
    twice.rows.push_back(row);
  }
  const auto a = fit_weighted(d, true);
  const auto b = fit_weighted(twice, true);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(a.coefficients[k], b.coefficients[k], 1e-9);
  EXPECT_NEAR(*a.intercept, *b.intercept, 1e-9);
  EXPECT_NEAR(a.sigma, b.sigma, 1e-9);
}

TEST(FitWeightedTest, RejectsZeroWeights) {
  WeightedDesign d{{{{1.0}, 5.0, 0.0}}};
  EXPECT_THROW(fit_weighted(d, false), InvalidInput);
}

TEST(FitWeightedTest, NeverVisitedStateStaysSolvable) {
  WeightedDesign d{{{{1.0, 0.0}, 3.0, 1.0}, {{2.0, 0.0}, 6.0, 1.0}}};
  const auto r = fit_weighted(d, true);
  EXPECT_NEAR(r.coefficients[1], 0.0, 1e-6);
  EXPECT_GE(r.sigma, kSigmaFloor);
}

TEST(FitExpectedTest, Examples) {
  std::vector<ExpectedVisitRow> rows{{{0.5}, 4.0}, {{1.0}, 8.0}};
  EXPECT_NEAR(fit_expected(rows, false).coefficients[0], 8.0, 1e-7);
  EXPECT_THROW(fit_expected(std::vector<ExpectedVisitRow>{}, false), InvalidInput);
}

TEST(DesignTest, RowsFromPosteriorsDropZeroWeights) {
  std::vector<VisitDistribution> post{VisitDistribution(VisitCaps({2}), {0.25, 0.75, 0.0})};
  std::vector<double> y{5.0};
  const auto d = design_from_posteriors(post, y);
  ASSERT_EQ(d.rows.size(), 2u);
  EXPECT_EQ(d.rows[1].visits, std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(d.rows[1].weight, 0.75);
}

TEST(RegressionParamsTest, SigmaFloorEnforced) {
  EXPECT_THROW(make({1}, std::nullopt, 0.0).validate(), InvalidConfiguration);
  EXPECT_NO_THROW(make({1}, std::nullopt, 1e-6).validate());
}

TEST(SolveSpdTest, RejectsIndefinite) {
  EXPECT_THROW(solve_spd({1, 2, 2, 1}, {1, 1}), InvalidInput);
  const auto x = solve_spd({4, 2, 2, 3}, {2, 1});
  EXPECT_NEAR(4 * x[0] + 2 * x[1], 2.0, 1e-14);
  EXPECT_NEAR(2 * x[0] + 3 * x[1], 1.0, 1e-14);
}

}  // namespace
}  // namespace pathagg
