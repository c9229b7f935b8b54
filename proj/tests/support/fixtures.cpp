#include "fixtures.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace pathagg::testing {

HmmParams toy_a_params() {
  TopologySpec spec;
  spec.start = {1.0, 0.0};
  spec.successors = {{0, 1}, {0}};
  spec.counted = {1};
  HmmTopology topology(std::move(spec));
  return HmmParams(topology, Alphabet("ab"), {1.0, 0.0}, {{0.6, 0.4}, {1.0}},
                   {{0.8, 0.2}, {0.1, 0.9}});
}

VisitCaps toy_a_caps() { return VisitCaps({2}); }

RegressionParams toy_a_regression() {
  RegressionParams reg;
  reg.coefficients = {5.0};
  reg.sigma = 1.0;
  return reg;
}

namespace {

std::vector<double> random_row(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> row(n);
  for (double& p : row) p = u(rng);
  const double total = std::accumulate(row.begin(), row.end(), 0.0);
  for (double& p : row) p /= total;
  return row;
}

struct RandomModel {
  HmmParams params;
  VisitCaps caps;
  RegressionParams regression;
};

RandomModel random_model(Rng& rng) {
  std::uniform_int_distribution<int> states_dist(1, 4);
  std::uniform_int_distribution<int> alphabet_dist(2, 4);
  std::bernoulli_distribution coin(0.5);
  const auto n = static_cast<std::size_t>(states_dist(rng));
  const auto a = static_cast<std::size_t>(alphabet_dist(rng));

  TopologySpec spec;
  spec.successors.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      // A forward chain keeps every state reachable from state 0.
      if (t == s + 1 || coin(rng)) spec.successors[s].push_back(static_cast<StateIndex>(t));
    }
    if (spec.successors[s].empty()) spec.successors[s].push_back(0);
  }
  spec.start.assign(n, 0.0);
  std::vector<std::size_t> starters{0};
  for (std::size_t s = 1; s < n; ++s) {
    if (coin(rng)) starters.push_back(s);
  }
  const auto start_row = random_row(rng, starters.size());
  for (std::size_t j = 0; j < starters.size(); ++j) spec.start[starters[j]] = start_row[j];

  std::vector<StateIndex> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<std::size_t> counted_dist(0, std::min<std::size_t>(2, n));
  order.resize(counted_dist(rng));
  spec.counted = order;
  const std::vector<double> start = spec.start;
  HmmTopology topology(std::move(spec));

  std::vector<std::vector<double>> transition(n), emission(n);
  for (std::size_t s = 0; s < n; ++s) {
    transition[s] = random_row(rng, topology.successors(static_cast<StateIndex>(s)).size());
    emission[s] = random_row(rng, a);
  }
  std::string symbols = std::string("acgt").substr(0, a);

  std::uniform_int_distribution<int> cap_dist(1, 3);
  std::vector<int> caps(topology.counted_count());
  for (int& c : caps) c = cap_dist(rng);

  std::normal_distribution<double> coef(0.0, 2.0);
  std::uniform_real_distribution<double> sigma(0.5, 2.0);
  RegressionParams reg;
  reg.coefficients.resize(caps.size());
  for (double& b : reg.coefficients) b = coef(rng);
  if (coin(rng)) reg.intercept = coef(rng);
  reg.sigma = sigma(rng);

  return {HmmParams(topology, Alphabet(symbols), start, std::move(transition), std::move(emission)),
          VisitCaps(caps), reg};
}

std::vector<Symbol> random_sequence(Rng& rng, std::size_t alphabet_size, std::size_t length) {
  std::uniform_int_distribution<int> sym(0, static_cast<int>(alphabet_size) - 1);
  std::vector<Symbol> x(length);
  for (auto& c : x) c = static_cast<Symbol>(sym(rng));
  return x;
}

double random_response(Rng& rng, const RegressionParams& reg, const VisitCaps& caps) {
  // Centered near the range of predictions so conditioning matters.
  std::uniform_int_distribution<std::size_t> pick(0, caps.lattice_size() - 1);
  std::normal_distribution<double> noise(0.0, reg.sigma);
  return predict_mean(reg, caps.visits_at(pick(rng))) + noise(rng);
}

}  // namespace

RandomInstance random_instance(Rng& rng) {
  auto model = random_model(rng);
  std::uniform_int_distribution<std::size_t> len(1, 8);
  auto x = random_sequence(rng, model.params.alphabet().size(), len(rng));
  const double y = random_response(rng, model.regression, model.caps);
  return {std::move(model.params), std::move(model.caps), std::move(model.regression), std::move(x),
          y};
}

RandomProblem random_problem(Rng& rng, std::size_t count, std::size_t max_length) {
  auto model = random_model(rng);
  RandomProblem p{
      std::move(model.params), std::move(model.caps), std::move(model.regression), {}, {}};
  std::uniform_int_distribution<std::size_t> len(1, max_length);
  for (std::size_t i = 0; i < count; ++i) {
    p.sequences.push_back(random_sequence(rng, p.params.alphabet().size(), len(rng)));
    p.responses.push_back(random_response(rng, p.regression, p.caps));
  }
  return p;
}

}  // namespace pathagg::testing
