#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pathagg::testing {

std::vector<EnumeratedPath> enumerate_paths(const HmmParams& params, const VisitCaps& caps,
                                            std::span<const Symbol> x) {
  const auto& topology = params.topology();
  const std::size_t n = topology.state_count();
  const std::size_t len = x.size();
  std::vector<EnumeratedPath> out;
  std::vector<StateIndex> states(len, 0);
  // Odometer over n^len paths, last position fastest, so paths come out in
  // lexicographic order.
  while (true) {
    double p = params.start()[static_cast<std::size_t>(states[0])] *
               params.emission_probability(states[0], x[0]);
    for (std::size_t i = 1; i < len && p > 0.0; ++i) {
      p *= params.transition_probability(states[i - 1], states[i]) *
           params.emission_probability(states[i], x[i]);
    }
    if (p > 0.0) {
      EnumeratedPath e;
      e.path.states = states;
      e.probability = p;
      e.visit_index = caps.index_of(path_to_counts(e.path, topology, caps));
      out.push_back(std::move(e));
    }
    std::size_t i = len;
    while (i > 0) {
      --i;
      if (static_cast<std::size_t>(++states[i]) < n) break;
      states[i] = 0;
      if (i == 0) return out;
    }
  }
}

namespace {

std::vector<double> mean_of(const VisitCaps& caps, const std::vector<double>& p) {
  std::vector<double> m(caps.dimension(), 0.0);
  for (std::size_t v = 0; v < p.size(); ++v) {
    for (std::size_t k = 0; k < caps.dimension(); ++k) m[k] += p[v] * caps.component(v, k);
  }
  return m;
}

}  // namespace

OracleResult oracle(const HmmParams& params, const VisitCaps& caps, std::span<const Symbol> x,
                    const RegressionParams* regression, double y) {
  const auto paths = enumerate_paths(params, caps, x);
  const auto& topology = params.topology();
  OracleResult r;
  r.visits.assign(caps.lattice_size(), 0.0);
  // Path weights in log space, so sharp response densities that underflow
  // on their own still normalize correctly.
  std::vector<double> log_weight(paths.size(), -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < paths.size(); ++j) {
    const auto& e = paths[j];
    r.likelihood += e.probability;
    r.visits[e.visit_index] += e.probability;
    if (e.probability > 0.0) {
      log_weight[j] = std::log(e.probability);
      if (regression != nullptr) {
        log_weight[j] += log_predict_density(*regression, caps.visits_at(e.visit_index), y);
      }
    }
    top = std::max(top, log_weight[j]);
    if (e.probability > r.best_probability) {
      r.best_probability = e.probability;
      r.best_path = e.path;
    }
  }
  std::vector<double> weight(paths.size(), 0.0);
  double scaled_evidence = 0.0;
  for (std::size_t j = 0; j < paths.size(); ++j) {
    if (log_weight[j] == -std::numeric_limits<double>::infinity()) continue;
    weight[j] = std::exp(log_weight[j] - top);
    scaled_evidence += weight[j];
  }
  r.log_evidence = top + std::log(scaled_evidence);
  r.evidence = std::exp(r.log_evidence);
  for (double& w : weight) w /= scaled_evidence;
  for (double& p : r.visits) p /= r.likelihood;
  r.mean = mean_of(caps, r.visits);
  if (regression != nullptr) {
    r.conditioned.assign(caps.lattice_size(), 0.0);
    for (std::size_t j = 0; j < paths.size(); ++j) {
      r.conditioned[paths[j].visit_index] += weight[j];
    }
    r.conditioned_mean = mean_of(caps, r.conditioned);
  }
  r.transition_counts.resize(topology.state_count());
  for (std::size_t s = 0; s < topology.state_count(); ++s) {
    r.transition_counts[s].assign(topology.successors(static_cast<StateIndex>(s)).size(), 0.0);
  }
  for (std::size_t j = 0; j < paths.size(); ++j) {
    const auto& states = paths[j].path.states;
    for (std::size_t i = 0; i + 1 < states.size(); ++i) {
      const auto& succ = topology.successors(states[i]);
      for (std::size_t k = 0; k < succ.size(); ++k) {
        if (succ[k] == states[i + 1]) {
          r.transition_counts[static_cast<std::size_t>(states[i])][k] += weight[j];
        }
      }
    }
  }
  return r;
}

}  // namespace pathagg::testing
