#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pathagg/dataset.hpp"
#include "pathagg/model.hpp"
#include "pathagg/regression.hpp"
#include "pathagg/visits.hpp"

namespace pathagg {

inline constexpr std::size_t kDefaultLatticeBudget = 4096;

struct InferenceOptions {
  // Largest visit lattice handled exactly; above it, inference falls back
  // to expected visits from plain state posteriors.
  std::size_t lattice_budget = kDefaultLatticeBudget;
};

bool exceeds_budget(const VisitCaps& caps, const InferenceOptions& options);

// Observed response used to condition the backward base case on p(y | v).
struct Response {
  double y = 0.0;
  RegressionParams regression;
};

// Forward/backward tables over (position, state, visit index). Each
// (position, visit index) slice stores mantissas together with one log
// scale, so log_forward(i, s, v) = log(mantissa) + scale. When slices too
// far apart in scale meet, both tables are kept per cell in log space
// instead. Positions are 0-based.
class VisitLattice {
 public:
  std::size_t length() const noexcept { return length_; }
  std::size_t state_count() const noexcept { return states_; }
  std::size_t visit_count() const noexcept { return visits_; }
  const VisitCaps& caps() const noexcept { return caps_; }
  bool has_forward() const noexcept { return !fwd_.empty(); }
  bool has_backward() const noexcept { return !bwd_.empty(); }

  // log P(x_0..x_i, S_i = s, V_i = v).
  double log_forward(std::size_t i, StateIndex s, std::size_t v) const;
  // log P(x_{i+1}.. [, y] | S_i = s, V_i = v).
  double log_backward(std::size_t i, StateIndex s, std::size_t v) const;

  // log P(x).
  double log_sequence_likelihood() const noexcept { return log_likelihood_; }
  // log P(x, y) when the backward pass was response-conditioned, else log P(x).
  double log_evidence() const noexcept { return log_evidence_; }

 private:
  friend class LatticeEngine;

  std::size_t length_ = 0;
  std::size_t states_ = 0;
  std::size_t visits_ = 0;
  VisitCaps caps_;
  std::vector<double> fwd_;
  std::vector<double> fwd_scale_;
  std::vector<double> bwd_;
  std::vector<double> bwd_scale_;
  double log_likelihood_ = 0.0;
  double log_evidence_ = 0.0;
  bool log_space_ = false;
};

// Throw InvalidInput for empty input or symbols outside the alphabet.
VisitLattice forward(const HmmParams& params, const VisitCaps& caps, std::span<const Symbol> x);
VisitLattice backward(const HmmParams& params, const VisitCaps& caps, std::span<const Symbol> x,
                      const std::optional<Response>& response = std::nullopt);
VisitLattice forward_backward(const HmmParams& params, const VisitCaps& caps,
                              std::span<const Symbol> x,
                              const std::optional<Response>& response = std::nullopt);

// P(v | x), or P(v | x, y) when a response is given.
VisitDistribution visit_distribution(const HmmParams& params, const VisitCaps& caps,
                                     std::span<const Symbol> x,
                                     const std::optional<Response>& response = std::nullopt);

// Mean visit vector. Exact over the lattice within budget; otherwise the
// uncapped expectation from plain state posteriors given x alone.
std::vector<double> expected_visits(const HmmParams& params, const VisitCaps& caps,
                                    std::span<const Symbol> x,
                                    const std::optional<Response>& response = std::nullopt,
                                    const InferenceOptions& options = {});

struct ViterbiResult {
  StatePath path;
  VisitVector visits;
  double log_probability = 0.0;
};

// Most probable state path. Among equally probable paths the
// lexicographically smallest state sequence is returned. Throws
// DecodeFailure when no path has positive probability.
ViterbiResult viterbi_decode(const HmmParams& params, const VisitCaps& caps,
                             std::span<const Symbol> x);

struct SufficientStats {
  std::vector<double> start;
  // transition[s][j] is the expected count of successors(s)[j] moves.
  std::vector<std::vector<double>> transition;
  std::vector<std::vector<double>> emission;
  // Response-conditioned when a regression was supplied; one per example.
  std::vector<VisitDistribution> visit_posteriors;
  // Only filled in expected-visits fallback mode.
  std::vector<std::vector<double>> expected_visits;
  std::vector<double> responses;
  // Sum of per-example log evidence.
  double log_objective = 0.0;
  bool expected_visits_fallback = false;

  static SufficientStats zeros(const HmmTopology& topology, std::size_t alphabet_size);
  SufficientStats& operator+=(const SufficientStats& other);
};

// E-step over a dataset. With a regression the backward base case is
// p(y | v) (path-aggregate training); without one it is the standard
// Baum-Welch E-step. Errors name the offending example.
SufficientStats e_step_stats(const HmmParams& params, const VisitCaps& caps,
                             const EncodedDataset& data, const RegressionParams* regression,
                             const InferenceOptions& options = {});

// Sum over examples of log sum_s P(s) P(x | s) p(y | delta(s)). Examples
// with zero evidence make the result -inf; their indices are reported
// through `zero_evidence` when given.
double joint_objective(const HmmParams& params, const VisitCaps& caps,
                       const RegressionParams& regression, const EncodedDataset& data,
                       std::vector<std::size_t>* zero_evidence = nullptr);

}  // namespace pathagg
