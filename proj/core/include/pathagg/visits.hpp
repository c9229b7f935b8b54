#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace pathagg {

using VisitVector = std::vector<int>;

// Per-counted-state visit caps. Visit vectors are flattened to a
// mixed-radix index in [0, lattice_size()), first counted state fastest.
class VisitCaps {
 public:
  VisitCaps() = default;
  explicit VisitCaps(std::vector<int> caps);

  std::size_t dimension() const noexcept { return caps_.size(); }
  const std::vector<int>& caps() const noexcept { return caps_; }
  int cap(std::size_t k) const { return caps_.at(k); }

  // Product of (cap + 1); saturates at SIZE_MAX when it would overflow.
  std::size_t lattice_size() const noexcept { return lattice_size_; }
  bool overflowed() const noexcept { return overflowed_; }

  std::size_t stride(std::size_t k) const { return strides_.at(k); }
  std::size_t index_of(std::span<const int> visits) const;
  VisitVector visits_at(std::size_t index) const;
  int component(std::size_t index, std::size_t k) const {
    return static_cast<int>((index / strides_[k]) % static_cast<std::size_t>(caps_[k] + 1));
  }
  // Index after one more visit to counted state k, saturating at the cap.
  std::size_t increment(std::size_t index, std::size_t k) const {
    return component(index, k) < caps_[k] ? index + strides_[k] : index;
  }

  bool operator==(const VisitCaps& other) const noexcept { return caps_ == other.caps_; }

 private:
  std::vector<int> caps_;
  std::vector<std::size_t> strides_;
  std::size_t lattice_size_ = 1;
  bool overflowed_ = false;
};

// Probability mass over visit vectors for one sequence, dense over the
// lattice index. `log_normalizer` is log Z, the response-conditioning
// constant log p(y | x); zero when the distribution is response-free.
class VisitDistribution {
 public:
  VisitDistribution() = default;
  VisitDistribution(VisitCaps caps, std::vector<double> probabilities, double log_normalizer = 0.0);

  // Point mass on a single visit vector.
  static VisitDistribution point_mass(VisitCaps caps, std::span<const int> visits);

  const VisitCaps& caps() const noexcept { return caps_; }
  std::size_t size() const noexcept { return probabilities_.size(); }
  double probability(std::size_t index) const { return probabilities_.at(index); }
  double probability(std::span<const int> visits) const {
    return probabilities_.at(caps_.index_of(visits));
  }
  const std::vector<double>& probabilities() const noexcept { return probabilities_; }
  double log_normalizer() const noexcept { return log_normalizer_; }

  // (index, probability) for every strictly positive entry, in index order.
  std::vector<std::pair<std::size_t, double>> support() const;
  std::vector<double> mean() const;
  double total() const;

 private:
  VisitCaps caps_;
  std::vector<double> probabilities_;
  double log_normalizer_ = 0.0;
};

}  // namespace pathagg
