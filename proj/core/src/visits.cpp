#include "pathagg/visits.hpp"

#include <limits>

#include "pathagg/error.hpp"

namespace pathagg {

VisitCaps::VisitCaps(std::vector<int> caps) : caps_(std::move(caps)) {
  strides_.reserve(caps_.size());
  std::size_t size = 1;
  for (int h : caps_) {
    if (h < 1) throw InvalidConfiguration("visit caps must be >= 1");
    strides_.push_back(size);
    auto radix = static_cast<std::size_t>(h) + 1;
    if (size > std::numeric_limits<std::size_t>::max() / radix) {
      overflowed_ = true;
      size = std::numeric_limits<std::size_t>::max();
    } else if (!overflowed_) {
      size *= radix;
    }
  }
  lattice_size_ = size;
}

std::size_t VisitCaps::index_of(std::span<const int> visits) const {
  if (visits.size() != caps_.size()) {
    throw InvalidInput("visit vector has dimension " + std::to_string(visits.size()) +
                       ", expected " + std::to_string(caps_.size()));
  }
  std::size_t index = 0;
  for (std::size_t k = 0; k < caps_.size(); ++k) {
    if (visits[k] < 0 || visits[k] > caps_[k]) {
      throw InvalidInput("visit count outside cap");
    }
    index += static_cast<std::size_t>(visits[k]) * strides_[k];
  }
  return index;
}

VisitVector VisitCaps::visits_at(std::size_t index) const {
  VisitVector v(caps_.size());
  for (std::size_t k = 0; k < caps_.size(); ++k) v[k] = component(index, k);
  return v;
}

VisitDistribution::VisitDistribution(VisitCaps caps, std::vector<double> probabilities,
                                     double log_normalizer)
    : caps_(std::move(caps)),
      probabilities_(std::move(probabilities)),
      log_normalizer_(log_normalizer) {
  if (probabilities_.size() != caps_.lattice_size()) {
    throw InvalidInput("visit distribution size does not match caps");
  }
}

VisitDistribution VisitDistribution::point_mass(VisitCaps caps, std::span<const int> visits) {
  std::vector<double> p(caps.lattice_size(), 0.0);
  p[caps.index_of(visits)] = 1.0;
  return VisitDistribution(std::move(caps), std::move(p));
}

std::vector<std::pair<std::size_t, double>> VisitDistribution::support() const {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 0; i < probabilities_.size(); ++i) {
    if (probabilities_[i] > 0.0) out.emplace_back(i, probabilities_[i]);
  }
  return out;
}

std::vector<double> VisitDistribution::mean() const {
  std::vector<double> m(caps_.dimension(), 0.0);
  for (std::size_t i = 0; i < probabilities_.size(); ++i) {
    double p = probabilities_[i];
    if (p == 0.0) continue;
    for (std::size_t k = 0; k < m.size(); ++k) m[k] += p * caps_.component(i, k);
  }
  return m;
}

double VisitDistribution::total() const {
  double t = 0.0;
  for (double p : probabilities_) t += p;
  return t;
}

}  // namespace pathagg
