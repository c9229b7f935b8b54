#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pathagg/alphabet.hpp"
#include "pathagg/dataset.hpp"
#include "pathagg/visits.hpp"

namespace pathagg {

using StateIndex = int;

// Additive pseudocount used wherever probabilities are estimated or
// initialized from counts.
inline constexpr double kPseudocount = 0.01;
// Row-sum tolerance for every probability vector.
inline constexpr double kRowSumTolerance = 1e-12;

enum class StateRole { kBackground, kMotif, kMarker };

struct StateLabel {
  StateRole role = StateRole::kBackground;
  int motif = -1;     // motif id for kMotif states
  int position = -1;  // 0-based column within the motif
  int branch = -1;    // arrangement branch, -1 for the occurrence template

  bool operator==(const StateLabel&) const = default;
};

enum class TemplateKind { kOccurrence, kArrangement, kCustom };

std::string_view to_string(TemplateKind kind);
TemplateKind template_kind_from_string(std::string_view name);

// Everything needed to describe a topology's origin; used by structure
// search to grow it.
struct TemplateInfo {
  TemplateKind kind = TemplateKind::kCustom;
  int motif_count = 0;
  int motif_width = 0;

  bool operator==(const TemplateInfo&) const = default;
};

struct TopologySpec {
  std::vector<double> start;
  std::vector<std::vector<StateIndex>> successors;
  std::vector<StateIndex> counted;
  std::vector<StateLabel> labels;
  // States in the same group share one emission distribution. Empty means
  // every state is its own group.
  std::vector<int> emission_groups;
  TemplateInfo info;
};

// State graph plus the counted-state designation. Validated on construction
// and immutable afterwards.
class HmmTopology {
 public:
  explicit HmmTopology(TopologySpec spec);

  std::size_t state_count() const noexcept { return successors_.size(); }
  const std::vector<double>& start_distribution() const noexcept { return start_; }
  // Sorted, duplicate-free successor list of each state.
  const std::vector<StateIndex>& successors(StateIndex s) const {
    return successors_.at(static_cast<std::size_t>(s));
  }
  const std::vector<std::vector<StateIndex>>& all_successors() const noexcept {
    return successors_;
  }
  bool allows(StateIndex from, StateIndex to) const;
  std::size_t transition_count() const noexcept { return transition_count_; }

  const std::vector<StateIndex>& counted_states() const noexcept { return counted_; }
  std::size_t counted_count() const noexcept { return counted_.size(); }
  // Position of `s` in the counted list, or -1.
  int counted_slot(StateIndex s) const { return counted_slot_.at(static_cast<std::size_t>(s)); }

  const std::vector<StateLabel>& labels() const noexcept { return labels_; }
  const StateLabel& label(StateIndex s) const { return labels_.at(static_cast<std::size_t>(s)); }

  int emission_group(StateIndex s) const { return groups_.at(static_cast<std::size_t>(s)); }
  const std::vector<int>& emission_groups() const noexcept { return groups_; }
  std::size_t emission_group_count() const noexcept { return group_count_; }

  // Whether `s` lies on a directed cycle.
  bool on_cycle(StateIndex s) const { return on_cycle_.at(static_cast<std::size_t>(s)); }

  const TemplateInfo& info() const noexcept { return info_; }

  bool operator==(const HmmTopology& other) const noexcept;

 private:
  std::vector<double> start_;
  std::vector<std::vector<StateIndex>> successors_;
  std::vector<StateIndex> counted_;
  std::vector<int> counted_slot_;
  std::vector<StateLabel> labels_;
  std::vector<int> groups_;
  std::size_t group_count_ = 0;
  std::vector<bool> on_cycle_;
  std::size_t transition_count_ = 0;
  TemplateInfo info_;
};

// Background state 0 with a self-transition; per motif a left-to-right
// chain of `motif_width` states entered from and returning to background.
// The last state of each chain is counted. Starts in background.
HmmTopology build_occurrence_topology(int motif_count, int motif_width, const Alphabet& alphabet);

// One disjoint branch per motif combination (absence, each single motif,
// and for two motifs both orders). Every branch opens with a counted
// marker state that emits background and is visited exactly once, so
// each path's visit vector is the indicator of its branch. Motif chains
// are separated and flanked by self-looping background states; motif
// columns and all background-emitting states share emission groups across
// branches.
HmmTopology build_arrangement_topology(int motif_count, int motif_width, const Alphabet& alphabet);

// Build the given template; dispatches to the two builders above.
HmmTopology build_topology(TemplateKind kind, int motif_count, int motif_width,
                           const Alphabet& alphabet);

// Caps per counted state: `cycle_cap` for states on a cycle, 1 otherwise
// (a cycle-free state cannot be visited twice).
VisitCaps default_caps(const HmmTopology& topology, int cycle_cap);

// Transition, emission, and start probabilities over a topology.
class HmmParams {
 public:
  // transition[s][j] is the probability of moving to successors(s)[j].
  // Throws InvalidConfiguration when any invariant fails.
  HmmParams(HmmTopology topology, Alphabet alphabet, std::vector<double> start,
            std::vector<std::vector<double>> transition, std::vector<std::vector<double>> emission);

  const HmmTopology& topology() const noexcept { return topology_; }
  const Alphabet& alphabet() const noexcept { return alphabet_; }
  const std::vector<double>& start() const noexcept { return start_; }
  const std::vector<std::vector<double>>& transition() const noexcept { return transition_; }
  const std::vector<std::vector<double>>& emission() const noexcept { return emission_; }

  double transition_probability(StateIndex from, StateIndex to) const;
  double emission_probability(StateIndex s, Symbol x) const {
    return emission_[static_cast<std::size_t>(s)][x];
  }

  bool operator==(const HmmParams&) const = default;

 private:
  HmmTopology topology_;
  Alphabet alphabet_;
  std::vector<double> start_;
  std::vector<std::vector<double>> transition_;
  std::vector<std::vector<double>> emission_;
};

struct UniformInit {};
struct RandomInit {
  std::uint64_t seed = 0;
};
// Motif chains are seeded from uniformly chosen training subsequences.
struct SampledInit {
  const Dataset* dataset = nullptr;
  std::uint64_t seed = 0;
};
using InitSpec = std::variant<UniformInit, RandomInit, SampledInit>;

// Probability given to the seeded symbol in a sampled motif column.
inline constexpr double kSeedSymbolProbability = 0.5;

HmmParams init_params(const HmmTopology& topology, const Alphabet& alphabet, const InitSpec& spec);

struct StatePath {
  std::vector<StateIndex> states;

  std::size_t size() const noexcept { return states.size(); }
  bool operator==(const StatePath&) const = default;
};

// Checks transitions against the topology and that the first state may
// start. Throws InvalidInput.
void validate_path(const StatePath& path, const HmmTopology& topology);

// v_k = min(cap_k, number of positions spent in counted state k).
VisitVector path_to_counts(const StatePath& path, const HmmTopology& topology,
                           const VisitCaps& caps);

}  // namespace pathagg
