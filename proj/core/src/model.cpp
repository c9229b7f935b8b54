#include "pathagg/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "pathagg/error.hpp"
#include "pathagg/random.hpp"

namespace pathagg {

namespace {

void check_row(const std::vector<double>& row, const std::string& what) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidConfiguration(what + " has a probability outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowSumTolerance) {
    throw InvalidConfiguration(what + " sums to " + format_double(sum) + ", not 1");
  }
}

std::vector<double> normalized(std::vector<double> row) {
  double sum = std::accumulate(row.begin(), row.end(), 0.0);
  for (double& p : row) p /= sum;
  return row;
}

}  // namespace

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kOccurrence: return "occurrence";
    case TemplateKind::kArrangement: return "arrangement";
    case TemplateKind::kCustom: return "custom";
  }
  return "custom";
}

TemplateKind template_kind_from_string(std::string_view name) {
  if (name == "occurrence") return TemplateKind::kOccurrence;
  if (name == "arrangement") return TemplateKind::kArrangement;
  if (name == "custom") return TemplateKind::kCustom;
  throw InvalidConfiguration("unknown template \"" + std::string(name) + "\"");
}

HmmTopology::HmmTopology(TopologySpec spec)
    : start_(std::move(spec.start)),
      successors_(std::move(spec.successors)),
      counted_(std::move(spec.counted)),
      labels_(std::move(spec.labels)),
      info_(spec.info) {
  const std::size_t n = successors_.size();
  if (n == 0) throw InvalidConfiguration("topology has no states");
  if (start_.size() != n) throw InvalidConfiguration("start distribution size mismatch");
  check_row(start_, "start distribution");

  for (std::size_t s = 0; s < n; ++s) {
    auto& succ = successors_[s];
    std::sort(succ.begin(), succ.end());
    succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
    if (succ.empty()) {
      throw InvalidConfiguration("state " + std::to_string(s) + " has no successors");
    }
    for (StateIndex t : succ) {
      if (t < 0 || static_cast<std::size_t>(t) >= n) {
        throw InvalidConfiguration("transition target out of range");
      }
    }
    transition_count_ += succ.size();
  }

  counted_slot_.assign(n, -1);
  for (std::size_t k = 0; k < counted_.size(); ++k) {
    StateIndex c = counted_[k];
    if (c < 0 || static_cast<std::size_t>(c) >= n) {
      throw InvalidConfiguration("counted state out of range");
    }
    if (counted_slot_[static_cast<std::size_t>(c)] >= 0) {
      throw InvalidConfiguration("duplicate counted state");
    }
    counted_slot_[static_cast<std::size_t>(c)] = static_cast<int>(k);
  }

  if (labels_.empty()) labels_.assign(n, StateLabel{});
  if (labels_.size() != n) throw InvalidConfiguration("label count mismatch");

  // Densify emission groups in order of first appearance.
  if (spec.emission_groups.empty()) {
    groups_.resize(n);
    std::iota(groups_.begin(), groups_.end(), 0);
  } else {
    if (spec.emission_groups.size() != n) {
      throw InvalidConfiguration("emission group count mismatch");
    }
    std::map<int, int> dense;
    groups_.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      auto [it, inserted] = dense.emplace(spec.emission_groups[s], static_cast<int>(dense.size()));
      groups_[s] = it->second;
    }
  }
  group_count_ = static_cast<std::size_t>(*std::max_element(groups_.begin(), groups_.end())) + 1;

  // Reachability from the start support.
  std::vector<bool> seen(n, false);
  std::vector<StateIndex> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (start_[s] > 0.0) {
      seen[s] = true;
      stack.push_back(static_cast<StateIndex>(s));
    }
  }
  while (!stack.empty()) {
    StateIndex s = stack.back();
    stack.pop_back();
    for (StateIndex t : successors_[static_cast<std::size_t>(s)]) {
      if (!seen[static_cast<std::size_t>(t)]) {
        seen[static_cast<std::size_t>(t)] = true;
        stack.push_back(t);
      }
    }
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (!seen[s]) {
      throw InvalidConfiguration("state " + std::to_string(s) + " is unreachable");
    }
  }

  // A state is on a cycle iff it can reach itself.
  on_cycle_.assign(n, false);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<bool> visited(n, false);
    std::vector<StateIndex> todo(successors_[s].begin(), successors_[s].end());
    while (!todo.empty()) {
      StateIndex t = todo.back();
      todo.pop_back();
      if (static_cast<std::size_t>(t) == s) {
        on_cycle_[s] = true;
        break;
      }
      if (visited[static_cast<std::size_t>(t)]) continue;
      visited[static_cast<std::size_t>(t)] = true;
      for (StateIndex u : successors_[static_cast<std::size_t>(t)]) todo.push_back(u);
    }
  }
}

bool HmmTopology::allows(StateIndex from, StateIndex to) const {
  const auto& succ = successors(from);
  return std::binary_search(succ.begin(), succ.end(), to);
}

bool HmmTopology::operator==(const HmmTopology& other) const noexcept {
  return start_ == other.start_ && successors_ == other.successors_ && counted_ == other.counted_ &&
         labels_ == other.labels_ && groups_ == other.groups_ && info_ == other.info_;
}

HmmTopology build_occurrence_topology(int motif_count, int motif_width,
                                      const Alphabet& /*alphabet*/) {
  if (motif_count < 1 || motif_width < 1) {
    throw InvalidConfiguration("occurrence topology needs motif_count >= 1 and motif_width >= 1");
  }
  const int n = 1 + motif_count * motif_width;
  TopologySpec spec;
  spec.start.assign(static_cast<std::size_t>(n), 0.0);
  spec.start[0] = 1.0;
  spec.successors.resize(static_cast<std::size_t>(n));
  spec.labels.resize(static_cast<std::size_t>(n));
  spec.successors[0].push_back(0);
  for (int m = 0; m < motif_count; ++m) {
    const int first = 1 + m * motif_width;
    const int last = first + motif_width - 1;
    spec.successors[0].push_back(first);
    for (int p = 0; p < motif_width; ++p) {
      const int s = first + p;
      spec.labels[static_cast<std::size_t>(s)] = {StateRole::kMotif, m, p, -1};
      spec.successors[static_cast<std::size_t>(s)].push_back(s == last ? 0 : s + 1);
    }
    spec.counted.push_back(last);
  }
  spec.info = {TemplateKind::kOccurrence, motif_count, motif_width};
  return HmmTopology(std::move(spec));
}

HmmTopology build_arrangement_topology(int motif_count, int motif_width,
                                       const Alphabet& /*alphabet*/) {
  if (motif_count < 1 || motif_count > 2) {
    throw InvalidConfiguration("arrangement topology supports 1 or 2 motifs");
  }
  if (motif_width < 1) throw InvalidConfiguration("motif_width must be >= 1");

  std::vector<std::vector<int>> branches = {{}, {0}};
  if (motif_count == 2) {
    branches.push_back({1});
    branches.push_back({0, 1});
    branches.push_back({1, 0});
  }

  TopologySpec spec;
  auto add_state = [&spec](StateLabel label, int group) {
    spec.successors.emplace_back();
    spec.labels.push_back(label);
    spec.emission_groups.push_back(group);
    return static_cast<StateIndex>(spec.successors.size() - 1);
  };
  auto motif_group = [motif_width](int m, int p) { return 1 + m * motif_width + p; };
  auto succ = [&spec](StateIndex s) -> std::vector<StateIndex>& {
    return spec.successors[static_cast<std::size_t>(s)];
  };

  std::vector<StateIndex> markers;
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const int branch = static_cast<int>(b);
    StateIndex marker = add_state({StateRole::kMarker, -1, -1, branch}, 0);
    markers.push_back(marker);
    StateIndex bg = add_state({StateRole::kBackground, -1, -1, branch}, 0);
    succ(marker).push_back(bg);
    succ(bg).push_back(bg);
    bool leading = true;
    for (int m : branches[b]) {
      StateIndex first = -1;
      StateIndex prev = -1;
      for (int p = 0; p < motif_width; ++p) {
        StateIndex s = add_state({StateRole::kMotif, m, p, branch}, motif_group(m, p));
        if (p == 0) first = s;
        if (prev >= 0) succ(prev).push_back(s);
        prev = s;
      }
      succ(bg).push_back(first);
      if (leading) succ(marker).push_back(first);
      StateIndex next_bg = add_state({StateRole::kBackground, -1, -1, branch}, 0);
      succ(prev).push_back(next_bg);
      succ(next_bg).push_back(next_bg);
      bg = next_bg;
      leading = false;
    }
  }
  spec.start.assign(spec.successors.size(), 0.0);
  for (StateIndex m : markers) {
    spec.start[static_cast<std::size_t>(m)] = 1.0 / static_cast<double>(markers.size());
  }
  spec.counted = markers;
  spec.info = {TemplateKind::kArrangement, motif_count, motif_width};
  return HmmTopology(std::move(spec));
}

HmmTopology build_topology(TemplateKind kind, int motif_count, int motif_width,
                           const Alphabet& alphabet) {
  switch (kind) {
    case TemplateKind::kOccurrence:
      return build_occurrence_topology(motif_count, motif_width, alphabet);
    case TemplateKind::kArrangement:
      return build_arrangement_topology(motif_count, motif_width, alphabet);
    case TemplateKind::kCustom: break;
  }
  throw InvalidConfiguration("cannot build a custom topology from a template");
}

VisitCaps default_caps(const HmmTopology& topology, int cycle_cap) {
  if (cycle_cap < 1) throw InvalidConfiguration("visit cap must be >= 1");
  std::vector<int> caps;
  caps.reserve(topology.counted_count());
  for (StateIndex c : topology.counted_states()) {
    caps.push_back(topology.on_cycle(c) ? cycle_cap : 1);
  }
  return VisitCaps(std::move(caps));
}

HmmParams::HmmParams(HmmTopology topology, Alphabet alphabet, std::vector<double> start,
                     std::vector<std::vector<double>> transition,
                     std::vector<std::vector<double>> emission)
    : topology_(std::move(topology)),
      alphabet_(std::move(alphabet)),
      start_(std::move(start)),
      transition_(std::move(transition)),
      emission_(std::move(emission)) {
  const std::size_t n = topology_.state_count();
  if (start_.size() != n) throw InvalidConfiguration("start vector size mismatch");
  check_row(start_, "start distribution");
  for (std::size_t s = 0; s < n; ++s) {
    if (start_[s] > 0.0 && topology_.start_distribution()[s] == 0.0) {
      throw InvalidConfiguration("state " + std::to_string(s) + " may not start");
    }
  }
  if (transition_.size() != n) throw InvalidConfiguration("transition row count mismatch");
  if (emission_.size() != n) throw InvalidConfiguration("emission row count mismatch");
  for (std::size_t s = 0; s < n; ++s) {
    const auto label = "state " + std::to_string(s);
    if (transition_[s].size() != topology_.successors(static_cast<StateIndex>(s)).size()) {
      throw InvalidConfiguration(label + " transition row does not match its successors");
    }
    check_row(transition_[s], label + " transition row");
    if (emission_[s].size() != alphabet_.size()) {
      throw InvalidConfiguration(label + " emission row does not match the alphabet");
    }
    check_row(emission_[s], label + " emission row");
  }
}

double HmmParams::transition_probability(StateIndex from, StateIndex to) const {
  const auto& succ = topology_.successors(from);
  auto it = std::lower_bound(succ.begin(), succ.end(), to);
  if (it == succ.end() || *it != to) return 0.0;
  return transition_[static_cast<std::size_t>(from)][static_cast<std::size_t>(it - succ.begin())];
}

namespace {

std::vector<double> start_probabilities(const HmmTopology& topology) {
  return topology.start_distribution();
}

std::vector<double> uniform_row(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

std::vector<double> random_row(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> row(n);
  for (double& p : row) p = u(rng);
  return normalized(std::move(row));
}

// Group-level emission rows expanded to per-state rows.
std::vector<std::vector<double>> expand_groups(const HmmTopology& topology,
                                               const std::vector<std::vector<double>>& groups) {
  std::vector<std::vector<double>> rows(topology.state_count());
  for (std::size_t s = 0; s < rows.size(); ++s) {
    rows[s] = groups[static_cast<std::size_t>(topology.emission_group(static_cast<StateIndex>(s)))];
  }
  return rows;
}

HmmParams sampled_params(const HmmTopology& topology, const Alphabet& alphabet,
                         const SampledInit& spec) {
  if (spec.dataset == nullptr || spec.dataset->empty()) {
    throw InvalidInput("sampled initialization needs a non-empty dataset");
  }
  const Dataset& data = *spec.dataset;
  const std::size_t n = topology.state_count();
  const std::size_t a = alphabet.size();
  Rng rng(spec.seed);

  // Background: smoothed symbol frequencies of the whole dataset.
  std::vector<double> freq(a, kPseudocount);
  for (const auto& ex : data.examples) {
    for (Symbol s : alphabet.encode(ex.sequence)) freq[s] += 1.0;
  }
  freq = normalized(std::move(freq));

  const double mean_len = std::max(1.0, data.mean_length());
  std::vector<std::vector<double>> transition(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& succ = topology.successors(static_cast<StateIndex>(s));
    const bool self = std::binary_search(succ.begin(), succ.end(), static_cast<StateIndex>(s));
    if (!self || succ.size() == 1) {
      transition[s] = uniform_row(succ.size());
      continue;
    }
    // Self-looping state: each exit gets about one use per sequence.
    const double exits = static_cast<double>(succ.size() - 1);
    const double exit_p = std::min(1.0 / mean_len, 0.5 / exits);
    transition[s].assign(succ.size(), exit_p);
    for (std::size_t j = 0; j < succ.size(); ++j) {
      if (succ[j] == static_cast<StateIndex>(s)) transition[s][j] = 1.0 - exit_p * exits;
    }
  }

  std::vector<std::vector<double>> group_rows(topology.emission_group_count(), freq);
  std::set<int> motifs;
  int width = 0;
  for (const auto& label : topology.labels()) {
    if (label.role == StateRole::kMotif) {
      motifs.insert(label.motif);
      width = std::max(width, label.position + 1);
    }
  }
  if (!motifs.empty()) {
    // Uniform over all windows of the motif width.
    std::vector<std::size_t> windows;
    std::size_t total = 0;
    for (const auto& ex : data.examples) {
      std::size_t w = ex.sequence.size() >= static_cast<std::size_t>(width)
                          ? ex.sequence.size() - static_cast<std::size_t>(width) + 1
                          : 0;
      total += w;
      windows.push_back(total);
    }
    if (total == 0) {
      throw InvalidInput("no training sequence is as long as the motif width " +
                         std::to_string(width));
    }
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    const double other = a > 1 ? (1.0 - kSeedSymbolProbability) / static_cast<double>(a - 1) : 0.0;
    const double hot = a > 1 ? kSeedSymbolProbability : 1.0;
    for (int m : motifs) {
      std::size_t draw = pick(rng);
      auto it = std::upper_bound(windows.begin(), windows.end(), draw);
      std::size_t ex = static_cast<std::size_t>(it - windows.begin());
      std::size_t offset = draw - (ex == 0 ? 0 : windows[ex - 1]);
      const std::string& seq = data.examples[ex].sequence;
      for (std::size_t s = 0; s < n; ++s) {
        const auto& label = topology.label(static_cast<StateIndex>(s));
        if (label.role != StateRole::kMotif || label.motif != m) continue;
        Symbol seed = *alphabet.find(seq[offset + static_cast<std::size_t>(label.position)]);
        std::vector<double> row(a, other);
        row[seed] = hot;
        group_rows[static_cast<std::size_t>(topology.emission_group(static_cast<StateIndex>(s)))] =
            normalized(std::move(row));
      }
    }
  }
  return HmmParams(topology, alphabet, start_probabilities(topology), std::move(transition),
                   expand_groups(topology, group_rows));
}

}  // namespace

HmmParams init_params(const HmmTopology& topology, const Alphabet& alphabet, const InitSpec& spec) {
  const std::size_t n = topology.state_count();
  if (const auto* sampled = std::get_if<SampledInit>(&spec)) {
    return sampled_params(topology, alphabet, *sampled);
  }
  std::vector<std::vector<double>> transition(n);
  std::vector<std::vector<double>> groups(topology.emission_group_count());
  if (std::holds_alternative<UniformInit>(spec)) {
    for (std::size_t s = 0; s < n; ++s) {
      transition[s] = uniform_row(topology.successors(static_cast<StateIndex>(s)).size());
    }
    for (auto& row : groups) row = uniform_row(alphabet.size());
  } else {
    Rng rng(std::get<RandomInit>(spec).seed);
    for (std::size_t s = 0; s < n; ++s) {
      transition[s] = random_row(topology.successors(static_cast<StateIndex>(s)).size(), rng);
    }
    for (auto& row : groups) row = random_row(alphabet.size(), rng);
  }
  return HmmParams(topology, alphabet, start_probabilities(topology), std::move(transition),
                   expand_groups(topology, groups));
}

void validate_path(const StatePath& path, const HmmTopology& topology) {
  if (path.states.empty()) throw InvalidInput("empty state path");
  const auto n = static_cast<StateIndex>(topology.state_count());
  for (StateIndex s : path.states) {
    if (s < 0 || s >= n) throw InvalidInput("state index out of range in path");
  }
  if (topology.start_distribution()[static_cast<std::size_t>(path.states.front())] <= 0.0) {
    throw InvalidInput("path starts in a state that may not start");
  }
  for (std::size_t i = 1; i < path.states.size(); ++i) {
    if (!topology.allows(path.states[i - 1], path.states[i])) {
      throw InvalidInput("path uses a disallowed transition at position " + std::to_string(i));
    }
  }
}

VisitVector path_to_counts(const StatePath& path, const HmmTopology& topology,
                           const VisitCaps& caps) {
  if (caps.dimension() != topology.counted_count()) {
    throw InvalidInput("caps dimension does not match counted states");
  }
  VisitVector v(caps.dimension(), 0);
  for (StateIndex s : path.states) {
    int k = topology.counted_slot(s);
    if (k >= 0 && v[static_cast<std::size_t>(k)] < caps.cap(static_cast<std::size_t>(k))) {
      ++v[static_cast<std::size_t>(k)];
    }
  }
  return v;
}

}  // namespace pathagg
