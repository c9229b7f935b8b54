#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "pathagg/dataset.hpp"
#include "pathagg/model.hpp"
#include "pathagg/training.hpp"

namespace pathagg {

struct StructureSearchConfig {
  TemplateKind template_kind = TemplateKind::kOccurrence;
  int motif_width = 15;
  int max_motifs = 2;
  TrainConfig train;
  // Candidate log (TSV) when set.
  std::ostream* log = nullptr;

  // Throws InvalidConfiguration.
  void validate() const;
};

// The configured template with a single motif.
HmmTopology initial_structure(const StructureSearchConfig& config);

// The same template with one more motif. Throws CapacityError once the
// topology already has config.max_motifs motifs and InvalidConfiguration for
// topologies not built from a template.
HmmTopology add_motif(const HmmTopology& topology, const StructureSearchConfig& config);

struct StructureCandidate {
  int motif_count = 0;
  int restart = 0;
  std::uint64_t seed = 0;
  std::optional<double> tuning_mae;
  std::string error;
};

struct StructureSearchResult {
  TrainedModel model;
  std::vector<StructureCandidate> candidates;
};

// Master seed used for the restarts of the `motif_count`-motif structure.
// The one-motif structure uses the configured seed itself.
std::uint64_t structure_seed(std::uint64_t master, int motif_count);

// Trains 1..max_motifs motif structures with restarts, each freshly
// initialized, and returns the candidate with the lowest tuning MAE
// (smaller structure, then earlier restart, on ties).
StructureSearchResult structure_search(const StructureSearchConfig& config, const Dataset& train,
                                       const Dataset& tune);

}  // namespace pathagg
