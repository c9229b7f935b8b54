#include "pathagg/structure.hpp"

#include <ostream>

#include "pathagg/error.hpp"
#include "pathagg/random.hpp"

namespace pathagg {

void StructureSearchConfig::validate() const {
  if (max_motifs < 1) throw InvalidConfiguration("max_motifs must be at least 1");
  if (motif_width < 1) throw InvalidConfiguration("motif width must be at least 1");
  if (template_kind == TemplateKind::kCustom) {
    throw InvalidConfiguration("structure search needs the occurrence or arrangement template");
  }
  if (template_kind == TemplateKind::kArrangement && max_motifs > 2) {
    throw InvalidConfiguration("the arrangement template supports at most 2 motifs");
  }
  train.validate();
}

HmmTopology initial_structure(const StructureSearchConfig& config) {
  config.validate();
  return build_topology(config.template_kind, 1, config.motif_width, config.train.alphabet);
}

HmmTopology add_motif(const HmmTopology& topology, const StructureSearchConfig& config) {
  const auto& info = topology.info();
  if (info.kind == TemplateKind::kCustom) {
    throw InvalidConfiguration("cannot add a motif to a topology without a template");
  }
  if (info.motif_count >= config.max_motifs) {
    throw CapacityError("topology already has the maximum of " + std::to_string(config.max_motifs) +
                        " motifs");
  }
  return build_topology(info.kind, info.motif_count + 1, info.motif_width, config.train.alphabet);
}

std::uint64_t structure_seed(std::uint64_t master, int motif_count) {
  return motif_count <= 1 ? master
                          : derive_seed(master, 0x5eed, static_cast<std::uint64_t>(motif_count));
}

StructureSearchResult structure_search(const StructureSearchConfig& config, const Dataset& train,
                                       const Dataset& tune) {
  config.validate();
  if (train.empty() || tune.empty()) throw InvalidInput("structure search needs non-empty splits");
  if (config.log != nullptr) *config.log << "# motifs\trestart\tseed\ttuning_mae\n";

  std::optional<TrainedModel> best;
  std::vector<StructureCandidate> candidates;
  HmmTopology topology = initial_structure(config);
  for (int m = 1;; ++m) {
    TrainConfig train_config = config.train;
    train_config.seed = structure_seed(config.train.seed, m);
    std::vector<RestartOutcome> outcomes;
    try {
      TrainedModel model = train_with_restarts(train_config, topology, train, tune, &outcomes);
      if (!best || *model.meta.tuning_mae < *best->meta.tuning_mae) best = std::move(model);
    } catch (const TrainingError&) {
      // Every restart failed; the outcomes below record why.
    }
    for (const auto& o : outcomes) {
      candidates.push_back({m, o.restart, o.seed, o.tuning_mae, o.error});
      if (config.log != nullptr) {
        *config.log << m << '\t' << o.restart << '\t' << o.seed << '\t'
                    << (o.tuning_mae ? format_double(*o.tuning_mae) : "error: " + o.error) << '\n';
      }
    }
    if (m >= config.max_motifs) break;
    topology = add_motif(topology, config);
  }
  if (!best) throw TrainingError("no structure could be trained");
  return {*std::move(best), std::move(candidates)};
}

}  // namespace pathagg
