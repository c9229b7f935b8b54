#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pathagg/alphabet.hpp"
#include "pathagg/dataset.hpp"
#include "pathagg/random.hpp"

namespace pathagg {

struct SyntheticConfig {
  int seq_len = 200;
  Alphabet alphabet = Alphabet::dna();
  int motif_len = 10;
  // One entry per effect motif.
  std::vector<double> effect_coefficients{7.0, 3.0};
  double intercept = -2.0;
  double noise_sigma = 1.0;
  double occurrences_lambda = 1.0;
  int decoy_motifs = 0;
  // Characters changed in each planted copy.
  int mutation_rate = 0;
  std::size_t train_size = 128;
  std::size_t tune_size = 128;
  std::size_t test_size = 256;
  std::uint64_t seed = 0;
  // Redraws of a sequence whose plants do not fit before giving up.
  int max_retries = 1000;

  // Throws InvalidConfiguration.
  void validate() const;
  std::size_t motif_count() const {
    return effect_coefficients.size() + static_cast<std::size_t>(decoy_motifs);
  }
};

struct PlantedCopy {
  int motif = 0;  // index into GeneratedDataset::motifs
  std::size_t position = 0;
  std::string copy;  // as written into the sequence, after mutation

  bool operator==(const PlantedCopy&) const = default;
};

struct InstanceProvenance {
  // Planted copies of each motif, effect motifs first.
  std::vector<int> counts;
  std::vector<PlantedCopy> plants;
  double noise = 0.0;

  // Counts of the effect motifs only; the response covariates.
  std::vector<int> true_counts(std::size_t effect_motifs) const {
    return {counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(effect_motifs)};
  }
  bool operator==(const InstanceProvenance&) const = default;
};

struct GeneratedSplit {
  Dataset data;
  std::vector<InstanceProvenance> provenance;

  bool operator==(const GeneratedSplit&) const = default;
};

struct GeneratedDataset {
  SyntheticConfig config;
  // Consensus strings, effect motifs first, then decoys.
  std::vector<std::string> motifs;
  GeneratedSplit train;
  GeneratedSplit tune;
  GeneratedSplit test;
};

GeneratedDataset generate_dataset(const SyntheticConfig& config);

// One sequence with the given motif consensus strings. Throws
// GenerationError when plants cannot be placed within the retry bound.
GeneratedSplit generate_split(const SyntheticConfig& config, const std::vector<std::string>& motifs,
                              std::size_t size, Rng& rng);

// intercept + sum_k effect_k v_k + noise, in that order.
double response_from_provenance(const SyntheticConfig& config, const InstanceProvenance& p);

// Exactly r distinct positions changed, each to a different symbol.
std::string mutate_motif(std::string_view instance, int r, const Alphabet& alphabet, Rng& rng);
std::string mutate_motif(std::string_view instance, int r, const Alphabet& alphabet,
                         std::uint64_t seed);

// Sidecar provenance document (JSON).
std::string provenance_json(const GeneratedDataset& dataset);

}  // namespace pathagg
