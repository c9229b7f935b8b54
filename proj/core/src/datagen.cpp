#include "pathagg/datagen.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "json.hpp"
#include "pathagg/error.hpp"

namespace pathagg {

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& m) { throw InvalidConfiguration(m); };
  if (motif_len < 1) fail("motif length must be positive");
  if (seq_len < motif_len) fail("sequence length must be at least the motif length");
  if (mutation_rate < 0 || mutation_rate > motif_len) {
    fail("mutation rate must lie in [0, motif length]");
  }
  if (decoy_motifs < 0) fail("decoy motif count must be non-negative");
  if (!(noise_sigma >= 0.0)) fail("noise sigma must be non-negative");
  if (!(occurrences_lambda >= 0.0)) fail("occurrence rate must be non-negative");
  if (train_size == 0 || tune_size == 0 || test_size == 0) fail("split sizes must be positive");
  if (max_retries < 1) fail("max retries must be positive");
  if (motif_count() == 0) fail("at least one motif is required");
  if (mutation_rate > 0 && alphabet.size() < 2) fail("mutation needs two or more symbols");
}

namespace {

// k distinct values from [0, n), sorted. Floyd's algorithm.
std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k, Rng& rng) {
  std::set<std::size_t> chosen;
  for (std::size_t j = n - k; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t t = pick(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

std::string random_string(const Alphabet& alphabet, std::size_t length, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(length, ' ');
  for (char& c : s) c = alphabet.symbol(static_cast<Symbol>(pick(rng)));
  return s;
}

}  // namespace

std::string mutate_motif(std::string_view instance, int r, const Alphabet& alphabet, Rng& rng) {
  if (r < 0 || static_cast<std::size_t>(r) > instance.size()) {
    throw InvalidInput("cannot mutate " + std::to_string(r) + " of " +
                       std::to_string(instance.size()) + " characters");
  }
  std::string out(instance);
  if (r == 0) return out;
  if (alphabet.size() < 2) throw InvalidInput("mutation needs two or more symbols");
  const auto encoded = alphabet.encode(instance);
  std::uniform_int_distribution<std::size_t> other(0, alphabet.size() - 2);
  for (std::size_t pos : sample_distinct(instance.size(), static_cast<std::size_t>(r), rng)) {
    std::size_t c = other(rng);
    if (c >= encoded[pos]) ++c;
    out[pos] = alphabet.symbol(static_cast<Symbol>(c));
  }
  return out;
}

std::string mutate_motif(std::string_view instance, int r, const Alphabet& alphabet,
                         std::uint64_t seed) {
  Rng rng(seed);
  return mutate_motif(instance, r, alphabet, rng);
}

double response_from_provenance(const SyntheticConfig& config, const InstanceProvenance& p) {
  double y = config.intercept;
  for (std::size_t k = 0; k < config.effect_coefficients.size(); ++k) {
    y += config.effect_coefficients[k] * p.counts.at(k);
  }
  return y + p.noise;
}

GeneratedSplit generate_split(const SyntheticConfig& config, const std::vector<std::string>& motifs,
                              std::size_t size, Rng& rng) {
  const auto n = static_cast<std::size_t>(config.seq_len);
  const auto w = static_cast<std::size_t>(config.motif_len);
  std::poisson_distribution<int> occurrences(config.occurrences_lambda);
  std::normal_distribution<double> noise(0.0, 1.0);

  GeneratedSplit split;
  for (std::size_t i = 0; i < size; ++i) {
    InstanceProvenance prov;
    std::size_t total = 0;
    for (int attempt = 0;; ++attempt) {
      if (attempt == config.max_retries) {
        throw GenerationError("could not place motif copies without overlap in sequence " +
                              std::to_string(i) + " after " + std::to_string(attempt) + " draws");
      }
      prov.counts.assign(motifs.size(), 0);
      total = 0;
      for (auto& c : prov.counts) {
        c = occurrences(rng);
        total += static_cast<std::size_t>(c);
      }
      if (total * w <= n) break;
    }

    std::string seq = random_string(config.alphabet, n, rng);
    std::vector<int> ids;
    for (std::size_t m = 0; m < motifs.size(); ++m)
      ids.insert(ids.end(), static_cast<std::size_t>(prov.counts[m]), static_cast<int>(m));
    std::shuffle(ids.begin(), ids.end(), rng);
    if (total > 0) {
      const auto slots = sample_distinct(n - total * w + total, total, rng);
      for (std::size_t j = 0; j < total; ++j) {
        PlantedCopy plant;
        plant.motif = ids[j];
        plant.position = slots[j] + j * (w - 1);
        plant.copy = mutate_motif(motifs[static_cast<std::size_t>(plant.motif)],
                                  config.mutation_rate, config.alphabet, rng);
        seq.replace(plant.position, w, plant.copy);
        prov.plants.push_back(std::move(plant));
      }
    }
    prov.noise = config.noise_sigma * noise(rng);
    split.data.examples.push_back({std::move(seq), response_from_provenance(config, prov)});
    split.provenance.push_back(std::move(prov));
  }
  return split;
}

GeneratedDataset generate_dataset(const SyntheticConfig& config) {
  config.validate();
  GeneratedDataset out;
  out.config = config;
  Rng motif_rng(derive_seed(config.seed, 0));
  for (std::size_t m = 0; m < config.motif_count(); ++m) {
    out.motifs.push_back(
        random_string(config.alphabet, static_cast<std::size_t>(config.motif_len), motif_rng));
  }
  Rng train_rng(derive_seed(config.seed, 1));
  Rng tune_rng(derive_seed(config.seed, 2));
  Rng test_rng(derive_seed(config.seed, 3));
  out.train = generate_split(config, out.motifs, config.train_size, train_rng);
  out.tune = generate_split(config, out.motifs, config.tune_size, tune_rng);
  out.test = generate_split(config, out.motifs, config.test_size, test_rng);
  return out;
}

std::string provenance_json(const GeneratedDataset& dataset) {
  using nlohmann::json;
  const auto& c = dataset.config;
  json doc;
  doc["format"] = "pathagg-provenance";
  doc["version"] = 1;
  doc["config"] = {
      {"seq_len", c.seq_len},
      {"alphabet", c.alphabet.symbols()},
      {"motif_len", c.motif_len},
      {"effect_coefficients", c.effect_coefficients},
      {"intercept", c.intercept},
      {"noise_sigma", c.noise_sigma},
      {"occurrences_lambda", c.occurrences_lambda},
      {"decoy_motifs", c.decoy_motifs},
      {"mutation_rate", c.mutation_rate},
      {"split_sizes", {c.train_size, c.tune_size, c.test_size}},
      {"seed", c.seed},
  };
  doc["motifs"] = dataset.motifs;
  auto split_json = [](const GeneratedSplit& split) {
    json rows = json::array();
    for (const auto& p : split.provenance) {
      json plants = json::array();
      for (const auto& pl : p.plants) {
        plants.push_back({{"motif", pl.motif}, {"position", pl.position}, {"copy", pl.copy}});
      }
      rows.push_back({{"counts", p.counts}, {"noise", p.noise}, {"plants", plants}});
    }
    return rows;
  };
  doc["splits"] = {{"train", split_json(dataset.train)},
                   {"tune", split_json(dataset.tune)},
                   {"test", split_json(dataset.test)}};
  return doc.dump(1) + "\n";
}

}  // namespace pathagg
