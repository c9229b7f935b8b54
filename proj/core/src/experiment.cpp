#include "pathagg/experiment.hpp"

#include <atomic>
#include <cmath>
#include <json.hpp>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "pathagg/error.hpp"
#include "pathagg/predict.hpp"

namespace pathagg {

namespace {

using nlohmann::json;

json parse_object(const std::string& text, const char* what) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string(what) + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::kParse, std::string(what) + ": expected an object");
  return doc;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const char* what) {
  std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) {
      throw InvalidConfiguration(std::string("unknown key '") + key + "' in " + what);
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

SyntheticConfig synthetic_from(const json& j, SyntheticConfig c) {
  reject_unknown(j,
                 {"seq_len", "alphabet", "motif_len", "effect_coefficients", "intercept",
                  "noise_sigma", "occurrences_lambda", "decoy_motifs", "mutation_rate",
                  "train_size", "tune_size", "test_size", "seed", "max_retries"},
                 "synthetic config");
  read(j, "seq_len", c.seq_len);
  if (j.contains("alphabet")) c.alphabet = Alphabet(j.at("alphabet").get<std::string>());
  read(j, "motif_len", c.motif_len);
  read(j, "effect_coefficients", c.effect_coefficients);
  read(j, "intercept", c.intercept);
  read(j, "noise_sigma", c.noise_sigma);
  read(j, "occurrences_lambda", c.occurrences_lambda);
  read(j, "decoy_motifs", c.decoy_motifs);
  read(j, "mutation_rate", c.mutation_rate);
  read(j, "train_size", c.train_size);
  read(j, "tune_size", c.tune_size);
  read(j, "test_size", c.test_size);
  read(j, "seed", c.seed);
  read(j, "max_retries", c.max_retries);
  return c;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string optional_number(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

// All learners on one generated replicate.
std::vector<CellResult> run_cell(const ExperimentSpec& spec, int value, int replicate) {
  std::vector<CellResult> out;
  for (auto learner : spec.learners) out.push_back({value, learner, replicate, std::nullopt, {}});
  auto fail_all = [&](const Error& e) {
    for (auto& c : out) {
      if (!c.test_mae && c.error.empty())
        c.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
  };

  GeneratedDataset data;
  try {
    SyntheticConfig sc = spec.base;
    if (spec.sweep == SweepVariable::kDecoyMotifs)
      sc.decoy_motifs = value;
    else
      sc.mutation_rate = value;
    sc.seed = cell_data_seed(spec, value, replicate);
    data = generate_dataset(sc);
  } catch (const Error& e) {
    fail_all(e);
    return out;
  }

  StructureSearchConfig search = spec.search;
  search.log = nullptr;
  search.train.log = nullptr;
  search.train.alphabet = spec.base.alphabet;
  search.train.seed = cell_train_seed(cell_data_seed(spec, value, replicate));
  for (auto& cell : out) {
    try {
      if (cell.learner == ExperimentLearner::kMeanBaseline) {
        cell.test_mae = evaluate_mae(mean_baseline(data.train.data), data.test.data);
      } else {
        search.train.learner = cell.learner == ExperimentLearner::kPathAggregate
                                   ? Learner::kPathAggregate
                                   : Learner::kTwoPhase;
        auto result = structure_search(search, data.train.data, data.tune.data);
        cell.test_mae = evaluate_mae(result.model, data.test.data);
      }
    } catch (const Error& e) {
      cell.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(SweepVariable sweep) {
  return sweep == SweepVariable::kMutationRate ? "mutation_rate" : "decoy_motifs";
}

SweepVariable sweep_from_string(std::string_view name) {
  if (name == "mutation_rate") return SweepVariable::kMutationRate;
  if (name == "decoy_motifs") return SweepVariable::kDecoyMotifs;
  throw InvalidConfiguration("unknown sweep variable '" + std::string(name) + "'");
}

std::string_view to_string(ExperimentLearner learner) {
  switch (learner) {
    case ExperimentLearner::kPathAggregate: return "path_aggregate";
    case ExperimentLearner::kTwoPhase: return "two_phase";
    case ExperimentLearner::kMeanBaseline: return "mean_baseline";
  }
  return "mean_baseline";
}

ExperimentLearner experiment_learner_from_string(std::string_view name) {
  if (name == "path_aggregate" || name == "path-aggregate")
    return ExperimentLearner::kPathAggregate;
  if (name == "two_phase" || name == "two-phase") return ExperimentLearner::kTwoPhase;
  if (name == "mean_baseline" || name == "mean-baseline") return ExperimentLearner::kMeanBaseline;
  throw InvalidConfiguration("unknown learner '" + std::string(name) + "'");
}

void ExperimentSpec::validate() const {
  if (grid.empty()) throw InvalidConfiguration("experiment grid is empty");
  if (replicates < 1) throw InvalidConfiguration("replicates must be at least 1");
  if (learners.empty()) throw InvalidConfiguration("experiment has no learners");
  if (workers < 1) throw InvalidConfiguration("workers must be at least 1");
  std::set<ExperimentLearner> seen;
  for (auto l : learners) {
    if (!seen.insert(l).second) throw InvalidConfiguration("learner listed twice");
  }
  std::set<int> values;
  for (int v : grid) {
    if (v < 0) throw InvalidConfiguration("grid values must be non-negative");
    if (!values.insert(v).second) throw InvalidConfiguration("grid value listed twice");
    SyntheticConfig sc = base;
    if (sweep == SweepVariable::kDecoyMotifs)
      sc.decoy_motifs = v;
    else
      sc.mutation_rate = v;
    sc.validate();
  }
  if (seen.count(ExperimentLearner::kPathAggregate) || seen.count(ExperimentLearner::kTwoPhase)) {
    StructureSearchConfig s = search;
    s.train.alphabet = base.alphabet;
    s.validate();
  }
}

SyntheticConfig synthetic_config_from_json(const std::string& text, SyntheticConfig base) {
  const json doc = parse_object(text, "synthetic config");
  try {
    return synthetic_from(doc, std::move(base));
  } catch (const json::exception& e) {
    throw InvalidConfiguration(std::string("synthetic config: ") + e.what());
  }
}

ExperimentSpec experiment_spec_from_json(const std::string& text) {
  const json doc = parse_object(text, "experiment spec");
  ExperimentSpec spec;
  spec.search.train.restarts = 10;
  try {
    reject_unknown(
        doc,
        {"sweep", "grid", "replicates", "learners", "base", "seed", "search", "train", "workers"},
        "experiment spec");
    spec.sweep = sweep_from_string(doc.at("sweep").get<std::string>());
    spec.grid = doc.at("grid").get<std::vector<int>>();
    read(doc, "replicates", spec.replicates);
    if (doc.contains("learners")) {
      for (const auto& l : doc.at("learners")) {
        spec.learners.push_back(experiment_learner_from_string(l.get<std::string>()));
      }
    } else {
      spec.learners = {ExperimentLearner::kPathAggregate, ExperimentLearner::kTwoPhase,
                       ExperimentLearner::kMeanBaseline};
    }
    if (doc.contains("base")) spec.base = synthetic_from(doc.at("base"), spec.base);
    read(doc, "seed", spec.seed);
    read(doc, "workers", spec.workers);
    if (doc.contains("search")) {
      const auto& s = doc.at("search");
      reject_unknown(s, {"template", "motif_width", "max_motifs"}, "search");
      if (s.contains("template")) {
        spec.search.template_kind = template_kind_from_string(s.at("template").get<std::string>());
      }
      read(s, "motif_width", spec.search.motif_width);
      read(s, "max_motifs", spec.search.max_motifs);
    }
    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      auto& tc = spec.search.train;
      reject_unknown(t,
                     {"restarts", "max_iterations", "tolerance", "visit_cap", "intercept", "init",
                      "lattice_budget"},
                     "train");
      read(t, "restarts", tc.restarts);
      read(t, "max_iterations", tc.max_iterations);
      read(t, "tolerance", tc.tolerance);
      read(t, "visit_cap", tc.visit_cap);
      read(t, "intercept", tc.use_intercept);
      if (t.contains("init")) tc.init = init_mode_from_string(t.at("init").get<std::string>());
      read(t, "lattice_budget", tc.lattice_budget);
    }
  } catch (const json::exception& e) {
    throw InvalidConfiguration(std::string("experiment spec: ") + e.what());
  }
  spec.search.train.alphabet = spec.base.alphabet;
  return spec;
}

std::uint64_t cell_data_seed(const ExperimentSpec& spec, int value, int replicate) {
  return derive_seed(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.sweep)),
                     static_cast<std::uint64_t>(value), static_cast<std::uint64_t>(replicate));
}

std::uint64_t cell_train_seed(std::uint64_t data_seed) { return derive_seed(data_seed, 0x7a1e); }

const CellSummary& ExperimentResults::summary(int value, ExperimentLearner learner) const {
  for (const auto& s : summaries) {
    if (s.value == value && s.learner == learner) return s;
  }
  throw InvalidInput("no summary for value " + std::to_string(value) + " and learner " +
                     std::string(to_string(learner)));
}

ExperimentResults run_experiment(const ExperimentSpec& spec, std::ostream* progress) {
  spec.validate();
  const std::size_t tasks = spec.grid.size() * static_cast<std::size_t>(spec.replicates);
  std::vector<std::vector<CellResult>> slots(tasks);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks;) {
      const int value = spec.grid[t / static_cast<std::size_t>(spec.replicates)];
      const int replicate = static_cast<int>(t % static_cast<std::size_t>(spec.replicates));
      slots[t] = run_cell(spec, value, replicate);
      if (progress != nullptr) {
        std::lock_guard lock(log_mutex);
        for (const auto& c : slots[t]) {
          *progress << to_string(spec.sweep) << '=' << value << " replicate " << replicate << ' '
                    << to_string(c.learner) << ": "
                    << (c.test_mae ? "test MAE " + format_double(*c.test_mae) : c.error) << '\n';
        }
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(spec.workers), tasks);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExperimentResults results;
  results.sweep = spec.sweep;
  for (auto& slot : slots) {
    for (auto& c : slot) results.cells.push_back(std::move(c));
  }
  for (int value : spec.grid) {
    for (auto learner : spec.learners) {
      CellSummary s{value, learner, std::nullopt, std::nullopt, 0};
      double sum = 0.0;
      std::vector<double> maes;
      for (const auto& c : results.cells) {
        if (c.value == value && c.learner == learner && c.test_mae) {
          maes.push_back(*c.test_mae);
          sum += *c.test_mae;
        }
      }
      s.count = static_cast<int>(maes.size());
      if (!maes.empty()) {
        const double mean = sum / static_cast<double>(maes.size());
        s.mean_mae = mean;
        if (maes.size() >= 2) {
          double ss = 0.0;
          for (double m : maes) ss += (m - mean) * (m - mean);
          const double n = static_cast<double>(maes.size());
          s.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
      }
      results.summaries.push_back(s);
    }
  }
  return results;
}

std::string results_csv(const ExperimentResults& results) {
  std::string out = "kind,sweep,value,learner,replicate,test_mae,std_error,count,status\n";
  const std::string sweep(to_string(results.sweep));
  for (const auto& c : results.cells) {
    out += "cell," + sweep + ',' + std::to_string(c.value) + ',' +
           std::string(to_string(c.learner)) + ',' + std::to_string(c.replicate) + ',' +
           optional_number(c.test_mae) + ",,," +
           (c.test_mae ? std::string("ok") : csv_field("error: " + c.error)) + '\n';
  }
  for (const auto& s : results.summaries) {
    out += "summary," + sweep + ',' + std::to_string(s.value) + ',' +
           std::string(to_string(s.learner)) + ",," + optional_number(s.mean_mae) + ',' +
           optional_number(s.std_error) + ',' + std::to_string(s.count) + ',' +
           (s.count > 0 ? "ok" : "no_successful_cells") + '\n';
  }
  return out;
}

}  // namespace pathagg
