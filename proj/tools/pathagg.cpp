// Command-line front end: gen, train, predict, eval, experiment.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>

#include "pathagg/datagen.hpp"
#include "pathagg/dataset.hpp"
#include "pathagg/error.hpp"
#include "pathagg/experiment.hpp"
#include "pathagg/model_io.hpp"
#include "pathagg/predict.hpp"
#include "pathagg/structure.hpp"

namespace fs = std::filesystem;
using namespace pathagg;

namespace {

void print_error(std::string_view kind, std::string_view message) {
  nlohmann::json line = {{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << line.dump() << '\n';
}

struct GenOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::optional<int> seq_len, motif_len, decoys, mutation_rate;
  std::optional<std::size_t> train_size, tune_size, test_size;
  std::optional<double> noise_sigma;
};

struct TrainOptions {
  std::string train_path, tune_path, out_path;
  std::string alphabet = "acgt";
  std::string learner = "path-aggregate";
  std::string template_name = "occurrence";
  std::string intercept = "on";
  std::string init = "sampled";
  int motif_width = 15;
  int max_motifs = 2;
  int restarts = 10;
  int max_iterations = 100;
  double tolerance = 1e-6;
  int visit_cap = 4;
  std::size_t lattice_budget = kDefaultLatticeBudget;
  std::uint64_t seed = 0;
  bool verbose = false;
};

struct PredictOptions {
  std::string model_path, input_path;
};

struct EvalOptions {
  std::string model_path, baseline_train, test_path;
  std::string alphabet = "acgt";
};

struct ExperimentOptions {
  std::string spec_path, out_path;
  std::uint64_t seed = 0;
  std::optional<int> workers;
  bool verbose = false;
};

int run_gen(const GenOptions& o) {
  SyntheticConfig config;
  if (!o.config_path.empty()) config = synthetic_config_from_json(read_file(o.config_path));
  if (o.seq_len) config.seq_len = *o.seq_len;
  if (o.motif_len) config.motif_len = *o.motif_len;
  if (o.decoys) config.decoy_motifs = *o.decoys;
  if (o.mutation_rate) config.mutation_rate = *o.mutation_rate;
  if (o.train_size) config.train_size = *o.train_size;
  if (o.tune_size) config.tune_size = *o.tune_size;
  if (o.test_size) config.test_size = *o.test_size;
  if (o.noise_sigma) config.noise_sigma = *o.noise_sigma;
  config.seed = o.seed;
  const GeneratedDataset data = generate_dataset(config);
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  save_dataset(data.train.data, dir / "train.tsv");
  save_dataset(data.tune.data, dir / "tune.tsv");
  save_dataset(data.test.data, dir / "test.tsv");
  write_file(dir / "provenance.json", provenance_json(data));
  return 0;
}

int run_train(const TrainOptions& o) {
  StructureSearchConfig search;
  search.template_kind = template_kind_from_string(o.template_name);
  search.motif_width = o.motif_width;
  search.max_motifs = o.max_motifs;
  auto& tc = search.train;
  tc.alphabet = Alphabet(o.alphabet);
  tc.learner = learner_from_string(o.learner);
  tc.use_intercept = o.intercept == "on";
  tc.init = init_mode_from_string(o.init);
  tc.restarts = o.restarts;
  tc.max_iterations = o.max_iterations;
  tc.tolerance = o.tolerance;
  tc.visit_cap = o.visit_cap;
  tc.lattice_budget = o.lattice_budget;
  tc.seed = o.seed;
  if (o.verbose) {
    tc.log = &std::cerr;
    search.log = &std::cerr;
  }
  const Dataset train = load_dataset(o.train_path, tc.alphabet);
  const Dataset tune = load_dataset(o.tune_path, tc.alphabet);
  const auto result = structure_search(search, train, tune);
  if (o.out_path.empty()) {
    std::cout << model_to_json(result.model);
  } else {
    save_model(result.model, o.out_path);
  }
  return 0;
}

int run_predict(const PredictOptions& o) {
  const TrainedModel model = load_model(o.model_path);
  std::istringstream in(read_file(o.input_path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::string sequence = line.substr(0, line.find('\t'));
    try {
      std::cout << format_double(predict(model, sequence)) << '\n';
    } catch (const Error& e) {
      rethrow_with_context(e, o.input_path + " line " + std::to_string(line_no));
    }
  }
  return 0;
}

int run_eval(const EvalOptions& o) {
  nlohmann::json out;
  if (!o.model_path.empty()) {
    const TrainedModel model = load_model(o.model_path);
    const Dataset test = load_dataset(o.test_path, model.params.alphabet());
    out = {{"predictor", "model"}, {"count", test.size()}, {"mae", evaluate_mae(model, test)}};
  } else {
    const Alphabet alphabet(o.alphabet);
    const MeanBaseline baseline = mean_baseline(load_dataset(o.baseline_train, alphabet));
    const Dataset test = load_dataset(o.test_path, alphabet);
    out = {{"predictor", "mean_baseline"},
           {"mean", baseline.mean},
           {"count", test.size()},
           {"mae", evaluate_mae(baseline, test)}};
  }
  std::cout << out.dump() << '\n';
  return 0;
}

int run_experiment_command(const ExperimentOptions& o) {
  ExperimentSpec spec = experiment_spec_from_json(read_file(o.spec_path));
  spec.seed = o.seed;
  if (o.workers) spec.workers = *o.workers;
  const auto results = run_experiment(spec, o.verbose ? &std::cerr : nullptr);
  const std::string csv = results_csv(results);
  if (o.out_path.empty()) {
    std::cout << csv;
  } else {
    write_file(o.out_path, csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequence-to-response regression with path-aggregate HMMs"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic train/tune/test dataset");
  gen_cmd->add_option("--config", gen.config_path, "Synthetic config JSON");
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory");
  gen_cmd->add_option("--seed", gen.seed, "Master seed")->required();
  gen_cmd->add_option("--seq-len", gen.seq_len);
  gen_cmd->add_option("--motif-len", gen.motif_len);
  gen_cmd->add_option("--decoys", gen.decoys);
  gen_cmd->add_option("--mutation-rate", gen.mutation_rate);
  gen_cmd->add_option("--train-size", gen.train_size);
  gen_cmd->add_option("--tune-size", gen.tune_size);
  gen_cmd->add_option("--test-size", gen.test_size);
  gen_cmd->add_option("--noise-sigma", gen.noise_sigma);

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model with structure search");
  train_cmd->add_option("--train", train.train_path, "Training TSV")->required();
  train_cmd->add_option("--tune", train.tune_path, "Tuning TSV")->required();
  train_cmd->add_option("--out", train.out_path, "Model file (stdout if omitted)");
  train_cmd->add_option("--seed", train.seed, "Master seed")->required();
  train_cmd->add_option("--alphabet", train.alphabet);
  train_cmd->add_option("--learner", train.learner)
      ->check(CLI::IsMember({"path-aggregate", "two-phase"}));
  train_cmd->add_option("--template", train.template_name)
      ->check(CLI::IsMember({"occurrence", "arrangement"}));
  train_cmd->add_option("--motif-width", train.motif_width);
  train_cmd->add_option("--max-motifs", train.max_motifs);
  train_cmd->add_option("--restarts", train.restarts);
  train_cmd->add_option("--intercept", train.intercept)->check(CLI::IsMember({"on", "off"}));
  train_cmd->add_option("--init", train.init)
      ->check(CLI::IsMember({"sampled", "random", "uniform"}));
  train_cmd->add_option("--max-iterations", train.max_iterations);
  train_cmd->add_option("--tolerance", train.tolerance);
  train_cmd->add_option("--visit-cap", train.visit_cap);
  train_cmd->add_option("--lattice-budget", train.lattice_budget);
  train_cmd->add_flag("-v,--verbose", train.verbose, "Training logs on stderr");

  PredictOptions pred;
  auto* predict_cmd = app.add_subcommand("predict", "Predict responses, one per input line");
  predict_cmd->add_option("--model", pred.model_path)->required();
  predict_cmd->add_option("--input", pred.input_path, "Sequences, optionally TSV")->required();

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Test-set mean absolute error");
  auto* model_opt = eval_cmd->add_option("--model", eval.model_path);
  auto* base_opt = eval_cmd->add_option("--baseline-train", eval.baseline_train,
                                        "Evaluate the training-mean baseline instead");
  model_opt->excludes(base_opt);
  eval_cmd->add_option("--test", eval.test_path)->required();
  eval_cmd->add_option("--alphabet", eval.alphabet, "Alphabet for the baseline");

  ExperimentOptions exp;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a sweep; writes CSV");
  exp_cmd->add_option("--spec", exp.spec_path, "Experiment spec JSON")->required();
  exp_cmd->add_option("--seed", exp.seed, "Master seed")->required();
  exp_cmd->add_option("--out", exp.out_path, "CSV file (stdout if omitted)");
  exp_cmd->add_option("--workers", exp.workers);
  exp_cmd->add_flag("-v,--verbose", exp.verbose, "Progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(train);
    if (*predict_cmd) return run_predict(pred);
    if (*eval_cmd) {
      if (eval.model_path.empty() == eval.baseline_train.empty()) {
        print_error("usage", "eval needs exactly one of --model and --baseline-train");
        return 2;
      }
      return run_eval(eval);
    }
    if (*exp_cmd) return run_experiment_command(exp);
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
