// Command-line front end: validate, shallow, semi, deep, eval, synth.
//
// Exit codes: 0 success, 1 validation/data failure, 2 usage error.
// Log verbosity comes from FLMENS_LOG (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "flmens/classifier.hpp"
#include "flmens/csv.hpp"
#include "flmens/data.hpp"
#include "flmens/deep.hpp"
#include "flmens/eval.hpp"
#include "flmens/report.hpp"
#include "flmens/semi.hpp"
#include "flmens/shallow.hpp"
#include "flmens/synth.hpp"

namespace fs = std::filesystem;
using namespace flmens;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_st("flmens");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("FLMENS_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

void write_report(const fs::path& out_dir, const std::string& name, const Json& report) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const auto path = out_dir / (name + "-report.json");
  csv::write_text(path, report.dump(2) + "\n");
  spdlog::info("wrote {}", path.string());
}

void write_predictions(const fs::path& out_dir, const std::string& name, const LabeledDataset& ds,
                       const std::vector<int>& predicted) {
  const auto path = out_dir / (name + "-predictions.csv");
  csv::write_text(path, csv::format_labels(ds.ids, predicted));
  spdlog::info("wrote {}", path.string());
}

void write_classifier(const fs::path& out_dir, const std::string& name, const SmallClassifier& model) {
  const auto path = out_dir / (name + "-classifier.json");
  csv::write_text(path, classifier_to_json(model).dump(2) + "\n");
  spdlog::info("wrote {}", path.string());
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void print_rows(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  for (const auto& [k, v] : rows) std::cout << std::left << std::setw(static_cast<int>(width)) << k << " | " << v << '\n';
}

std::string join_alpha(const std::vector<double>& alpha) {
  std::string out = "(";
  for (std::size_t i = 0; i < alpha.size(); ++i) out += (i ? ", " : "") + fixed(alpha[i], 4);
  return out + ")";
}

struct TrainFlags {
  std::optional<int> pca;
  TrainConfig config;
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
  cmd->add_option("--pca", flags.pca, "Reduce the concatenated embedding to DIM principal components");
  cmd->add_option("--hidden", flags.config.hidden_dim, "Hidden units")->capture_default_str();
  cmd->add_option("--lr", flags.config.learning_rate, "Learning rate")->capture_default_str();
  cmd->add_option("--epochs", flags.config.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch", flags.config.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--init-scale", flags.config.weight_init_scale, "Weight init scale")->capture_default_str();
  cmd->add_option("--seed", flags.config.seed, "Seed for init and shuffling")->capture_default_str();
}

int run_validate(const fs::path& manifest, const fs::path& out_dir) {
  ValidationReport report;
  try {
    report = validate_alignment(read_manifest(manifest));
  } catch (const DataError& e) {
    report.push_back({e.file(), e.line(), e.what()});
  }
  write_report(out_dir, "validate", to_json(report));
  if (report.empty()) {
    std::cout << manifest.string() << ": valid, 0 violations\n";
    return kExitOk;
  }
  for (const auto& v : report) std::cout << v.to_string() << '\n';
  std::cout << report.size() << " violation(s)\n";
  return kExitInvalid;
}

int run_shallow(const fs::path& manifest, const fs::path& out_dir, const AlphaSearchOptions& options,
                const std::string& split_mode, double holdout_frac) {
  const auto input = load_manifest(manifest);
  std::optional<HoldoutSplit> split;
  if (split_mode == "holdout") split = make_holdout_split(input.num_examples(), holdout_frac, options.seed);
  auto result = split ? optimize_alpha(input, options, std::span<const std::size_t>(split->train))
                      : optimize_alpha(input, options);
  const auto predicted = predict(combine_probs(result.weights, input));

  Json report = to_json(result);
  report["split"] = split_mode;
  if (split) {
    std::vector<int> gold;
    std::vector<int> pred;
    for (std::size_t i : split->holdout) {
      gold.push_back(input.dataset.labels[i]);
      pred.push_back(predicted[i]);
    }
    const auto loss = zero_one_loss(gold, pred);
    report["tuning_loss"] = result.loss;
    report["tuning_size"] = split->train.size();
    report["holdout_size"] = split->holdout.size();
    report["loss"] = loss;
    report["accuracy"] = gold.empty() ? 0.0 : accuracy(gold, pred);
  } else {
    report["tuning_size"] = input.num_examples();
  }
  write_report(out_dir, "shallow", report);
  write_predictions(out_dir, "shallow", input.dataset, predicted);
  print_rows({{"strategy", "shallow"},
              {"alpha", join_alpha(result.weights.values())},
              {"split", split_mode},
              {"loss", std::to_string(report["loss"].get<std::size_t>())},
              {"accuracy", fixed(report["accuracy"].get<double>(), 4)},
              {"evaluations", std::to_string(result.search_trace.size())}});
  return kExitOk;
}

int run_semi_cmd(const fs::path& manifest, const fs::path& out_dir, const TrainFlags& flags) {
  const auto input = load_manifest(manifest);
  const auto result = run_semi(input, flags.config, flags.pca);
  write_report(out_dir, "semi", to_json(result));
  write_predictions(out_dir, "semi", input.dataset, result.predicted);
  write_classifier(out_dir, "semi", result.classifier);
  print_rows({{"strategy", "semi"},
              {"loss", std::to_string(result.loss)},
              {"accuracy", fixed(result.accuracy, 4)},
              {"epochs_run", std::to_string(result.epochs_run())},
              {"final_train_ce", fixed(result.final_train_ce(), 6)}});
  return kExitOk;
}

int run_deep_cmd(const fs::path& manifest, const fs::path& out_dir, const TrainFlags& flags, double lambda,
                 std::optional<int> rounds, double beta_step, const std::optional<std::string>& init_path) {
  const auto input = load_manifest(manifest);
  if (!input.knowledge) throw DataError(manifest.string(), 0, "manifest has no knowledge embeddings");
  DeepTrainConfig config;
  config.base = flags.config;
  config.rl_weight = lambda;
  config.beta_grid_step = beta_step;
  config.rounds = rounds.value_or(flags.config.epochs);
  std::optional<SmallClassifier> initial;
  if (init_path) {
    try {
      initial = classifier_from_json(Json::parse(csv::read_file(*init_path)));
    } catch (const Json::exception& e) {
      throw DataError(*init_path, 0, e.what());
    } catch (const std::invalid_argument& e) {
      throw DataError(*init_path, 0, e.what());
    }
  }
  const auto result = train_deep(input, config, flags.pca, std::move(initial));
  write_report(out_dir, "deep", to_json(result));
  write_predictions(out_dir, "deep", input.dataset, result.predicted);
  write_classifier(out_dir, "deep", result.classifier);
  print_rows({{"strategy", "deep"},
              {"beta", fixed(result.beta.value(), 2)},
              {"reward", fixed(result.reward, 4)},
              {"loss", std::to_string(result.loss)},
              {"accuracy", fixed(result.accuracy, 4)},
              {"rounds", std::to_string(result.trace.size())}});
  return kExitOk;
}

StrategyPredictions read_prediction_file(const std::string& spec, const LabeledDataset& ds) {
  std::string name;
  fs::path path;
  if (const auto eq = spec.find('='); eq != std::string::npos) {
    name = spec.substr(0, eq);
    path = spec.substr(eq + 1);
  } else {
    path = spec;
    name = path.stem().string();
    const std::string suffix = "-predictions";
    if (name.size() > suffix.size() && name.ends_with(suffix)) name.resize(name.size() - suffix.size());
  }
  const auto file = csv::read_labels(path);
  if (file.ids.size() != ds.size()) {
    throw DataError(path.string(), 0, "expected " + std::to_string(ds.size()) + " predictions, found " +
                                          std::to_string(file.ids.size()));
  }
  StrategyPredictions out{name, {}};
  for (std::size_t i = 0; i < file.ids.size(); ++i) {
    if (file.ids[i] != ds.ids[i]) {
      throw DataError(path.string(), i + 2, "id '" + file.ids[i] + "' does not match labels id '" + ds.ids[i] + "'");
    }
    const long long v = file.labels[i];
    if (v < 0 || v >= ds.num_classes) throw DataError(path.string(), i + 2, "predicted class out of range");
    out.predicted.push_back(static_cast<int>(v));
  }
  return out;
}

int run_eval(const fs::path& manifest, const fs::path& out_dir, const std::vector<std::string>& pred_files,
             const std::string& baseline, const std::string& test_name) {
  const auto input = load_manifest(manifest);
  std::vector<StrategyPredictions> results;
  for (const auto& p : input.probs) results.push_back({p.model_id, predict(p.table.values)});
  for (const auto& f : pred_files) results.push_back(read_prediction_file(f, input.dataset));
  const auto test = test_name == "mcnemar" ? SignificanceTest::kMcNemar : SignificanceTest::kBinomial;
  ComparisonReport report;
  try {
    report = compare(results, input.dataset.labels, baseline, test);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  write_report(out_dir, "eval", to_json(report));
  std::string dataset = fs::absolute(manifest).parent_path().filename().string();
  if (dataset.empty()) dataset = "dataset";
  std::cout << format_table(report, dataset);
  return kExitOk;
}

int run_synth(const std::string& scenario_arg, const fs::path& out_dir, std::uint64_t seed, std::optional<int> m,
              std::optional<int> c, const std::vector<int>& dims, std::optional<int> knowledge_dim) {
  const auto kind = parse_scenario_kind(scenario_arg);
  if (!kind) throw UsageError("unknown scenario '" + scenario_arg + "' (expected A, B, C or D)");
  auto scenario = default_scenario(*kind, seed);
  if (m) scenario.m = *m;
  if (c) scenario.c = *c;
  if (!dims.empty()) scenario.dims = dims;
  if (knowledge_dim) scenario.knowledge_dim = *knowledge_dim;
  const auto manifest = generate(scenario, out_dir);
  Json report;
  report["scenario"] = scenario_name(*kind);
  report["seed"] = seed;
  report["m"] = scenario.m;
  report["c"] = scenario.c;
  report["dims"] = scenario.dims;
  report["knowledge_dim"] = scenario.knowledge_dim;
  report["manifest"] = manifest.filename().string();
  write_report(out_dir, "synth", report);
  print_rows({{"scenario", scenario_name(*kind)},
              {"seed", std::to_string(seed)},
              {"manifest", manifest.string()}});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Ensembles of language-model outputs: shallow, semi and deep strategies"};
  app.require_subcommand(1);

  std::string manifest;
  std::string out_dir = ".";

  auto* validate = app.add_subcommand("validate", "Check a manifest and its files");
  validate->add_option("manifest", manifest, "Manifest JSON")->required();
  validate->add_option("--out", out_dir, "Report directory");

  AlphaSearchOptions alpha_options;
  std::string split_mode = "holdout";
  double holdout_frac = 0.2;
  auto* shallow = app.add_subcommand("shallow", "Simplex-weighted probability fusion");
  shallow->add_option("manifest", manifest, "Manifest JSON")->required();
  shallow->add_option("--grid", alpha_options.grid_resolution, "Lattice resolution G")->capture_default_str();
  shallow->add_option("--restarts", alpha_options.random_restarts, "Dirichlet restarts R")->capture_default_str();
  shallow->add_option("--seed", alpha_options.seed, "Seed")->capture_default_str();
  shallow->add_option("--split", split_mode, "Tune on all data (train) or on a split (holdout)")
      ->check(CLI::IsMember({"train", "holdout"}))
      ->capture_default_str();
  shallow->add_option("--holdout-frac", holdout_frac, "Held-out fraction")->check(CLI::Range(0.0, 0.99))->capture_default_str();
  shallow->add_option("--out", out_dir, "Report directory");

  TrainFlags semi_flags;
  auto* semi = app.add_subcommand("semi", "Classifier on concatenated embeddings");
  semi->add_option("manifest", manifest, "Manifest JSON")->required();
  add_train_flags(semi, semi_flags);
  semi->add_option("--out", out_dir, "Report directory");

  TrainFlags deep_flags;
  double lambda = 1.0;
  std::optional<int> rounds;
  double beta_step = 0.01;
  std::optional<std::string> init_classifier;
  auto* deep = app.add_subcommand("deep", "Knowledge-reward compensated classifier");
  deep->add_option("manifest", manifest, "Manifest JSON")->required();
  add_train_flags(deep, deep_flags);
  deep->add_option("--lambda", lambda, "Compensator weight")->capture_default_str();
  deep->add_option("--rounds", rounds, "Training rounds (default: --epochs)");
  deep->add_option("--beta-step", beta_step, "Beta grid step")->capture_default_str();
  deep->add_option("--init-classifier", init_classifier, "Start from a saved classifier JSON");
  deep->add_option("--out", out_dir, "Report directory");

  std::vector<std::string> pred_files;
  std::string baseline;
  std::string test_name = "binomial";
  auto* eval = app.add_subcommand("eval", "Compare strategies against a baseline");
  eval->add_option("manifest", manifest, "Manifest JSON")->required();
  eval->add_option("--pred", pred_files, "Prediction CSVs (id,label), optionally NAME=PATH");
  eval->add_option("--baseline", baseline, "Baseline strategy or model id")->required();
  eval->add_option("--test", test_name, "Significance test")
      ->check(CLI::IsMember({"binomial", "mcnemar"}))
      ->capture_default_str();
  eval->add_option("--out", out_dir, "Report directory");

  std::string scenario;
  std::uint64_t synth_seed = 0;
  std::optional<int> synth_m;
  std::optional<int> synth_c;
  std::vector<int> synth_dims;
  std::optional<int> synth_kdim;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario");
  synth->add_option("scenario", scenario, "A, B, C or D")->required();
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Seed")->required();
  synth->add_option("--m", synth_m, "Examples");
  synth->add_option("--c", synth_c, "Classes");
  synth->add_option("--dims", synth_dims, "Embedding dimension per model");
  synth->add_option("--knowledge-dim", synth_kdim, "Knowledge embedding dimension");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (validate->parsed()) return run_validate(manifest, out_dir);
    if (shallow->parsed()) return run_shallow(manifest, out_dir, alpha_options, split_mode, holdout_frac);
    if (semi->parsed()) return run_semi_cmd(manifest, out_dir, semi_flags);
    if (deep->parsed()) return run_deep_cmd(manifest, out_dir, deep_flags, lambda, rounds, beta_step, init_classifier);
    if (eval->parsed()) return run_eval(manifest, out_dir, pred_files, baseline, test_name);
    if (synth->parsed()) {
      return run_synth(scenario, out_dir, synth_seed, synth_m, synth_c, synth_dims, synth_kdim);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitUsage;
}
