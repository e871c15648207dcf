// Runs all three strategies on an in-memory synthetic scenario and prints a
// comparison table.
//
//   ./ensemble_demo [seed]

#include <cstdlib>
#include <iostream>

#include "flmens/deep.hpp"
#include "flmens/eval.hpp"
#include "flmens/semi.hpp"
#include "flmens/shallow.hpp"
#include "flmens/synth.hpp"

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  const auto input = flmens::generate_scenario(flmens::default_scenario(flmens::ScenarioKind::kKnowledgeAligned, seed));

  const auto shallow = flmens::optimize_alpha(input, {});
  flmens::TrainConfig config;
  config.seed = seed;
  const auto semi = flmens::run_semi(input, config);
  flmens::DeepTrainConfig deep_config;
  deep_config.base = config;
  deep_config.rounds = config.epochs;
  const auto deep = flmens::train_deep(input, deep_config);

  std::vector<flmens::StrategyPredictions> results;
  for (const auto& p : input.probs) results.push_back({p.model_id, flmens::predict(p.table.values)});
  results.push_back({"ShE", flmens::predict(flmens::combine_probs(shallow.weights, input))});
  results.push_back({"SE", semi.predicted});
  results.push_back({"DE", deep.predicted});

  const auto report = flmens::compare(results, input.dataset.labels, "model2");
  std::cout << flmens::format_table(report, "scenario-C");
  return 0;
}
