// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cli_util.hpp"
#include "flmens/deep.hpp"
#include "flmens/eval.hpp"
#include "flmens/semi.hpp"
#include "flmens/shallow.hpp"
#include "flmens/synth.hpp"
#include "gradient_check.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace flmens;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* name;
  std::function<Outcome()> check;
};

template <class... T>
std::string cat(const T&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

Outcome shallow_oracle() {
  CounterRng rng(2024, 1);
  std::size_t mismatches = 0;
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < 50; ++t) {
    const int c = t % 2 == 0 ? 2 : 3;
    const std::vector<oracle::Table> probs{testutil::random_probs(rng, 50, c), testutil::random_probs(rng, 50, c)};
    const auto gold = testutil::random_labels(rng, 50, c);
    const auto input = testutil::make_input(probs, gold, c);
    AlphaSearchOptions options;
    options.grid_resolution = 100;
    options.seed = static_cast<std::uint64_t>(t);
    if (optimize_alpha(input, options).loss != oracle::lattice_min_loss(probs, gold, 100)) ++mismatches;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {mismatches == 0 && seconds < 5.0, cat("mismatches=", mismatches, "/50 runtime=", seconds, "s")};
}

Outcome complementary_experts() {
  const auto scenario = default_scenario(ScenarioKind::kComplementaryExperts, 1);
  const auto input = generate_scenario(scenario);
  const auto result = optimize_alpha(input, AlphaSearchOptions{});
  const double half = scenario.m / 2.0;
  const double floor = half * (1.0 - 1.0 / scenario.c - 0.1);
  bool singles_ok = true;
  std::string singles;
  for (const auto& p : input.probs) {
    const auto loss = zero_one_loss(input.dataset.labels, predict(p.table.values));
    singles_ok = singles_ok && loss <= half && static_cast<double>(loss) >= floor;
    singles += cat(" ", p.model_id, "=", loss);
  }
  return {result.loss == 0 && singles_ok,
          cat("ensemble loss=", result.loss, " single losses:", singles, " (band [", floor, ", ", half, "])")};
}

Outcome gradient_check() {
  CounterRng rng(7, 3);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    auto in = gradcheck::random_instance(rng);
    worst = std::max(worst, gradcheck::max_gradient_error(in));
  }
  return {worst < 1e-4, cat("max relative error=", worst)};
}

Outcome semi_pipeline() {
  const auto input = generate_scenario(default_scenario(ScenarioKind::kSeparableEmbeddings, 7));
  const auto plain = run_semi(input, TrainConfig{});
  const auto full = static_cast<int>(concat_embeddings(input).cols());
  const auto reduced = run_semi(input, TrainConfig{}, full);
  const double diff = std::abs(plain.accuracy - reduced.accuracy);
  return {plain.accuracy >= 0.99 && plain.epochs_run() <= 200 && diff <= 0.01,
          cat("accuracy=", plain.accuracy, " epochs=", plain.epochs_run(), " pca(", full, ") accuracy=",
              reduced.accuracy)};
}

Outcome affine_reward() {
  CounterRng rng(31, 4);
  int affine_failures = 0;
  int oracle_failures = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 5 + rng.below(60);
    const auto d = static_cast<Eigen::Index>(2 + rng.below(4));
    const Matrix aligned = testutil::random_matrix(rng, static_cast<Eigen::Index>(m), d);
    const auto ids = testutil::make_ids(m);
    const KnowledgePair knowledge{{"", ids, testutil::random_matrix(rng, static_cast<Eigen::Index>(m), d)},
                                  {"", ids, testutil::random_matrix(rng, static_cast<Eigen::Index>(m), d)}};
    const auto gold = testutil::random_labels(rng, m, 3);
    const auto pred = testutil::random_labels(rng, m, 3);
    const auto r = [&](double b) { return reward(knowledge_weights(Beta(b), knowledge, aligned), pred, gold); };
    if (std::abs(r(0.5) - (r(0.0) + r(1.0)) / 2.0) > 1e-9) ++affine_failures;

    // Exhaustive grid oracle: first grid point attaining the maximum.
    double best = -1.0;
    double best_beta = -1.0;
    for (int k = 0; k <= 100; ++k) {
      const double v = r(k / 100.0);
      if (v > best + 1e-9) {
        best = v;
        best_beta = k / 100.0;
      }
    }
    const auto choice = optimize_beta(knowledge, aligned, pred, gold, 0.01);
    if (choice.beta.value() != best_beta || std::abs(choice.reward - best) > 1e-9) ++oracle_failures;
  }
  return {affine_failures == 0 && oracle_failures == 0,
          cat("affine failures=", affine_failures, "/100 grid-oracle mismatches=", oracle_failures, "/100")};
}

Outcome deep_vs_semi() {
  int wins = 0;
  int identical = 0;
  std::string accs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto input = generate_scenario(default_scenario(ScenarioKind::kKnowledgeAligned, seed));
    TrainConfig base;
    base.seed = seed;
    DeepTrainConfig config;
    config.base = base;
    config.rounds = base.epochs;
    const auto semi = run_semi(input, base);
    const auto deep = train_deep(input, config);
    if (deep.accuracy >= semi.accuracy) ++wins;
    accs += cat(" ", deep.accuracy, ">=", semi.accuracy);

    config.rl_weight = 0.0;
    const auto zero = train_deep(input, config);
    bool same = zero.classifier == semi.classifier && zero.trace.size() == semi.trace.size();
    for (std::size_t e = 0; same && e < semi.trace.size(); ++e) {
      same = zero.trace[e].train_ce == semi.trace[e].train_ce && zero.trace[e].zero_one == semi.trace[e].zero_one;
    }
    if (same) ++identical;
  }
  return {wins >= 4 && identical == 5, cat("deep>=semi on ", wins, "/5 [", accs, " ] lambda=0 identical ", identical, "/5")};
}

Outcome binomial_exactness() {
  double worst = 0.0;
  const std::pair<unsigned, unsigned> rates[] = {{1, 4}, {1, 2}, {3, 4}};
  for (auto [num, den] : rates) {
    for (unsigned m = 0; m <= 20; ++m) {
      for (unsigned k = 0; k <= m; ++k) {
        const double p = binomial_test_one_tailed(k, m, static_cast<double>(num) / den);
        worst = std::max(worst, std::abs(p - oracle::binomial_upper_tail_exact(k, m, num, den)));
      }
    }
  }
  const double corner = binomial_test_one_tailed(10, 10, 0.5);
  return {worst <= 1e-12 && std::abs(corner - 9.765625e-4) <= 1e-15,
          cat("max abs error=", worst, " P(X>=10; 10, 0.5)=", corner)};
}

Outcome determinism_and_format() {
  testutil::TempDir dir("acceptance");
  std::vector<std::string> failures;
  const auto data = dir.path() / "data";
  const auto m = cli::quote((data / "manifest.json").string());
  if (cli::run("synth C --seed 5 --out " + cli::quote(data.string())).exit_code != 0) failures.push_back("synth setup");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"validate", "validate " + m},
      {"shallow", "shallow " + m + " --seed 1"},
      {"semi", "semi " + m + " --seed 1 --epochs 50"},
      {"deep", "deep " + m + " --seed 1 --epochs 50"},
      // Uses the predictions written by the first shallow run above.
      {"eval", "eval " + m + " --baseline model1 --pred " + cli::quote((dir.path() / "shallow0" / "shallow-predictions.csv").string())},
      {"synth", "synth D --seed 3"},
  };
  for (const auto& [name, args] : commands) {
    std::string first;
    for (int run = 0; run < 2; ++run) {
      const auto out = dir.path() / cat(name, run);
      const auto r = cli::run(args + " --out " + cli::quote(out.string()));
      const std::string bytes = cli::slurp(out / (name + "-report.json"));
      if (r.exit_code != 0 || bytes.empty()) {
        failures.push_back(name + " exit " + std::to_string(r.exit_code));
        break;
      }
      if (run == 0) {
        first = bytes;
      } else if (bytes != first) {
        failures.push_back(name + " differs");
      }
    }
  }

  for (auto kind : {ScenarioKind::kComplementaryExperts, ScenarioKind::kSeparableEmbeddings,
                    ScenarioKind::kKnowledgeAligned, ScenarioKind::kAdversarialKnowledge}) {
    const auto expected = generate_scenario(default_scenario(kind, 9));
    const auto out = dir.path() / cat("roundtrip-", static_cast<int>(kind));
    const auto loaded = load_manifest(generate(default_scenario(kind, 9), out));
    bool same = loaded.dataset.ids == expected.dataset.ids && loaded.dataset.labels == expected.dataset.labels &&
                loaded.num_classes() == expected.num_classes() && loaded.num_models() == expected.num_models() &&
                loaded.knowledge.has_value();
    for (std::size_t l = 0; same && l < expected.num_models(); ++l) {
      same = loaded.probs[l].table.values == expected.probs[l].table.values &&
             loaded.embeddings[l].table.values == expected.embeddings[l].table.values &&
             loaded.probs[l].table.ids == expected.probs[l].table.ids;
    }
    same = same && loaded.knowledge->wiki.values == expected.knowledge->wiki.values &&
           loaded.knowledge->commonsense.values == expected.knowledge->commonsense.values;
    if (!same) failures.push_back(std::string("round-trip ") + scenario_name(kind));
  }

  std::string detail = "6 subcommands rerun byte-identical, 4 scenarios round-trip bit-exact";
  if (!failures.empty()) {
    detail = "failures:";
    for (const auto& f : failures) detail += " [" + f + "]";
  }
  return {failures.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"shallow-oracle-equivalence", shallow_oracle},
      {"complementary-experts", complementary_experts},
      {"gradient-check", gradient_check},
      {"semi-pipeline", semi_pipeline},
      {"affine-reward-law", affine_reward},
      {"deep-vs-semi", deep_vs_semi},
      {"binomial-exactness", binomial_exactness},
      {"determinism-and-format", determinism_and_format},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, cat("exception: ", e.what())};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
