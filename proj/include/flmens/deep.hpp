#pragma once

// Deep ensemble: per-example knowledge similarity rewards and the
// reward-compensated training loop around the semi classifier.
//
// Similarities are rescaled cosines, s = (cos + 1) / 2, so every reward
// weight lies in [0, 1]. For fixed predictions R(beta) is affine in beta.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flmens/classifier.hpp"
#include "flmens/data.hpp"
#include "flmens/pca.hpp"
#include "flmens/semi.hpp"
#include "flmens/shallow.hpp"

namespace flmens {

class Beta {
 public:
  explicit Beta(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
  }
  double value() const noexcept { return value_; }
  friend bool operator==(const Beta&, const Beta&) = default;

 private:
  double value_;
};

template <class A, class B>
double cosine_sim(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine of vectors with different dimensions");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine similarity of a zero vector");
  const double c = a.cwiseProduct(b).sum() / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

// Projector mapping concatenated ensemble embeddings into the knowledge
// space: PCA to d_K components, after zero-padding to d_K columns when the
// concatenation is narrower.
inline PCAProjector fit_alignment(const Matrix& ensemble, Eigen::Index knowledge_dim) {
  if (ensemble.cols() >= knowledge_dim) return fit_pca(ensemble, knowledge_dim);
  Matrix padded = Matrix::Zero(ensemble.rows(), knowledge_dim);
  padded.leftCols(ensemble.cols()) = ensemble;
  return fit_pca(padded, knowledge_dim);
}

inline Matrix align_rows(const Matrix& ensemble, const PCAProjector& projector) {
  if (ensemble.cols() > projector.input_dim()) {
    throw std::invalid_argument("ensemble embedding wider than the alignment projector");
  }
  if (ensemble.cols() == projector.input_dim()) return project(projector, ensemble);
  Matrix padded = Matrix::Zero(ensemble.rows(), projector.input_dim());
  padded.leftCols(ensemble.cols()) = ensemble;
  return project(projector, padded);
}

inline Vector align_embedding(const Vector& ensemble_row, const PCAProjector& projector) {
  return align_rows(Matrix(ensemble_row.transpose()), projector).row(0).transpose();
}

// Rescaled similarities of each knowledge row to its aligned ensemble row.
struct KnowledgeSimilarities {
  Vector wiki;
  Vector commonsense;

  std::size_t size() const noexcept { return static_cast<std::size_t>(wiki.size()); }
};

inline KnowledgeSimilarities knowledge_similarities(const KnowledgePair& knowledge, const Matrix& aligned) {
  const Eigen::Index m = aligned.rows();
  if (knowledge.wiki.values.rows() != m || knowledge.commonsense.values.rows() != m) {
    throw std::invalid_argument("knowledge and aligned embeddings differ in row count");
  }
  if (knowledge.dim() != aligned.cols() || knowledge.commonsense.values.cols() != aligned.cols()) {
    throw std::invalid_argument("knowledge and aligned embeddings differ in dimension");
  }
  KnowledgeSimilarities s{Vector(m), Vector(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    if (aligned.row(i).isZero(0.0)) {
      const auto& ids = knowledge.wiki.ids;
      const std::string id = static_cast<std::size_t>(i) < ids.size() ? ids[i] : std::to_string(i);
      throw std::domain_error("aligned ensemble embedding of example '" + id + "' is zero");
    }
    s.wiki(i) = (cosine_sim(knowledge.wiki.values.row(i), aligned.row(i)) + 1.0) / 2.0;
    s.commonsense(i) = (cosine_sim(knowledge.commonsense.values.row(i), aligned.row(i)) + 1.0) / 2.0;
  }
  return s;
}

struct RewardWeights {
  std::vector<double> w;
};

inline RewardWeights knowledge_weights(Beta beta, const KnowledgeSimilarities& sims) {
  const double b = beta.value();
  RewardWeights out;
  out.w.resize(sims.size());
  for (std::size_t i = 0; i < out.w.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out.w[i] = b * sims.wiki(k) + (1.0 - b) * sims.commonsense(k);
  }
  return out;
}

inline RewardWeights knowledge_weights(Beta beta, const KnowledgePair& knowledge, const Matrix& aligned) {
  return knowledge_weights(beta, knowledge_similarities(knowledge, aligned));
}

inline double reward(const RewardWeights& weights, std::span<const int> predicted, std::span<const int> gold) {
  if (weights.w.size() != predicted.size() || predicted.size() != gold.size()) {
    throw std::invalid_argument("reward inputs differ in length");
  }
  double r = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == predicted[i]) r += weights.w[i];
  }
  return r;
}

struct BetaChoice {
  Beta beta{0.0};
  double reward = 0.0;
};

// Grid points k / K, K = round(1 / step); the step must divide 1.
inline std::vector<double> beta_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("beta grid step must be in (0, 1]");
  const double k = std::round(1.0 / step);
  if (std::abs(k * step - 1.0) > 1e-9) throw std::invalid_argument("beta grid step must divide 1");
  const auto K = static_cast<int>(k);
  std::vector<double> grid(static_cast<std::size_t>(K) + 1);
  for (int i = 0; i <= K; ++i) grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / K;
  return grid;
}

// Smallest grid beta maximizing R(beta). A later grid point must beat the
// running best by more than 1e-12 relative, so rounding noise on a constant
// R does not move the choice off beta = 0.
inline BetaChoice optimize_beta(const KnowledgeSimilarities& sims, std::span<const int> predicted,
                                std::span<const int> gold, double grid_step) {
  std::optional<BetaChoice> best;
  for (double b : beta_grid(grid_step)) {
    const Beta beta(b);
    const double r = reward(knowledge_weights(beta, sims), predicted, gold);
    if (!best || r > best->reward + 1e-12 * std::max(1.0, std::abs(best->reward))) best = BetaChoice{beta, r};
  }
  return *best;
}

inline BetaChoice optimize_beta(const KnowledgePair& knowledge, const Matrix& aligned, std::span<const int> predicted,
                                std::span<const int> gold, double grid_step) {
  return optimize_beta(knowledge_similarities(knowledge, aligned), predicted, gold, grid_step);
}

struct DeepTrainConfig {
  TrainConfig base;
  double beta_grid_step = 0.01;
  double rl_weight = 1.0;  // lambda
  int rounds = 200;

  void validate() const {
    base.validate();
    beta_grid(beta_grid_step);
    if (!(rl_weight >= 0.0) || !std::isfinite(rl_weight)) throw std::invalid_argument("rl weight must be >= 0");
    if (rounds < 1) throw std::invalid_argument("rounds must be positive");
  }
};

// Per-example loss multipliers 1 + lambda * g_i with g_i = 1 - w_i for
// correctly predicted examples and g_i = w_i for mistakes.
inline std::vector<double> compensator_weights(const RewardWeights& weights, std::span<const int> predicted,
                                               std::span<const int> gold, double rl_weight) {
  std::vector<double> out(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const double g = predicted[i] == gold[i] ? 1.0 - weights.w[i] : weights.w[i];
    out[i] = 1.0 + rl_weight * g;
  }
  return out;
}

struct DeepRound {
  int round = 0;  // 1-based
  double beta = 0.0;
  double reward = 0.0;
  double train_ce = 0.0;
  std::size_t zero_one = 0;
};

struct DeepResult {
  SmallClassifier classifier;
  Beta beta{0.0};
  double reward = 0.0;
  std::vector<int> predicted;
  std::size_t loss = 0;
  double accuracy = 0.0;
  std::vector<DeepRound> trace;
};

// Alternates, for `rounds` rounds: predict, choose beta on the current
// predictions, recompute reward weights, and run one compensated epoch.
// The classifier features are the same as run_semi's for the same pca_dim,
// so rl_weight = 0 reproduces run_semi with epochs = rounds exactly.
inline DeepResult train_deep(const EnsembleInput& input, const DeepTrainConfig& config,
                             std::optional<int> pca_dim = {}, std::optional<SmallClassifier> initial = {}) {
  config.validate();
  if (!input.knowledge) throw std::invalid_argument("deep ensemble needs knowledge embeddings");
  const auto& gold = input.dataset.labels;

  const Matrix concatenated = concat_embeddings(input);
  const auto alignment = fit_alignment(concatenated, input.knowledge->dim());
  const auto sims = knowledge_similarities(*input.knowledge, align_rows(concatenated, alignment));

  const auto prepared = semi_features(input, pca_dim);
  ClassifierTrainer trainer =
      initial ? ClassifierTrainer(prepared.features, gold, std::move(*initial), config.base)
              : ClassifierTrainer(prepared.features, gold, input.num_classes(), config.base);

  DeepResult result;
  for (int round = 1; round <= config.rounds; ++round) {
    const auto predicted = predict_classifier(trainer.model(), prepared.features).classes;
    const auto choice = optimize_beta(sims, predicted, gold, config.beta_grid_step);
    const auto weights = knowledge_weights(choice.beta, sims);
    const auto multipliers = compensator_weights(weights, predicted, gold, config.rl_weight);
    EpochStats stats;
    try {
      stats = trainer.run_epoch(multipliers);
    } catch (const TrainingError& e) {
      throw TrainingError("round " + std::to_string(round) + ": " + e.what());
    }
    result.trace.push_back({round, choice.beta.value(), choice.reward, stats.train_ce, stats.zero_one});
  }

  result.classifier = trainer.model();
  result.predicted = predict_classifier(result.classifier, prepared.features).classes;
  result.loss = zero_one_loss(gold, result.predicted);
  result.accuracy = static_cast<double>(input.num_examples() - result.loss) / static_cast<double>(input.num_examples());
  const auto final_choice = optimize_beta(sims, result.predicted, gold, config.beta_grid_step);
  result.beta = final_choice.beta;
  result.reward = final_choice.reward;
  return result;
}

}  // namespace flmens
