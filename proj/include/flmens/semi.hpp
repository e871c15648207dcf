#pragma once

// Semi ensemble: concatenate every model's sentence embedding, optionally
// reduce with PCA, and train the small classifier on the result.

#include <optional>

#include "flmens/classifier.hpp"
#include "flmens/data.hpp"
#include "flmens/pca.hpp"
#include "flmens/shallow.hpp"

namespace flmens {

struct SemiFeatures {
  Matrix features;
  std::optional<PCAProjector> pca;
};

inline SemiFeatures semi_features(const EnsembleInput& input, std::optional<int> pca_dim) {
  SemiFeatures out;
  Matrix concatenated = concat_embeddings(input);
  if (pca_dim) {
    out.pca = fit_pca(concatenated, *pca_dim);
    out.features = project(*out.pca, concatenated);
  } else {
    out.features = std::move(concatenated);
  }
  return out;
}

struct SemiResult {
  SmallClassifier classifier;
  std::optional<PCAProjector> pca;
  std::vector<int> predicted;
  std::size_t loss = 0;
  double accuracy = 0.0;
  std::vector<EpochStats> trace;

  int epochs_run() const noexcept { return static_cast<int>(trace.size()); }
  double final_train_ce() const noexcept { return trace.empty() ? 0.0 : trace.back().train_ce; }
};

inline SemiResult run_semi(const EnsembleInput& input, const TrainConfig& config, std::optional<int> pca_dim = {}) {
  auto prepared = semi_features(input, pca_dim);
  auto trained = train_classifier(prepared.features, input.dataset, config);
  SemiResult result;
  result.predicted = predict_classifier(trained.model, prepared.features).classes;
  result.loss = zero_one_loss(input.dataset.labels, result.predicted);
  result.accuracy = static_cast<double>(input.num_examples() - result.loss) / static_cast<double>(input.num_examples());
  result.classifier = std::move(trained.model);
  result.pca = std::move(prepared.pca);
  result.trace = std::move(trained.trace);
  return result;
}

}  // namespace flmens
