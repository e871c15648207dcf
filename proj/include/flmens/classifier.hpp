#pragma once

// The small classifier trained on concatenated embeddings: one rectifier
// hidden layer, softmax output, trained with plain mini-batch gradient
// descent on (optionally per-example weighted) categorical cross-entropy.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flmens/data.hpp"
#include "flmens/error.hpp"
#include "flmens/rng.hpp"
#include "flmens/shallow.hpp"

namespace flmens {

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 200;
  int batch_size = 10;
  std::uint64_t seed = 0;
  int hidden_dim = 8;
  double weight_init_scale = 1.0;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning rate must be positive");
    if (epochs < 1) throw std::invalid_argument("epochs must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
    if (hidden_dim < 1) throw std::invalid_argument("hidden dimension must be positive");
    if (!(weight_init_scale > 0.0) || !std::isfinite(weight_init_scale)) {
      throw std::invalid_argument("weight init scale must be positive");
    }
  }
};

struct SmallClassifier {
  Matrix W1;  // h x d
  Vector b1;  // h
  Matrix W2;  // c x h
  Vector b2;  // c

  Eigen::Index input_dim() const noexcept { return W1.cols(); }
  Eigen::Index hidden_dim() const noexcept { return W1.rows(); }
  Eigen::Index num_classes() const noexcept { return W2.rows(); }

  friend bool operator==(const SmallClassifier& a, const SmallClassifier& b) {
    return a.W1 == b.W1 && a.b1 == b.b1 && a.W2 == b.W2 && a.b2 == b.b2;
  }
};

// Weights uniform in [-s, s] with s = scale / sqrt(fan_in); biases zero.
inline SmallClassifier init_classifier(Eigen::Index input_dim, Eigen::Index hidden_dim, Eigen::Index num_classes,
                                       double scale, std::uint64_t seed) {
  CounterRng rng(seed, 0xC1A5'0000);
  SmallClassifier model;
  const auto fill = [&](Matrix& w, Eigen::Index rows, Eigen::Index cols) {
    w.resize(rows, cols);
    const double s = scale / std::sqrt(static_cast<double>(cols));
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-s, s);
  };
  fill(model.W1, hidden_dim, input_dim);
  model.b1 = Vector::Zero(hidden_dim);
  fill(model.W2, num_classes, hidden_dim);
  model.b2 = Vector::Zero(num_classes);
  return model;
}

inline Matrix classifier_logits(const SmallClassifier& model, const Matrix& X) {
  const Matrix hidden = ((X * model.W1.transpose()).rowwise() + model.b1.transpose()).cwiseMax(0.0);
  return (hidden * model.W2.transpose()).rowwise() + model.b2.transpose();
}

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - top).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

struct ClassifierPrediction {
  std::vector<int> classes;
  Matrix probs;
};

inline ClassifierPrediction predict_classifier(const SmallClassifier& model, const Matrix& X) {
  if (X.cols() != model.input_dim()) {
    throw std::invalid_argument("classifier expects " + std::to_string(model.input_dim()) + " features, got " +
                                std::to_string(X.cols()));
  }
  ClassifierPrediction out;
  out.probs = softmax_rows(classifier_logits(model, X));
  out.classes = predict(out.probs);
  return out;
}

struct ClassifierGradients {
  Matrix W1;
  Vector b1;
  Matrix W2;
  Vector b2;
  double loss = 0.0;  // (1/B) sum_i w_i * CE_i over the batch
};

// Loss and gradients of (1/B) sum_{i in rows} w_i * CE_i, B = rows.size().
// Empty `weights` means w_i = 1.
inline ClassifierGradients weighted_cross_entropy(const SmallClassifier& model, const Matrix& X,
                                                  std::span<const int> labels, std::span<const double> weights,
                                                  std::span<const std::size_t> rows) {
  const auto B = static_cast<Eigen::Index>(rows.size());
  if (B == 0) throw std::invalid_argument("empty batch");
  const Eigen::Index c = model.num_classes();

  Matrix xb(B, X.cols());
  for (Eigen::Index r = 0; r < B; ++r) xb.row(r) = X.row(static_cast<Eigen::Index>(rows[r]));

  const Matrix z1 = (xb * model.W1.transpose()).rowwise() + model.b1.transpose();
  const Matrix a1 = z1.cwiseMax(0.0);
  const Matrix z2 = (a1 * model.W2.transpose()).rowwise() + model.b2.transpose();

  ClassifierGradients g;
  Matrix dz2(B, c);
  for (Eigen::Index r = 0; r < B; ++r) {
    const std::size_t i = rows[r];
    const double w = weights.empty() ? 1.0 : weights[i];
    const double top = z2.row(r).maxCoeff();
    const auto shifted = (z2.row(r).array() - top).eval();
    const double lse = std::log(shifted.exp().sum());
    const int y = labels[i];
    const double ce = lse - shifted(y);
    g.loss += w * ce;
    const double scale = w / static_cast<double>(B);
    dz2.row(r) = (shifted - lse).exp().matrix();
    dz2(r, y) -= 1.0;
    dz2.row(r) *= scale;
  }
  g.loss /= static_cast<double>(B);

  g.W2 = dz2.transpose() * a1;
  g.b2 = dz2.colwise().sum().transpose();
  const Matrix dz1 = ((dz2 * model.W2).array() * (z1.array() > 0.0).cast<double>()).matrix();
  g.W1 = dz1.transpose() * xb;
  g.b1 = dz1.colwise().sum().transpose();
  return g;
}

struct EpochStats {
  int epoch = 0;            // 1-based
  double train_ce = 0.0;    // mean (weighted) cross-entropy over the epoch's batches
  std::size_t zero_one = 0; // training 0-1 loss after the epoch
};

// Stateful mini-batch trainer. The shuffle of epoch e is drawn from a stream
// derived from (seed, e), so runs are reproducible given the config.
class ClassifierTrainer {
 public:
  ClassifierTrainer(const Matrix& features, std::span<const int> labels, int num_classes, const TrainConfig& config)
      : ClassifierTrainer(features, labels, initial_model(features.cols(), num_classes, config), config) {}

  ClassifierTrainer(const Matrix& features, std::span<const int> labels, SmallClassifier initial,
                    const TrainConfig& config)
      : features_(features), labels_(labels.begin(), labels.end()), model_(std::move(initial)), config_(config) {
    config_.validate();
    if (static_cast<std::size_t>(features.rows()) != labels_.size()) {
      throw std::invalid_argument("features and labels differ in length");
    }
    if (labels_.empty()) throw std::invalid_argument("no training examples");
    if (model_.input_dim() != features.cols()) throw std::invalid_argument("classifier input dimension mismatch");
    for (int y : labels_) {
      if (y < 0 || y >= model_.num_classes()) throw std::invalid_argument("label outside classifier range");
    }
  }

  // One pass over the data. `weights` (size m, finite, >= 0) scales each
  // example's loss; empty means unweighted.
  EpochStats run_epoch(std::span<const double> weights = {}) {
    const std::size_t m = labels_.size();
    if (!weights.empty()) {
      if (weights.size() != m) throw std::invalid_argument("per-example weight count mismatch");
      for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("per-example weights must be finite and >= 0");
      }
    }
    ++epoch_;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(config_.seed, 0x5A0F'0000ULL + static_cast<std::uint64_t>(epoch_));
    rng.shuffle(std::span<std::size_t>(order));

    const auto batch = static_cast<std::size_t>(config_.batch_size);
    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < m; start += batch, ++batch_index) {
      const std::size_t len = std::min(batch, m - start);
      const std::span<const std::size_t> rows(order.data() + start, len);
      const auto g = weighted_cross_entropy(model_, features_, labels_, weights, rows);
      if (!std::isfinite(g.loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch_) + ", batch " +
                            std::to_string(batch_index));
      }
      loss_sum += g.loss * static_cast<double>(len);
      const double lr = config_.learning_rate;
      model_.W1 -= lr * g.W1;
      model_.b1 -= lr * g.b1;
      model_.W2 -= lr * g.W2;
      model_.b2 -= lr * g.b2;
    }
    EpochStats stats;
    stats.epoch = epoch_;
    stats.train_ce = loss_sum / static_cast<double>(m);
    stats.zero_one = zero_one_loss(labels_, predict_classifier(model_, features_).classes);
    return stats;
  }

  const SmallClassifier& model() const noexcept { return model_; }
  int epochs_run() const noexcept { return epoch_; }

 private:
  static SmallClassifier initial_model(Eigen::Index input_dim, int num_classes, const TrainConfig& config) {
    config.validate();
    return init_classifier(input_dim, config.hidden_dim, num_classes, config.weight_init_scale, config.seed);
  }

  Matrix features_;
  std::vector<int> labels_;
  SmallClassifier model_;
  TrainConfig config_;
  int epoch_ = 0;
};

struct TrainedClassifier {
  SmallClassifier model;
  std::vector<EpochStats> trace;
};

inline TrainedClassifier train_classifier(const Matrix& features, const LabeledDataset& labels,
                                          const TrainConfig& config, std::span<const double> per_example_weights = {}) {
  ClassifierTrainer trainer(features, labels.labels, labels.num_classes, config);
  TrainedClassifier out;
  out.trace.reserve(static_cast<std::size_t>(config.epochs));
  for (int e = 0; e < config.epochs; ++e) out.trace.push_back(trainer.run_epoch(per_example_weights));
  out.model = trainer.model();
  return out;
}

}  // namespace flmens
