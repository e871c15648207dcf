#pragma once

// Shallow ensemble: a convex combination of per-model class probabilities,
// scored by 0-1 loss, with the mixing weights searched over the simplex.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "flmens/data.hpp"
#include "flmens/rng.hpp"

namespace flmens {

class SimplexWeights {
 public:
  // Entries must be finite and non-negative with a positive sum; the vector
  // is rescaled to sum to 1 unless it already does within 1e-12.
  explicit SimplexWeights(std::vector<double> alpha) : alpha_(std::move(alpha)) {
    if (alpha_.empty()) throw std::invalid_argument("simplex weights must be non-empty");
    double sum = 0.0;
    for (double a : alpha_) {
      if (!std::isfinite(a) || a < 0.0) throw std::invalid_argument("simplex weights must be finite and >= 0");
      sum += a;
    }
    if (!(sum > 0.0)) throw std::invalid_argument("simplex weights must not all be zero");
    if (std::abs(sum - 1.0) > 1e-12) {
      for (double& a : alpha_) a /= sum;
    }
  }

  static SimplexWeights uniform(std::size_t n) {
    return SimplexWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t size() const noexcept { return alpha_.size(); }
  double operator[](std::size_t i) const { return alpha_[i]; }
  const std::vector<double>& values() const noexcept { return alpha_; }

  friend bool operator==(const SimplexWeights&, const SimplexWeights&) = default;

 private:
  std::vector<double> alpha_;
};

// Entry (i, k) = sum_l alpha_l * Prob_l(k | x_i).
inline Matrix combine_probs(const SimplexWeights& weights, const EnsembleInput& input) {
  if (weights.size() != input.num_models()) {
    throw std::invalid_argument("weight count " + std::to_string(weights.size()) + " != model count " +
                                std::to_string(input.num_models()));
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(input.num_examples()), input.num_classes());
  for (std::size_t l = 0; l < weights.size(); ++l) out += weights[l] * input.probs[l].table.values;
  return out;
}

// Row-wise argmax, ties to the lowest class index.
template <class Derived>
std::vector<int> predict(const Eigen::MatrixBase<Derived>& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.cols(); ++k) {
      if (scores(i, k) > scores(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

inline std::size_t zero_one_loss(std::span<const int> gold, std::span<const int> predicted) {
  if (gold.size() != predicted.size()) throw std::invalid_argument("gold and predicted differ in length");
  std::size_t loss = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) loss += gold[i] != predicted[i] ? 1 : 0;
  return loss;
}

struct AlphaCandidate {
  std::vector<double> alpha;
  std::size_t loss = 0;
};

struct ShallowResult {
  SimplexWeights weights;
  std::size_t loss = 0;
  double accuracy = 0.0;
  std::size_t num_evaluated = 0;  // examples the loss was measured on
  double gold_mass = 0.0;         // sum of combined probability on the gold class
  std::vector<AlphaCandidate> search_trace;
};

struct AlphaSearchOptions {
  int grid_resolution = 100;
  int random_restarts = 32;
  std::uint64_t seed = 0;
  // Cap on the random candidate sample used when n > 3.
  std::size_t max_random_candidates = 100000;
};

// Loss and gold-class mass of alpha on a fixed subset of rows.
class AlphaObjective {
 public:
  struct Score {
    std::size_t loss = 0;
    double gold_mass = 0.0;
  };

  AlphaObjective(const EnsembleInput& input, std::span<const std::size_t> rows)
      : input_(input), rows_(rows.begin(), rows.end()) {}

  explicit AlphaObjective(const EnsembleInput& input) : input_(input), rows_(input.num_examples()) {
    std::iota(rows_.begin(), rows_.end(), std::size_t{0});
  }

  std::size_t num_rows() const noexcept { return rows_.size(); }

  Score operator()(std::span<const double> alpha) const {
    const Eigen::Index c = input_.num_classes();
    Vector combined(c);
    Score score;
    for (std::size_t r : rows_) {
      const auto i = static_cast<Eigen::Index>(r);
      combined.setZero();
      for (std::size_t l = 0; l < alpha.size(); ++l) {
        combined += alpha[l] * input_.probs[l].table.values.row(i).transpose();
      }
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < c; ++k) {
        if (combined(k) > combined(best)) best = k;
      }
      const int gold = input_.dataset.labels[r];
      if (best != gold) ++score.loss;
      score.gold_mass += combined(gold);
    }
    return score;
  }

 private:
  const EnsembleInput& input_;
  std::vector<std::size_t> rows_;
};

namespace detail {

inline bool mass_tied(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

// Strict order: lower loss, then higher gold mass, then lexicographically
// smaller alpha.
inline bool better_alpha(const AlphaObjective::Score& a, std::span<const double> alpha_a,
                         const AlphaObjective::Score& b, std::span<const double> alpha_b) {
  if (a.loss != b.loss) return a.loss < b.loss;
  if (!mass_tied(a.gold_mass, b.gold_mass)) return a.gold_mass > b.gold_mass;
  return std::lexicographical_compare(alpha_a.begin(), alpha_a.end(), alpha_b.begin(), alpha_b.end());
}

inline bool improves(const AlphaObjective::Score& a, const AlphaObjective::Score& b) {
  if (a.loss != b.loss) return a.loss < b.loss;
  return !mass_tied(a.gold_mass, b.gold_mass) && a.gold_mass > b.gold_mass;
}

inline std::vector<double> lattice_point(std::span<const int> counts, int grid) {
  std::vector<double> alpha(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) alpha[i] = static_cast<double>(counts[i]) / grid;
  return alpha;
}

// Calls visit(counts) for every composition of `grid` into counts.size()
// non-negative parts, in lexicographic order.
template <class Visit>
void for_each_composition(std::vector<int>& counts, std::size_t pos, int remaining, Visit&& visit) {
  if (pos + 1 == counts.size()) {
    counts[pos] = remaining;
    visit(std::as_const(counts));
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    counts[pos] = k;
    for_each_composition(counts, pos + 1, remaining - k, visit);
  }
}

inline double lattice_size(std::size_t n, int grid) {
  // C(grid + n - 1, n - 1)
  double size = 1.0;
  for (std::size_t i = 1; i < n; ++i) size = size * static_cast<double>(grid + static_cast<int>(i)) / i;
  return std::round(size);
}

// Largest-remainder rounding of a simplex point onto the 1/grid lattice.
inline std::vector<int> snap_to_lattice(std::span<const double> alpha, int grid) {
  const std::size_t n = alpha.size();
  std::vector<int> counts(n);
  std::vector<double> remainder(n);
  int used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double scaled = alpha[i] * grid;
    counts[i] = static_cast<int>(std::floor(scaled));
    remainder[i] = scaled - counts[i];
    used += counts[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; used < grid; ++k, ++used) ++counts[order[k % n]];
  return counts;
}

}  // namespace detail

// Minimizes the 0-1 loss over the simplex. Candidates: the uniform weights,
// the full 1/G lattice when n <= 3 (otherwise a random sample stratified by
// which model carries the most weight), and R Dirichlet restarts polished by
// coordinate descent over +-1/G transfers between two models.
//
// `rows` restricts the loss to a subset of examples (e.g. a tuning split).
inline ShallowResult optimize_alpha(const EnsembleInput& input, const AlphaSearchOptions& options,
                                    std::optional<std::span<const std::size_t>> rows = std::nullopt) {
  const std::size_t n = input.num_models();
  const int grid = options.grid_resolution;
  if (n == 0) throw std::invalid_argument("optimize_alpha needs at least one model");
  if (grid <= 0) throw std::invalid_argument("grid resolution must be positive");
  if (options.random_restarts < 0) throw std::invalid_argument("random restarts must be non-negative");

  const AlphaObjective objective = rows ? AlphaObjective(input, *rows) : AlphaObjective(input);
  if (objective.num_rows() == 0) throw std::invalid_argument("optimize_alpha needs at least one example");

  std::vector<AlphaCandidate> trace;
  std::vector<double> best_alpha;
  AlphaObjective::Score best_score;

  const auto evaluate = [&](std::vector<double> alpha) {
    const auto score = objective(alpha);
    if (best_alpha.empty() || detail::better_alpha(score, alpha, best_score, best_alpha)) {
      best_alpha = alpha;
      best_score = score;
    }
    trace.push_back({std::move(alpha), score.loss});
    return score;
  };

  evaluate(SimplexWeights::uniform(n).values());

  if (n <= 3) {
    std::vector<int> counts(n);
    detail::for_each_composition(counts, 0, grid,
                                 [&](const std::vector<int>& k) { evaluate(detail::lattice_point(k, grid)); });
  } else {
    const double lattice = detail::lattice_size(n, grid);
    const auto samples = static_cast<std::size_t>(
        std::min(lattice, static_cast<double>(options.max_random_candidates)));
    CounterRng rng(options.seed, 1);
    for (std::size_t s = 0; s < samples; ++s) {
      auto alpha = rng.dirichlet_flat(n);
      const auto top = static_cast<std::size_t>(std::max_element(alpha.begin(), alpha.end()) - alpha.begin());
      std::swap(alpha[top], alpha[s % n]);
      evaluate(std::move(alpha));
    }
  }

  CounterRng restart_rng(options.seed, 2);
  for (int r = 0; r < options.random_restarts; ++r) {
    auto counts = detail::snap_to_lattice(restart_rng.dirichlet_flat(n), grid);
    auto current = evaluate(detail::lattice_point(counts, grid));
    for (;;) {
      std::optional<std::vector<int>> best_move;
      AlphaObjective::Score best_move_score;
      std::vector<double> best_move_alpha;
      for (std::size_t from = 0; from < n; ++from) {
        if (counts[from] == 0) continue;
        for (std::size_t to = 0; to < n; ++to) {
          if (to == from) continue;
          auto moved = counts;
          --moved[from];
          ++moved[to];
          auto alpha = detail::lattice_point(moved, grid);
          const auto score = evaluate(alpha);
          if (!detail::improves(score, current)) continue;
          if (!best_move || detail::better_alpha(score, alpha, best_move_score, best_move_alpha)) {
            best_move = std::move(moved);
            best_move_score = score;
            best_move_alpha = std::move(alpha);
          }
        }
      }
      if (!best_move) break;
      counts = std::move(*best_move);
      current = best_move_score;
    }
  }

  const std::size_t m = objective.num_rows();
  ShallowResult result{SimplexWeights(best_alpha), best_score.loss,
                       static_cast<double>(m - best_score.loss) / static_cast<double>(m), m,
                       best_score.gold_mass, std::move(trace)};
  return result;
}

}  // namespace flmens
