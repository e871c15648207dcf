#pragma once

// Seeded synthetic scenarios used as fixtures for every strategy.
//
//   A complementary-experts   two models, each 0.9-confident and correct on its
//                             own half of the examples, uniform on the other.
//   B separable-embeddings    well-separated per-class Gaussian embeddings.
//   C knowledge-aligned       classes 0 and 2 overlap; knowledge vectors are
//                             built to be close (in rescaled cosine) to the
//                             aligned ensemble embedding for class-2 examples
//                             and far for the rest.
//   D adversarial-knowledge   embeddings as in C, knowledge independent noise.
//
// All draws come from CounterRng streams keyed by the scenario seed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flmens/data.hpp"
#include "flmens/deep.hpp"
#include "flmens/rng.hpp"

namespace flmens {

enum class ScenarioKind { kComplementaryExperts, kSeparableEmbeddings, kKnowledgeAligned, kAdversarialKnowledge };

struct Scenario {
  ScenarioKind kind = ScenarioKind::kSeparableEmbeddings;
  int m = 100;
  int c = 3;
  std::vector<int> dims{4, 4};  // one entry per model
  int knowledge_dim = 4;
  std::uint64_t seed = 0;

  int n() const noexcept { return static_cast<int>(dims.size()); }
};

inline const char* scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kComplementaryExperts: return "complementary-experts";
    case ScenarioKind::kSeparableEmbeddings: return "separable-embeddings";
    case ScenarioKind::kKnowledgeAligned: return "knowledge-aligned";
    case ScenarioKind::kAdversarialKnowledge: return "adversarial-knowledge";
  }
  return "?";
}

inline std::optional<ScenarioKind> parse_scenario_kind(const std::string& s) {
  for (auto kind : {ScenarioKind::kComplementaryExperts, ScenarioKind::kSeparableEmbeddings,
                    ScenarioKind::kKnowledgeAligned, ScenarioKind::kAdversarialKnowledge}) {
    const char letter = static_cast<char>('A' + static_cast<int>(kind));
    if (s == std::string(1, letter) || s == std::string(1, static_cast<char>(letter + 32)) ||
        s == scenario_name(kind)) {
      return kind;
    }
  }
  return std::nullopt;
}

// Defaults per kind: m = 100, two 4-dim models, d_K = 4; c = 4 for A, 3 otherwise.
inline Scenario default_scenario(ScenarioKind kind, std::uint64_t seed) {
  Scenario s;
  s.kind = kind;
  s.seed = seed;
  s.c = kind == ScenarioKind::kComplementaryExperts ? 4 : 3;
  return s;
}

// The class that scenario C/D make hard to separate from class 0.
inline constexpr int kConfusableClass = 2;

#ifndef FLMENS_TUNE
// Scenario C/D: mean offset of the confusable class from class 0, embedding noise,
// and target cosines (confusable class, other classes) for scenario C knowledge.
inline constexpr double kWikiCos[2] = {0.9, -0.8};
inline constexpr double kCommCos[2] = {0.5, -0.5};
inline constexpr double kConfusableOffset = 0.3;
inline constexpr double kOverlapNoise = 1.2;
#endif

namespace detail {

enum : std::uint64_t {
  kStreamLabels = 10,
  kStreamHalves = 11,
  kStreamMeans = 20,
  kStreamEmbeddings = 40,
  kStreamProbs = 60,
  kStreamKnowledge = 80,
};

inline Vector random_unit(CounterRng& rng, Eigen::Index d) {
  Vector v(d);
  do {
    for (Eigen::Index j = 0; j < d; ++j) v(j) = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

inline std::string example_id(int i, int m) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::max<std::size_t>(4, std::to_string(m - 1).size());
  return "ex" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

inline RowTable make_table(const std::vector<std::string>& ids, Matrix values) {
  return RowTable{"", ids, std::move(values)};
}

// Class-conditional Gaussian embeddings for one model.
inline Matrix class_embeddings(CounterRng& mean_rng, CounterRng& noise_rng, const std::vector<int>& labels, int c,
                               int dim, double radius, double noise, double confusable_offset) {
  std::vector<Vector> means(static_cast<std::size_t>(c));
  for (int k = 0; k < c; ++k) means[static_cast<std::size_t>(k)] = radius * random_unit(mean_rng, dim);
  if (confusable_offset > 0.0 && c > kConfusableClass) {
    means[kConfusableClass] = means[0] + confusable_offset * random_unit(mean_rng, dim);
  }
  Matrix out(static_cast<Eigen::Index>(labels.size()), dim);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int j = 0; j < dim; ++j) {
      out(static_cast<Eigen::Index>(i), j) = means[static_cast<std::size_t>(labels[i])](j) + noise * noise_rng.normal();
    }
  }
  return out;
}

// Softmax of (confidence * onehot(gold) + standard normal noise).
inline Matrix noisy_probs(CounterRng& rng, const std::vector<int>& labels, int c, double confidence) {
  Matrix out(static_cast<Eigen::Index>(labels.size()), c);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Vector z(c);
    for (int k = 0; k < c; ++k) z(k) = rng.normal() + (k == labels[i] ? confidence : 0.0);
    z = (z.array() - z.maxCoeff()).exp();
    out.row(static_cast<Eigen::Index>(i)) = (z / z.sum()).transpose();
  }
  return out;
}

inline Matrix gaussian_rows(CounterRng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) out.row(i) = random_unit(rng, cols).transpose() * (1.0 + rng.uniform());
  return out;
}

// A vector whose cosine with `direction` is `target_cos`.
inline Vector vector_at_cosine(CounterRng& rng, const Vector& direction, double target_cos) {
  const Vector unit = direction / direction.norm();
  Vector ortho;
  do {
    ortho = random_unit(rng, unit.size());
    ortho -= ortho.dot(unit) * unit;
  } while (ortho.norm() < 1e-6);
  ortho /= ortho.norm();
  const double scale = 1.0 + rng.uniform();
  return scale * (target_cos * unit + std::sqrt(1.0 - target_cos * target_cos) * ortho);
}

}  // namespace detail

inline EnsembleInput generate_scenario(const Scenario& s) {
  if (s.m < 4) throw std::invalid_argument("scenario needs at least 4 examples");
  if (s.c < 2) throw std::invalid_argument("scenario needs at least 2 classes");
  if (s.dims.empty()) throw std::invalid_argument("scenario needs at least one model");
  if (s.kind == ScenarioKind::kComplementaryExperts && s.dims.size() != 2) {
    throw std::invalid_argument("complementary-experts scenario has exactly two models");
  }
  if ((s.kind == ScenarioKind::kKnowledgeAligned || s.kind == ScenarioKind::kAdversarialKnowledge) && s.c < 3) {
    throw std::invalid_argument("knowledge scenarios need at least 3 classes");
  }
  if (s.knowledge_dim < 1 || s.knowledge_dim > s.m) throw std::invalid_argument("bad knowledge dimension");
  for (int d : s.dims) {
    if (d < 1) throw std::invalid_argument("embedding dimensions must be positive");
  }

  EnsembleInput input;
  auto& ds = input.dataset;
  ds.num_classes = s.c;
  CounterRng label_rng(s.seed, detail::kStreamLabels);
  for (int i = 0; i < s.m; ++i) {
    ds.ids.push_back(detail::example_id(i, s.m));
    ds.labels.push_back(static_cast<int>(label_rng.below(static_cast<std::uint64_t>(s.c))));
  }

  const bool knowledge_scenario =
      s.kind == ScenarioKind::kKnowledgeAligned || s.kind == ScenarioKind::kAdversarialKnowledge;
  const double radius = s.kind == ScenarioKind::kSeparableEmbeddings ? 3.0 : 2.0;
  const double noise = s.kind == ScenarioKind::kSeparableEmbeddings ? 0.5 : kOverlapNoise;
  const double offset = knowledge_scenario ? kConfusableOffset : 0.0;

  std::vector<int> expert_of(static_cast<std::size_t>(s.m), -1);
  if (s.kind == ScenarioKind::kComplementaryExperts) {
    std::vector<int> order(static_cast<std::size_t>(s.m));
    for (int i = 0; i < s.m; ++i) order[static_cast<std::size_t>(i)] = i;
    CounterRng half_rng(s.seed, detail::kStreamHalves);
    half_rng.shuffle(std::span<int>(order));
    for (int r = 0; r < s.m; ++r) expert_of[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r < s.m / 2 ? 0 : 1;
  }

  for (int l = 0; l < s.n(); ++l) {
    const std::string id = "model" + std::to_string(l + 1);
    const auto stream = static_cast<std::uint64_t>(l);
    CounterRng mean_rng(s.seed, detail::kStreamMeans + stream);
    CounterRng noise_rng(s.seed, detail::kStreamEmbeddings + stream);
    Matrix emb = detail::class_embeddings(mean_rng, noise_rng, ds.labels, s.c, s.dims[static_cast<std::size_t>(l)],
                                          radius, noise, offset);

    Matrix probs;
    if (s.kind == ScenarioKind::kComplementaryExperts) {
      probs.resize(s.m, s.c);
      const double other = 0.1 / (s.c - 1);
      for (int i = 0; i < s.m; ++i) {
        if (expert_of[static_cast<std::size_t>(i)] == l) {
          probs.row(i).setConstant(other);
          probs(i, ds.labels[static_cast<std::size_t>(i)]) = 0.9;
        } else {
          probs.row(i).setConstant(1.0 / s.c);
        }
      }
    } else {
      CounterRng prob_rng(s.seed, detail::kStreamProbs + stream);
      probs = detail::noisy_probs(prob_rng, ds.labels, s.c, 1.0 + 0.5 * l);
    }
    input.probs.push_back({id, detail::make_table(ds.ids, std::move(probs))});
    input.embeddings.push_back({id, detail::make_table(ds.ids, std::move(emb))});
  }

  CounterRng knowledge_rng(s.seed, detail::kStreamKnowledge);
  Matrix wiki;
  Matrix comm;
  if (s.kind == ScenarioKind::kKnowledgeAligned) {
    const Matrix concatenated = concat_embeddings(input);
    const Matrix aligned = align_rows(concatenated, fit_alignment(concatenated, s.knowledge_dim));
    wiki.resize(s.m, s.knowledge_dim);
    comm.resize(s.m, s.knowledge_dim);
    for (int i = 0; i < s.m; ++i) {
      const bool confusable = ds.labels[static_cast<std::size_t>(i)] == kConfusableClass;
      const auto jitter = [&](double base) { return std::clamp(base + 0.1 * knowledge_rng.normal(), -0.99, 0.99); };
      const Vector row = aligned.row(i).transpose();
      if (row.norm() == 0.0) {
        wiki.row(i) = detail::random_unit(knowledge_rng, s.knowledge_dim).transpose();
        comm.row(i) = detail::random_unit(knowledge_rng, s.knowledge_dim).transpose();
        continue;
      }
      wiki.row(i) = detail::vector_at_cosine(knowledge_rng, row, jitter(confusable ? kWikiCos[0] : kWikiCos[1])).transpose();
      comm.row(i) = detail::vector_at_cosine(knowledge_rng, row, jitter(confusable ? kCommCos[0] : kCommCos[1])).transpose();
    }
  } else {
    wiki = detail::gaussian_rows(knowledge_rng, s.m, s.knowledge_dim);
    comm = detail::gaussian_rows(knowledge_rng, s.m, s.knowledge_dim);
  }
  input.knowledge = KnowledgePair{detail::make_table(ds.ids, std::move(wiki)), detail::make_table(ds.ids, std::move(comm))};
  return input;
}

// Writes the scenario files into out_dir and returns the manifest path.
inline std::filesystem::path generate(const Scenario& scenario, const std::filesystem::path& out_dir) {
  return write_manifest(generate_scenario(scenario), out_dir);
}

}  // namespace flmens
