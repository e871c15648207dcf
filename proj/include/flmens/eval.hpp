#pragma once

// Accuracy, the exact one-tailed binomial test, and strategy comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flmens/shallow.hpp"

namespace flmens {

inline double accuracy(std::span<const int> gold, std::span<const int> predicted) {
  if (gold.empty()) throw std::invalid_argument("accuracy of an empty prediction list");
  const std::size_t loss = zero_one_loss(gold, predicted);
  return static_cast<double>(gold.size() - loss) / static_cast<double>(gold.size());
}

namespace detail {

inline double log_binomial_pmf(std::uint64_t j, std::uint64_t m, double log_p, double log_q) {
  const auto dj = static_cast<double>(j);
  const auto dm = static_cast<double>(m);
  return std::lgamma(dm + 1.0) - std::lgamma(dj + 1.0) - std::lgamma(dm - dj + 1.0) + dj * log_p +
         (dm - dj) * log_q;
}

}  // namespace detail

// P(X >= k) for X ~ Binomial(m, p0). Terms are scaled by the largest one in
// log space and summed with Neumaier compensation; terms past the mode that
// underflow relative to the largest are skipped, which is exact in double.
inline double binomial_test_one_tailed(std::uint64_t k, std::uint64_t m, double p0) {
  if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("baseline rate must lie in (0, 1)");
  if (k > m) throw std::invalid_argument("successes exceed trials");
  if (k == 0) return 1.0;

  const double log_p = std::log(p0);
  const double log_q = std::log1p(-p0);
  const auto mode = static_cast<std::uint64_t>(std::floor((static_cast<double>(m) + 1.0) * p0));
  const std::uint64_t peak = std::clamp(mode, k, m);
  const double log_max = detail::log_binomial_pmf(peak, m, log_p, log_q);

  double sum = 0.0;
  double compensation = 0.0;
  for (std::uint64_t j = k; j <= m; ++j) {
    const double rel = detail::log_binomial_pmf(j, m, log_p, log_q) - log_max;
    if (j > peak && rel < -745.0) break;
    const double term = std::exp(rel);
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      compensation += (sum - t) + term;
    } else {
      compensation += (term - t) + sum;
    }
    sum = t;
  }
  const double p = std::exp(log_max) * (sum + compensation);
  return std::clamp(p, 0.0, 1.0);
}

// Exact one-tailed McNemar test: among the discordant examples, the
// probability under the null of at least `strategy_only` wins for the strategy.
inline double mcnemar_one_tailed(std::uint64_t strategy_only, std::uint64_t baseline_only) {
  const std::uint64_t discordant = strategy_only + baseline_only;
  if (discordant == 0) return 1.0;
  return binomial_test_one_tailed(strategy_only, discordant, 0.5);
}

enum class SignificanceTest { kBinomial, kMcNemar };

struct StrategyPredictions {
  std::string name;
  std::vector<int> predicted;
};

struct ComparisonRow {
  std::string strategy;
  double accuracy = 0.0;
  std::size_t loss = 0;
  double p_value = 1.0;
};

struct ComparisonReport {
  std::string baseline;
  std::size_t m = 0;
  SignificanceTest test = SignificanceTest::kBinomial;
  std::vector<ComparisonRow> rows;
};

// Binomial: each strategy's correct count tested against the baseline's
// accuracy as null rate. A baseline accuracy of exactly 0 or 1 uses the
// point-mass tail. McNemar: paired discordant counts against the baseline.
inline ComparisonReport compare(const std::vector<StrategyPredictions>& results, std::span<const int> gold,
                                const std::string& baseline_name,
                                SignificanceTest test = SignificanceTest::kBinomial) {
  if (gold.empty()) throw std::invalid_argument("comparison needs at least one example");
  const auto base_it = std::find_if(results.begin(), results.end(),
                                    [&](const StrategyPredictions& s) { return s.name == baseline_name; });
  if (base_it == results.end()) throw std::invalid_argument("unknown baseline '" + baseline_name + "'");
  for (const auto& s : results) {
    if (s.predicted.size() != gold.size()) {
      throw std::invalid_argument("predictions for '" + s.name + "' are not aligned with the gold labels");
    }
  }

  const std::uint64_t m = gold.size();
  const std::size_t base_loss = zero_one_loss(gold, base_it->predicted);
  const double p0 = static_cast<double>(m - base_loss) / static_cast<double>(m);

  ComparisonReport report;
  report.baseline = baseline_name;
  report.m = gold.size();
  report.test = test;
  for (const auto& s : results) {
    ComparisonRow row;
    row.strategy = s.name;
    row.loss = zero_one_loss(gold, s.predicted);
    row.accuracy = static_cast<double>(m - row.loss) / static_cast<double>(m);
    const std::uint64_t k = m - row.loss;
    if (test == SignificanceTest::kBinomial) {
      if (p0 <= 0.0) {
        row.p_value = k == 0 ? 1.0 : 0.0;
      } else if (p0 >= 1.0) {
        row.p_value = 1.0;
      } else {
        row.p_value = binomial_test_one_tailed(k, m, p0);
      }
    } else {
      std::uint64_t strategy_only = 0;
      std::uint64_t baseline_only = 0;
      for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool a = s.predicted[i] == gold[i];
        const bool b = base_it->predicted[i] == gold[i];
        if (a && !b) ++strategy_only;
        if (b && !a) ++baseline_only;
      }
      row.p_value = mcnemar_one_tailed(strategy_only, baseline_only);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline const char* to_string(SignificanceTest test) {
  return test == SignificanceTest::kBinomial ? "binomial" : "mcnemar";
}

// Plain-text table laid out like a benchmark results table: one row for the
// dataset, one column per strategy, accuracy in percent, followed by the
// p-value row against the baseline.
inline std::string format_table(const ComparisonReport& report, const std::string& dataset_name) {
  std::vector<std::string> header{"Dataset"};
  std::vector<std::string> acc{dataset_name};
  std::vector<std::string> pval{"p vs " + report.baseline};
  for (const auto& row : report.rows) {
    header.push_back(row.strategy);
    std::ostringstream a;
    a << std::fixed << std::setprecision(1) << 100.0 * row.accuracy;
    acc.push_back(a.str());
    std::ostringstream p;
    p << std::scientific << std::setprecision(3) << row.p_value;
    pval.push_back(p.str());
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t j = 0; j < header.size(); ++j) {
    width[j] = std::max({header[j].size(), acc[j].size(), pval[j].size()});
  }
  std::ostringstream os;
  const auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j > 0) os << " | ";
      if (j == 0) {
        os << std::left << std::setw(static_cast<int>(width[j])) << cells[j];
      } else {
        os << std::right << std::setw(static_cast<int>(width[j])) << cells[j];
      }
    }
    os << '\n';
  };
  emit(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  os << std::string(total + 3 * (width.size() - 1), '-') << '\n';
  emit(acc);
  emit(pval);
  os << "metric: accuracy (%), m = " << report.m << ", test: one-tailed " << to_string(report.test) << '\n';
  return os.str();
}

}  // namespace flmens
