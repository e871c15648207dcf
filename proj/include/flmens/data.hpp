#pragma once

// Shared data model: labels, per-model probability and embedding tables,
// knowledge embeddings, and the manifest that ties them together.
//
// Labels are 0-based class indices in files and in memory.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <cstddef>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "flmens/csv.hpp"
#include "flmens/error.hpp"
#include "flmens/rng.hpp"

namespace flmens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kRowSumTolerance = 1e-6;

struct LabeledDataset {
  std::string source;
  std::vector<std::string> ids;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return ids.size(); }
};

// Rows keyed by example id, as read from one matrix file.
struct RowTable {
  std::string source;
  std::vector<std::string> ids;
  Matrix values;
};

struct ProbMatrix {
  std::string model_id;
  RowTable table;
};

struct EmbeddingMatrix {
  std::string model_id;
  RowTable table;

  Eigen::Index dim() const noexcept { return table.values.cols(); }
};

struct KnowledgePair {
  RowTable wiki;
  RowTable commonsense;

  Eigen::Index dim() const noexcept { return wiki.values.cols(); }
};

struct EnsembleInput {
  LabeledDataset dataset;
  std::vector<ProbMatrix> probs;
  std::vector<EmbeddingMatrix> embeddings;
  std::optional<KnowledgePair> knowledge;

  std::size_t num_models() const noexcept { return probs.size(); }
  std::size_t num_examples() const noexcept { return dataset.size(); }
  int num_classes() const noexcept { return dataset.num_classes; }
};

struct Violation {
  std::string file;
  std::size_t line = 0;  // 0: not tied to a line
  std::string message;

  std::string to_string() const {
    if (file.empty()) return message;
    if (line == 0) return file + ": " + message;
    return file + ":" + std::to_string(line) + ": " + message;
  }
};

using ValidationReport = std::vector<Violation>;

class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationReport report)
      : Error(summarize(report)), report_(std::move(report)) {}

  const ValidationReport& report() const noexcept { return report_; }

 private:
  static std::string summarize(const ValidationReport& report) {
    std::string out = report.front().to_string();
    if (report.size() > 1) out += " (and " + std::to_string(report.size() - 1) + " more violations)";
    return out;
  }

  ValidationReport report_;
};

namespace detail {

// Matrix row i lives on file line i + 2 (line 1 is the header).
inline std::size_t line_of(Eigen::Index row) { return static_cast<std::size_t>(row) + 2; }

inline std::string format_sum(double sum) {
  std::ostringstream os;
  os << std::setprecision(10) << sum;
  return os.str();
}

inline void check_ids(const RowTable& table, const LabeledDataset& dataset, ValidationReport& report) {
  const std::size_t m = dataset.size();
  if (table.ids.size() != m || static_cast<std::size_t>(table.values.rows()) != m) {
    report.push_back({table.source, 0,
                      "expected " + std::to_string(m) + " rows, found " +
                          std::to_string(table.values.rows())});
  }
  const std::size_t common = std::min(table.ids.size(), m);
  std::size_t mismatches = 0;
  std::size_t first = 0;
  for (std::size_t i = 0; i < common; ++i) {
    if (table.ids[i] != dataset.ids[i]) {
      if (mismatches++ == 0) first = i;
    }
  }
  if (mismatches > 0) {
    report.push_back({table.source, first + 2,
                      "id order differs from labels file: expected '" + dataset.ids[first] +
                          "', found '" + table.ids[first] + "' (" + std::to_string(mismatches) +
                          " mismatched rows)"});
  }
}

inline void check_finite(const RowTable& table, const std::string& what, ValidationReport& report) {
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      if (!std::isfinite(table.values(i, j))) {
        const std::string id = static_cast<std::size_t>(i) < table.ids.size() ? table.ids[i] : "?";
        report.push_back({table.source, line_of(i),
                          what + ": non-finite value at row " + std::to_string(i) + " (id '" + id +
                              "'), column " + std::to_string(j)});
      }
    }
  }
}

}  // namespace detail

// Lists every violated invariant; empty iff the input is valid.
inline ValidationReport validate_alignment(const EnsembleInput& input) {
  ValidationReport report;
  const auto& ds = input.dataset;

  if (ds.num_classes < 1) report.push_back({ds.source, 0, "num_classes must be positive"});
  if (ds.ids.empty()) report.push_back({ds.source, 0, "dataset has no examples"});
  if (ds.ids.size() != ds.labels.size()) {
    report.push_back({ds.source, 0, "ids and labels differ in length"});
  }
  {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < ds.ids.size(); ++i) {
      if (!seen.insert(ds.ids[i]).second) {
        report.push_back({ds.source, i + 2, "duplicate id '" + ds.ids[i] + "'"});
      }
    }
  }
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] < 0 || ds.labels[i] >= ds.num_classes) {
      report.push_back({ds.source, i + 2,
                        "label " + std::to_string(ds.labels[i]) + " outside [0, " +
                            std::to_string(ds.num_classes - 1) + "]"});
    }
  }

  if (input.probs.empty()) report.push_back({"", 0, "manifest lists no models"});
  if (input.probs.size() != input.embeddings.size()) {
    report.push_back({"", 0, "probability and embedding model lists differ in length"});
  }
  {
    std::unordered_set<std::string> seen;
    for (const auto& p : input.probs) {
      if (!seen.insert(p.model_id).second) {
        report.push_back({"", 0, "duplicate model id '" + p.model_id + "'"});
      }
    }
  }
  for (std::size_t l = 0; l < std::min(input.probs.size(), input.embeddings.size()); ++l) {
    if (input.probs[l].model_id != input.embeddings[l].model_id) {
      report.push_back({"", 0, "model " + std::to_string(l) + ": probability id '" +
                                   input.probs[l].model_id + "' differs from embedding id '" +
                                   input.embeddings[l].model_id + "'"});
    }
  }

  for (const auto& p : input.probs) {
    const auto& t = p.table;
    const std::string what = "model '" + p.model_id + "' probabilities";
    detail::check_ids(t, ds, report);
    if (t.values.cols() != ds.num_classes) {
      report.push_back({t.source, 1,
                        what + ": expected " + std::to_string(ds.num_classes) + " class columns, found " +
                            std::to_string(t.values.cols())});
    }
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
      bool entries_ok = true;
      for (Eigen::Index j = 0; j < t.values.cols(); ++j) {
        const double v = t.values(i, j);
        if (!(v >= 0.0 && v <= 1.0)) {
          entries_ok = false;
          report.push_back({t.source, detail::line_of(i),
                            what + ": entry at column " + std::to_string(j) + " outside [0, 1]"});
        }
      }
      if (!entries_ok) continue;
      const double sum = t.values.row(i).sum();
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        report.push_back({t.source, detail::line_of(i),
                          what + ": row sums to " + detail::format_sum(sum) + ", expected 1"});
      }
    }
  }

  for (const auto& e : input.embeddings) {
    const std::string what = "model '" + e.model_id + "' embeddings";
    detail::check_ids(e.table, ds, report);
    if (e.dim() < 1) report.push_back({e.table.source, 1, what + ": no columns"});
    detail::check_finite(e.table, what, report);
  }

  if (input.knowledge) {
    const auto& k = *input.knowledge;
    if (k.wiki.values.cols() != k.commonsense.values.cols()) {
      report.push_back({k.commonsense.source, 1,
                        "knowledge dimension mismatch: wiki has " + std::to_string(k.wiki.values.cols()) +
                            ", commonsense has " + std::to_string(k.commonsense.values.cols())});
    }
    for (const RowTable* t : {&k.wiki, &k.commonsense}) {
      detail::check_ids(*t, ds, report);
      detail::check_finite(*t, "knowledge", report);
      for (Eigen::Index i = 0; i < t->values.rows(); ++i) {
        if ((t->values.row(i).array() == 0.0).all()) {
          const std::string id = static_cast<std::size_t>(i) < t->ids.size() ? t->ids[i] : "?";
          report.push_back({t->source, detail::line_of(i),
                            "knowledge row for id '" + id + "' is all zeros (cosine undefined)"});
        }
      }
    }
  }
  return report;
}

// Divides each row by its sum unless the sum is already 1 within 1e-12.
// Leaving near-unit rows alone keeps write -> load bit-exact.
inline void renormalize_rows(Matrix& probs) {
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < probs.cols(); ++j) sum += probs(i, j);
    if (std::abs(sum - 1.0) > 1e-12) probs.row(i) /= sum;
  }
}

namespace detail {

inline RowTable load_table(const std::filesystem::path& path) {
  auto file = csv::read_matrix(path);
  return RowTable{path.string(), std::move(file.ids), std::move(file.values)};
}

inline std::string require_string(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string()) {
    throw DataError(where, 0, std::string("manifest field '") + key + "' missing or not a string");
  }
  return j.at(key).get<std::string>();
}

}  // namespace detail

// Reads every file referenced by the manifest. Syntax errors throw DataError;
// semantic checks are left to validate_alignment.
inline EnsembleInput read_manifest(const std::filesystem::path& manifest_path) {
  const std::string where = manifest_path.string();
  const std::string text = csv::read_file(manifest_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(where, 0, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DataError(where, 0, "manifest must be a JSON object");
  const auto base = manifest_path.parent_path();
  const auto resolve = [&](const std::string& p) { return base / p; };

  EnsembleInput input;
  if (!doc.contains("num_classes") || !doc["num_classes"].is_number_integer()) {
    throw DataError(where, 0, "manifest field 'num_classes' missing or not an integer");
  }
  input.dataset.num_classes = doc["num_classes"].get<int>();

  const auto labels_path = resolve(detail::require_string(doc, "labels", where));
  auto labels = csv::read_labels(labels_path);
  input.dataset.source = labels_path.string();
  input.dataset.ids = std::move(labels.ids);
  input.dataset.labels.reserve(labels.labels.size());
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const long long v = labels.labels[i];
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      throw DataError(input.dataset.source, i + 2, "label out of range");
    }
    input.dataset.labels.push_back(static_cast<int>(v));
  }

  if (!doc.contains("models") || !doc["models"].is_array()) {
    throw DataError(where, 0, "manifest field 'models' missing or not an array");
  }
  for (const auto& model : doc["models"]) {
    const auto id = detail::require_string(model, "id", where);
    input.probs.push_back({id, detail::load_table(resolve(detail::require_string(model, "probs", where)))});
    input.embeddings.push_back(
        {id, detail::load_table(resolve(detail::require_string(model, "embeddings", where)))});
  }

  if (doc.contains("knowledge") && !doc["knowledge"].is_null()) {
    const auto& k = doc["knowledge"];
    input.knowledge = KnowledgePair{
        detail::load_table(resolve(detail::require_string(k, "wiki", where))),
        detail::load_table(resolve(detail::require_string(k, "commonsense", where)))};
  }
  return input;
}

// Reads, validates, and renormalizes probability rows.
inline EnsembleInput load_manifest(const std::filesystem::path& manifest_path) {
  auto input = read_manifest(manifest_path);
  auto report = validate_alignment(input);
  if (!report.empty()) throw ValidationError(std::move(report));
  for (auto& p : input.probs) renormalize_rows(p.table.values);
  return input;
}

inline bool is_safe_file_stem(const std::string& s) {
  if (s.empty() || s == "." || s == "..") return false;
  return std::all_of(s.begin(), s.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
  });
}

// Writes the input as a manifest plus CSV files into `dir` and returns the
// manifest path. Matrix ids are taken from the dataset.
inline std::filesystem::path write_manifest(const EnsembleInput& input, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError(dir.string(), 0, "cannot create directory: " + ec.message());
  const auto& ids = input.dataset.ids;

  csv::write_text(dir / "labels.csv", csv::format_labels(ids, input.dataset.labels));
  nlohmann::ordered_json doc;
  doc["num_classes"] = input.dataset.num_classes;
  doc["labels"] = "labels.csv";
  doc["models"] = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < input.num_models(); ++l) {
    const auto& id = input.probs[l].model_id;
    if (!is_safe_file_stem(id)) throw std::invalid_argument("model id '" + id + "' is not file-name safe");
    const std::string probs = id + "-probs.csv";
    const std::string emb = id + "-embeddings.csv";
    csv::write_text(dir / probs, csv::format_matrix(ids, input.probs[l].table.values));
    csv::write_text(dir / emb, csv::format_matrix(ids, input.embeddings[l].table.values));
    nlohmann::ordered_json m;
    m["id"] = id;
    m["probs"] = probs;
    m["embeddings"] = emb;
    doc["models"].push_back(m);
  }
  if (input.knowledge) {
    csv::write_text(dir / "knowledge-wiki.csv", csv::format_matrix(ids, input.knowledge->wiki.values));
    csv::write_text(dir / "knowledge-commonsense.csv",
                    csv::format_matrix(ids, input.knowledge->commonsense.values));
    doc["knowledge"] = {{"wiki", "knowledge-wiki.csv"}, {"commonsense", "knowledge-commonsense.csv"}};
  }
  const auto manifest = dir / "manifest.json";
  csv::write_text(manifest, doc.dump(2) + "\n");
  return manifest;
}

// Row i is [E_1(x_i), ..., E_n(x_i)] in manifest model order.
inline Matrix concat_embeddings(const EnsembleInput& input) {
  Eigen::Index total = 0;
  for (const auto& e : input.embeddings) total += e.dim();
  Matrix out(static_cast<Eigen::Index>(input.num_examples()), total);
  Eigen::Index offset = 0;
  for (const auto& e : input.embeddings) {
    out.middleCols(offset, e.dim()) = e.table.values;
    offset += e.dim();
  }
  return out;
}

struct HoldoutSplit {
  std::vector<std::size_t> train;    // sorted
  std::vector<std::size_t> holdout;  // sorted
};

// Deterministic in (m, fraction, seed); the two parts partition [0, m).
inline HoldoutSplit make_holdout_split(std::size_t m, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("holdout fraction must be in [0, 1)");
  if (m == 0) throw std::invalid_argument("cannot split an empty dataset");
  auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m)));
  count = std::min(count, m - 1);
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  CounterRng rng(seed, 0x5EED'0001);
  rng.shuffle(std::span<std::size_t>(order));
  HoldoutSplit split;
  split.holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(count), order.end());
  std::sort(split.holdout.begin(), split.holdout.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

}  // namespace flmens
