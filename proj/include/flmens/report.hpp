#pragma once

// JSON forms of results and of the trained classifier. Doubles are written by
// nlohmann::json in shortest round-trip form, so reports are byte-stable.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flmens/classifier.hpp"
#include "flmens/data.hpp"
#include "flmens/deep.hpp"
#include "flmens/eval.hpp"
#include "flmens/semi.hpp"
#include "flmens/shallow.hpp"

namespace flmens {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Matrix matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw std::invalid_argument(std::string("classifier field '") + name + "' has the wrong shape");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::invalid_argument(std::string("classifier field '") + name + "' has the wrong shape");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

inline Vector vector_from_json(const Json& j, Eigen::Index size, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
    throw std::invalid_argument(std::string("classifier field '") + name + "' has the wrong shape");
  }
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace detail

inline Json classifier_to_json(const SmallClassifier& model) {
  Json j;
  j["input_dim"] = model.input_dim();
  j["hidden_dim"] = model.hidden_dim();
  j["num_classes"] = model.num_classes();
  j["activation"] = "relu";
  j["output"] = "softmax";
  j["W1"] = detail::matrix_to_json(model.W1);
  j["b1"] = detail::vector_to_json(model.b1);
  j["W2"] = detail::matrix_to_json(model.W2);
  j["b2"] = detail::vector_to_json(model.b2);
  return j;
}

inline SmallClassifier classifier_from_json(const Json& j) {
  const auto d = j.at("input_dim").get<Eigen::Index>();
  const auto h = j.at("hidden_dim").get<Eigen::Index>();
  const auto c = j.at("num_classes").get<Eigen::Index>();
  if (d < 1 || h < 1 || c < 1) throw std::invalid_argument("classifier dimensions must be positive");
  SmallClassifier model;
  model.W1 = detail::matrix_from_json(j.at("W1"), h, d, "W1");
  model.b1 = detail::vector_from_json(j.at("b1"), h, "b1");
  model.W2 = detail::matrix_from_json(j.at("W2"), c, h, "W2");
  model.b2 = detail::vector_from_json(j.at("b2"), c, "b2");
  return model;
}

inline Json to_json(const ShallowResult& r) {
  Json j;
  j["alpha"] = r.weights.values();
  j["loss"] = r.loss;
  j["accuracy"] = r.accuracy;
  j["evaluations"] = r.search_trace.size();
  return j;
}

inline Json to_json(const SemiResult& r) {
  Json j;
  j["loss"] = r.loss;
  j["accuracy"] = r.accuracy;
  j["epochs_run"] = r.epochs_run();
  j["final_train_ce"] = r.final_train_ce();
  return j;
}

inline Json to_json(const DeepResult& r) {
  Json j;
  j["beta"] = r.beta.value();
  j["reward"] = r.reward;
  j["loss"] = r.loss;
  j["accuracy"] = r.accuracy;
  j["rounds"] = r.trace.size();
  Json trace = Json::array();
  for (const auto& t : r.trace) {
    trace.push_back(Json{{"round", t.round},
                         {"beta", t.beta},
                         {"reward", t.reward},
                         {"train_ce", t.train_ce},
                         {"zero_one", t.zero_one}});
  }
  j["trace"] = std::move(trace);
  return j;
}

inline Json to_json(const ComparisonReport& r) {
  Json j;
  j["metric"] = "accuracy";
  j["baseline"] = r.baseline;
  j["m"] = r.m;
  j["test"] = to_string(r.test);
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"strategy", row.strategy},
                        {"accuracy", row.accuracy},
                        {"loss", row.loss},
                        {"p_value", row.p_value}});
  }
  j["rows"] = std::move(rows);
  return j;
}

inline Json to_json(const ValidationReport& report) {
  Json j;
  j["valid"] = report.empty();
  Json items = Json::array();
  for (const auto& v : report) {
    items.push_back(Json{{"file", v.file}, {"line", v.line}, {"message", v.message}});
  }
  j["violations"] = std::move(items);
  return j;
}

}  // namespace flmens
