#pragma once

// Domain types: task kinds, observations, context tables, queries and
// predictive vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pclt/error.hpp"
#include "pclt/random.hpp"

namespace pclt {

enum class TaskType { Binary, Multiclass, RegressionCdf };

inline const char* to_string(TaskType t) {
  switch (t) {
    case TaskType::Binary: return "binary";
    case TaskType::Multiclass: return "multiclass";
    case TaskType::RegressionCdf: return "regression_cdf";
  }
  return "?";
}

/// Binary classification, K-class classification, or regression tracked via
/// CDF events (-inf, t]. For regression the optional threshold list is the
/// discretization grid used when a rule can only report CDF values.
struct TaskKind {
  TaskType type = TaskType::Binary;
  int classes = 2;
  std::vector<double> thresholds;

  static TaskKind binary() { return {TaskType::Binary, 2, {}}; }

  static TaskKind multiclass(int k) {
    if (k < 2) throw DataError("multiclass task needs at least 2 classes, got " + std::to_string(k));
    return {TaskType::Multiclass, k, {}};
  }

  static TaskKind regression_cdf(std::vector<double> thresholds = {}) {
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
      if (!(thresholds[i] > thresholds[i - 1]))
        throw DataError("regression thresholds must be strictly increasing");
    }
    for (double t : thresholds) {
      if (!std::isfinite(t)) throw DataError("regression threshold is not finite");
    }
    return {TaskType::RegressionCdf, 0, std::move(thresholds)};
  }

  bool is_classification() const { return type != TaskType::RegressionCdf; }

  bool operator==(const TaskKind&) const = default;
};

/// One supervised observation. Class labels are stored as dense integer
/// codes 0..K-1 in `y`.
struct Observation {
  std::vector<double> x;
  double y = 0.0;

  int label() const { return static_cast<int>(y); }

  auto operator<=>(const Observation&) const = default;
};

using Rows = std::span<const Observation>;

/// Validated, immutable ordered context z_{1:n}.
class ContextTable {
 public:
  ContextTable() = default;

  /// Checks dimensions, finiteness and label domains. Row order is kept.
  static ContextTable validated(std::vector<Observation> rows, TaskKind task) {
    if (rows.empty()) throw DataError("context must contain at least one row");
    const std::size_t d = rows.front().x.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (r.x.size() != d) {
        throw DataError("dimension mismatch at row " + std::to_string(i) + ": expected " +
                        std::to_string(d) + " covariates, got " + std::to_string(r.x.size()));
      }
      for (double v : r.x) {
        if (!std::isfinite(v)) throw DataError("non-finite covariate at row " + std::to_string(i));
      }
      if (!std::isfinite(r.y)) throw DataError("non-finite label at row " + std::to_string(i));
      if (task.is_classification()) {
        if (r.y != std::floor(r.y) || r.y < 0 || r.y >= task.classes) {
          throw DataError("label " + std::to_string(r.y) + " at row " + std::to_string(i) +
                          " outside class range [0, " + std::to_string(task.classes) + ")");
        }
      }
    }
    ContextTable t;
    t.rows_ = std::move(rows);
    t.task_ = std::move(task);
    t.dim_ = d;
    return t;
  }

  Rows rows() const { return rows_; }
  Rows prefix(std::size_t k) const { return Rows(rows_).first(k); }
  const Observation& operator[](std::size_t i) const { return rows_[i]; }
  std::size_t size() const { return rows_.size(); }
  std::size_t dim() const { return dim_; }
  const TaskKind& task() const { return task_; }

  bool operator==(const ContextTable&) const = default;

 private:
  std::vector<Observation> rows_;
  TaskKind task_;
  std::size_t dim_ = 0;
};

inline ContextTable validate_context(std::vector<Observation> rows, TaskKind task) {
  return ContextTable::validated(std::move(rows), std::move(task));
}

/// Fisher-Yates shuffle driven by the "permute" stream of `seed`.
inline ContextTable permute_rows(const ContextTable& table, std::uint64_t seed) {
  std::vector<Observation> rows(table.rows().begin(), table.rows().end());
  Rng rng(derive_seed(seed, "permute"));
  for (std::size_t i = rows.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(rows[i - 1], rows[j]);
  }
  return ContextTable::validated(std::move(rows), table.task());
}

/// A covariate paired with an event: class index for classification,
/// threshold t for regression (event (-inf, t]).
struct Query {
  std::vector<double> x;
  double event = 1.0;

  bool operator==(const Query&) const = default;
};

class QuerySpec {
 public:
  QuerySpec() = default;
  explicit QuerySpec(std::vector<Query> points) : points_(std::move(points)) {
    if (points_.empty()) throw DataError("query spec must contain at least one point");
    const std::size_t d = points_.front().x.size();
    for (const auto& q : points_) {
      if (q.x.size() != d) throw DataError("query dimension mismatch");
      if (!std::isfinite(q.event)) throw DataError("non-finite query event");
    }
  }

  /// Same event at every covariate.
  static QuerySpec at(const std::vector<std::vector<double>>& xs, double event) {
    std::vector<Query> q;
    q.reserve(xs.size());
    for (const auto& x : xs) q.push_back({x, event});
    return QuerySpec(std::move(q));
  }

  /// All K classes at one covariate (full distribution).
  static QuerySpec all_classes(const std::vector<double>& x, int k) {
    std::vector<Query> q;
    for (int c = 0; c < k; ++c) q.push_back({x, static_cast<double>(c)});
    return QuerySpec(std::move(q));
  }

  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return points_.empty() ? 0 : points_.front().x.size(); }
  const Query& operator[](std::size_t i) const { return points_[i]; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }
  const std::vector<Query>& points() const { return points_; }

  bool operator==(const QuerySpec&) const = default;

 private:
  std::vector<Query> points_;
};

/// Predictive probabilities P_k at m query/event pairs after k observations.
struct PredictiveVector {
  std::vector<double> values;
  std::size_t prefix_len = 0;

  std::size_t size() const { return values.size(); }
};

/// Hard range check. Values outside [0,1] are a rule defect, never clipped.
inline void check_probabilities(std::span<const double> values, const std::string& who) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw RuleError(who + ": probability " + std::to_string(v) + " at index " + std::to_string(i) +
                      " outside [0,1]");
    }
  }
}

/// A full class distribution must sum to one within `tol`.
inline void check_distribution(std::span<const double> values, const std::string& who,
                               double tol = 1e-9) {
  check_probabilities(values, who);
  const double s = std::accumulate(values.begin(), values.end(), 0.0);
  if (std::abs(s - 1.0) > tol) {
    throw RuleError(who + ": class probabilities sum to " + std::to_string(s));
  }
}

inline PredictiveVector make_predictive(std::vector<double> values, std::size_t k,
                                        const std::string& who = "predictive vector") {
  check_probabilities(values, who);
  return {std::move(values), k};
}

}  // namespace pclt
