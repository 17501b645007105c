#pragma once

// Evaluation of a predictive rule along the expanding prefixes of a randomly
// permuted context, producing P_k and the increments Delta_k = P_k - P_{k-1}.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "pclt/core.hpp"
#include "pclt/parallel.hpp"
#include "pclt/rules.hpp"

namespace pclt {

struct TrajectoryOptions {
  /// Whether to start at P_0. Auto uses the prior predictive when the rule
  /// has one; WithoutPrior starts at k = 1.
  enum class Start { Auto, WithPrior, WithoutPrior };
  Start start = Start::Auto;
  /// Evaluate every `stride`-th prefix (plus the full context). Values above
  /// one approximate the increments over coarser steps.
  std::size_t stride = 1;
  std::size_t workers = 0;
  FallbackPolicy fallback = FallbackPolicy::Auto;
  bool permute = true;
};

struct Trajectory {
  std::vector<std::size_t> ks;            // evaluated prefix lengths, increasing
  std::vector<PredictiveVector> vectors;  // P_k for each k in ks
  std::vector<std::size_t> increment_ks;  // global index k of each increment
  std::vector<std::vector<double>> increments;
  std::size_t n = 0;  // context size
  std::uint64_t permutation_seed = 0;
  std::string rule_id;
  QuerySpec queries;

  std::size_t m() const { return queries.size(); }
  const std::vector<double>& terminal() const { return vectors.back().values; }
};

inline Trajectory build_trajectory(const PredictiveRule& rule, const ContextTable& context,
                                   const QuerySpec& queries, std::uint64_t seed,
                                   const TrajectoryOptions& opts = {}) {
  const TaskKind& task = context.task();
  if (context.size() < 2) throw DataError("trajectory needs a context of at least 2 rows");
  if (!rule.supports(task)) throw RuleError(rule.id() + ": unsupported task " + to_string(task.type));
  if (opts.stride == 0) throw DataError("trajectory stride must be positive");
  if (queries.dim() != context.dim()) throw DataError("query dimension differs from context");

  const ContextTable table = opts.permute ? permute_rows(context, seed) : context;
  const std::size_t n = table.size();

  std::size_t k_min = 1;
  if (opts.start == TrajectoryOptions::Start::WithPrior) {
    if (!rule.has_prior_predictive()) throw RuleError(rule.id() + ": no prior predictive available");
    k_min = 0;
  } else if (opts.start == TrajectoryOptions::Start::Auto && rule.has_prior_predictive()) {
    k_min = 0;
  }

  Trajectory tr;
  tr.n = n;
  tr.permutation_seed = seed;
  tr.rule_id = rule.id();
  tr.queries = queries;
  for (std::size_t k = k_min; k <= n; k += opts.stride) tr.ks.push_back(k);
  if (tr.ks.back() != n) tr.ks.push_back(n);

  std::vector<std::vector<double>> values(tr.ks.size());
  std::vector<std::size_t> pending;  // indices into ks that need the real rule
  const bool fallback = fallback_enabled(rule, opts.fallback);
  for (std::size_t i = 0; i < tr.ks.size(); ++i) {
    const std::size_t k = tr.ks[i];
    if (fallback) {
      if (auto fb = degenerate_fallback(table.prefix(k), queries, task)) {
        values[i] = std::move(*fb);
        continue;
      }
    }
    pending.push_back(i);
  }

  parallel_chunks(pending.size(), opts.workers, [&](std::size_t b, std::size_t e) {
    std::vector<std::size_t> lengths;
    for (std::size_t j = b; j < e; ++j) lengths.push_back(tr.ks[pending[j]]);
    auto out = rule.predict_prefixes(task, table.rows(), lengths, queries);
    if (out.size() != lengths.size()) throw RuleError(rule.id() + ": batch size mismatch");
    for (std::size_t j = b; j < e; ++j) values[pending[j]] = std::move(out[j - b]);
  });

  tr.vectors.reserve(tr.ks.size());
  for (std::size_t i = 0; i < tr.ks.size(); ++i) {
    if (values[i].size() != queries.size()) {
      throw RuleError(rule.id() + ": wrong output length at prefix " + std::to_string(tr.ks[i]));
    }
    tr.vectors.push_back(make_predictive(std::move(values[i]), tr.ks[i], rule.id()));
  }
  for (std::size_t i = 1; i < tr.vectors.size(); ++i) {
    std::vector<double> d(queries.size());
    for (std::size_t j = 0; j < d.size(); ++j)
      d[j] = tr.vectors[i].values[j] - tr.vectors[i - 1].values[j];
    tr.increment_ks.push_back(tr.ks[i]);
    tr.increments.push_back(std::move(d));
  }
  return tr;
}

/// The increment list, after re-checking the difference identity.
inline const std::vector<std::vector<double>>& increments_matrix(const Trajectory& tr) {
  if (tr.vectors.size() != tr.ks.size() || tr.increments.size() + 1 != tr.vectors.size() ||
      tr.increment_ks.size() != tr.increments.size()) {
    throw DataError("corrupted trajectory: inconsistent lengths");
  }
  for (std::size_t i = 0; i < tr.increments.size(); ++i) {
    const auto& d = tr.increments[i];
    if (d.size() != tr.m() || tr.increment_ks[i] != tr.ks[i + 1]) {
      throw DataError("corrupted trajectory: malformed increment " + std::to_string(i));
    }
    for (std::size_t j = 0; j < d.size(); ++j) {
      const double expect = tr.vectors[i + 1].values[j] - tr.vectors[i].values[j];
      if (std::abs(d[j] - expect) > 1e-12 || std::abs(d[j]) > 1.0) {
        throw DataError("corrupted trajectory: increment identity fails at k=" +
                        std::to_string(tr.increment_ks[i]) + ", query " + std::to_string(j));
      }
    }
  }
  return tr.increments;
}

/// CSV dump with columns k, query_index, value, delta (delta empty at the
/// first evaluated prefix).
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "k,query_index,value,delta\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < tr.vectors.size(); ++i) {
    for (std::size_t j = 0; j < tr.m(); ++j) {
      os << tr.ks[i] << ',' << j << ',' << tr.vectors[i].values[j] << ',';
      if (i > 0) os << tr.increments[i - 1][j];
      os << '\n';
    }
  }
  os.precision(old);
}

}  // namespace pclt
