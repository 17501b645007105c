#pragma once

// Asymptotic covariance estimators of the predictive CLT.
//
//   V_n = (1/n) sum_k k^2 Delta_k Delta_k^T       (trajectory volatility)
//   U_n = n^2 E[Delta_{n+1} Delta_{n+1}^T | z_1:n] (one-step-ahead)
//
// U_n draws the next covariate from the empirical measure of the context and
// the next response from the rule's own predictive at that covariate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pclt/core.hpp"
#include "pclt/parallel.hpp"
#include "pclt/rules.hpp"
#include "pclt/trajectory.hpp"

namespace pclt {

enum class CovKind { Vn, Un };

inline const char* to_string(CovKind k) { return k == CovKind::Vn ? "Vn" : "Un"; }

struct CovarianceEstimate {
  Eigen::MatrixXd matrix;
  std::size_t n = 0;
  CovKind kind = CovKind::Vn;
  std::size_t mc_samples = 0;  // Un only; 0 for the exact inner expectation
  double jitter = 0.0;
  std::uint64_t seed = 0;

  std::size_t m() const { return static_cast<std::size_t>(matrix.rows()); }
};

inline CovarianceEstimate vn(const Trajectory& tr) {
  const auto& inc = increments_matrix(tr);
  if (inc.empty()) throw DataError("vn: trajectory has no increments");
  const Eigen::Index m = static_cast<Eigen::Index>(tr.m());
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t i = 0; i < inc.size(); ++i) {
    const double k = static_cast<double>(tr.increment_ks[i]);
    const Eigen::Map<const Eigen::VectorXd> d(inc[i].data(), m);
    acc.selfadjointView<Eigen::Lower>().rankUpdate(d, k * k);
  }
  CovarianceEstimate est;
  est.matrix = acc.selfadjointView<Eigen::Lower>();
  est.matrix /= static_cast<double>(tr.n);
  est.n = tr.n;
  est.kind = CovKind::Vn;
  est.seed = tr.permutation_seed;
  return est;
}

/// Diagonal of V_n only; O(n m) instead of O(n m^2).
inline std::vector<double> vn_diagonal(const Trajectory& tr) {
  const auto& inc = increments_matrix(tr);
  if (inc.empty()) throw DataError("vn: trajectory has no increments");
  std::vector<double> diag(tr.m(), 0.0);
  for (std::size_t i = 0; i < inc.size(); ++i) {
    const double k = static_cast<double>(tr.increment_ks[i]);
    for (std::size_t j = 0; j < diag.size(); ++j) diag[j] += k * k * inc[i][j] * inc[i][j];
  }
  for (auto& v : diag) v /= static_cast<double>(tr.n);
  return diag;
}

struct UnOptions {
  enum class Mode { Auto, Exact, MonteCarlo };
  /// Auto: exact label enumeration for classification with K <= 10,
  /// Monte Carlo otherwise.
  Mode mode = Mode::Auto;
  std::size_t mc_samples = 1000;
  std::size_t workers = 0;
  FallbackPolicy fallback = FallbackPolicy::Auto;
};

namespace detail {

/// Draw a regression response at x from a rule that only reports CDF values:
/// piecewise-uniform within the cells of the task's threshold grid, with the
/// tail masses spread over one extra cell width beyond each end.
inline double sample_from_cdf_grid(const PredictiveRule& rule, const TaskKind& task, Rows prefix,
                                   const std::vector<double>& x, Rng& rng, FallbackPolicy policy) {
  const auto& t = task.thresholds;
  if (t.size() < 2) {
    throw RuleError(rule.id() + ": regression U_n needs a threshold grid of at least 2 points");
  }
  std::vector<Query> qs;
  for (double v : t) qs.push_back({x, v});
  auto cdf = predict_checked(rule, task, prefix, QuerySpec(std::move(qs)), policy);
  for (std::size_t i = 1; i < cdf.size(); ++i) cdf[i] = std::max(cdf[i], cdf[i - 1]);
  const double u = rng.uniform();
  const std::size_t J = t.size();
  if (u < cdf[0]) {
    const double w = t[1] - t[0];
    return t[0] - w + w * (cdf[0] > 0 ? u / cdf[0] : 1.0);
  }
  for (std::size_t j = 1; j < J; ++j) {
    if (u < cdf[j]) {
      const double mass = cdf[j] - cdf[j - 1];
      return t[j - 1] + (t[j] - t[j - 1]) * (u - cdf[j - 1]) / mass;
    }
  }
  const double w = t[J - 1] - t[J - 2];
  const double tail = 1.0 - cdf[J - 1];
  return t[J - 1] + w * (tail > 0 ? (u - cdf[J - 1]) / tail : 0.0);
}

}  // namespace detail

/// One-step-ahead estimator U_n on the full context (rows in the given order).
inline CovarianceEstimate un(const PredictiveRule& rule, const ContextTable& context,
                             const QuerySpec& queries, std::uint64_t seed,
                             const UnOptions& opts = {}) {
  const TaskKind& task = context.task();
  if (!rule.supports(task)) throw RuleError(rule.id() + ": unsupported task " + to_string(task.type));
  const std::size_t n = context.size();
  const Eigen::Index m = static_cast<Eigen::Index>(queries.size());
  const auto base = predict_checked(rule, task, context.rows(), queries, opts.fallback);

  const bool exact = task.is_classification() &&
                     (opts.mode == UnOptions::Mode::Exact ||
                      (opts.mode == UnOptions::Mode::Auto && task.classes <= 10));
  if (!exact && opts.mc_samples == 0) throw DataError("un: mc_samples must be at least 1");

  auto delta_for = [&](std::vector<Observation>& buf, const std::vector<double>& x, double y) {
    buf.back().x = x;
    buf.back().y = y;
    auto next = predict_checked(rule, task, buf, queries, opts.fallback);
    Eigen::VectorXd d(m);
    for (Eigen::Index j = 0; j < m; ++j) d[j] = next[static_cast<std::size_t>(j)] - base[static_cast<std::size_t>(j)];
    return d;
  };

  CovarianceEstimate est;
  est.n = n;
  est.kind = CovKind::Un;
  est.seed = seed;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);

  if (exact) {
    // Empirical covariate measure, grouped by distinct covariate.
    std::map<std::vector<double>, std::size_t> support;
    for (const auto& o : context.rows()) ++support[o.x];
    std::vector<std::pair<std::vector<double>, std::size_t>> atoms(support.begin(), support.end());
    std::vector<Eigen::MatrixXd> partial(atoms.size());
    parallel_chunks(atoms.size(), opts.workers, [&](std::size_t b, std::size_t e) {
      std::vector<Observation> buf(context.rows().begin(), context.rows().end());
      buf.emplace_back();
      for (std::size_t a = b; a < e; ++a) {
        const auto& [x, mult] = atoms[a];
        const auto probs = label_distribution(rule, task, context.rows(), x, opts.fallback);
        Eigen::MatrixXd local = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t y = 0; y < probs.size(); ++y) {
          if (probs[y] <= 0.0) continue;
          const Eigen::VectorXd d = delta_for(buf, x, static_cast<double>(y));
          local.noalias() += probs[y] * d * d.transpose();
        }
        partial[a] = local * (static_cast<double>(mult) / static_cast<double>(n));
      }
    });
    for (const auto& p : partial) acc += p;
    est.mc_samples = 0;
  } else {
    const std::size_t draws = opts.mc_samples;
    std::vector<Eigen::VectorXd> deltas(draws);
    parallel_chunks(draws, opts.workers, [&](std::size_t b, std::size_t e) {
      std::vector<Observation> buf(context.rows().begin(), context.rows().end());
      buf.emplace_back();
      for (std::size_t i = b; i < e; ++i) {
        Rng rng(derive_seed(derive_seed(seed, "un-draws"), i));
        const auto& x = context[rng.below(n)].x;
        double y;
        if (task.is_classification()) {
          const auto probs = label_distribution(rule, task, context.rows(), x, opts.fallback);
          y = sample_discrete(probs, rng);
        } else if (auto s = rule.sample_response(task, context.rows(), x, rng)) {
          y = *s;
        } else {
          y = detail::sample_from_cdf_grid(rule, task, context.rows(), x, rng, opts.fallback);
        }
        deltas[i] = delta_for(buf, x, y);
      }
    });
    for (const auto& d : deltas) acc.noalias() += d * d.transpose();
    acc /= static_cast<double>(draws);
    est.mc_samples = draws;
  }
  est.matrix = acc * (static_cast<double>(n) * static_cast<double>(n));
  est.matrix = 0.5 * (est.matrix + est.matrix.transpose()).eval();
  return est;
}

/// Adds the smallest jitter delta * I, delta in {0, 1e-12, 1e-10, 1e-8}, for
/// which a Cholesky factorization succeeds.
inline CovarianceEstimate regularize_psd(const CovarianceEstimate& est) {
  const Eigen::MatrixXd& a = est.matrix;
  if (a.rows() != a.cols()) throw NumericError("regularize_psd: matrix is not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NumericError("regularize_psd: matrix is not symmetric");
  }
  static constexpr std::array<double, 4> ladder = {0.0, 1e-12, 1e-10, 1e-8};
  for (double delta : ladder) {
    Eigen::MatrixXd trial = a;
    trial.diagonal().array() += delta;
    Eigen::LLT<Eigen::MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success) {
      CovarianceEstimate out = est;
      out.matrix = std::move(trial);
      out.jitter = est.jitter + delta;
      return out;
    }
  }
  throw NumericError("regularize_psd: matrix still indefinite after jitter 1e-8");
}

inline nlohmann::ordered_json to_json(const CovarianceEstimate& est) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(est.matrix.size()));
  for (Eigen::Index i = 0; i < est.matrix.rows(); ++i)
    for (Eigen::Index j = 0; j < est.matrix.cols(); ++j) flat.push_back(est.matrix(i, j));
  return nlohmann::ordered_json{{"kind", to_string(est.kind)}, {"n", est.n},
                                {"m", est.m()},               {"matrix", flat},
                                {"jitter", est.jitter},       {"mc_samples", est.mc_samples},
                                {"seed", est.seed}};
}

inline CovarianceEstimate covariance_from_json(const nlohmann::ordered_json& j) {
  CovarianceEstimate est;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "Vn" && kind != "Un") throw DataError("unknown covariance kind " + kind);
  est.kind = kind == "Vn" ? CovKind::Vn : CovKind::Un;
  est.n = j.at("n").get<std::size_t>();
  const auto m = static_cast<Eigen::Index>(j.at("m").get<std::size_t>());
  const auto flat = j.at("matrix").get<std::vector<double>>();
  if (flat.size() != static_cast<std::size_t>(m * m)) throw DataError("matrix size does not match m");
  est.matrix.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index c = 0; c < m; ++c) est.matrix(i, c) = flat[static_cast<std::size_t>(i * m + c)];
  est.jitter = j.at("jitter").get<double>();
  est.mc_samples = j.at("mc_samples").get<std::size_t>();
  est.seed = j.at("seed").get<std::uint64_t>();
  return est;
}

}  // namespace pclt
