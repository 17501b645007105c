#pragma once

// Quasi-martingale diagnostics for a binary rule: rollouts under the rule's
// own predictive law, exact conditional drift b_n = E[Delta_n | Z_{1:n-1}]
// and second moment b'_n = E[Delta_n^2 | Z_{1:n-1}] at a query point,
// power-law fits on log-log axes and partial sums of E|b_n|.
//
// Index convention: b_n is computed from the prefix of length n - 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pclt/core.hpp"
#include "pclt/error.hpp"
#include "pclt/parallel.hpp"
#include "pclt/random.hpp"
#include "pclt/rules.hpp"

namespace pclt {

/// Discrete covariate law used both for rollouts and for the exact inner
/// expectation.
struct CovariateSupport {
  std::vector<double> values = {-1.0, 0.0, 1.0, 2.0};
  std::vector<double> probs = {0.25, 0.25, 0.25, 0.25};

  void validate() const {
    if (values.empty() || values.size() != probs.size())
      throw DataError("covariate support needs matching, nonempty values and probabilities");
    double s = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw DataError("covariate probabilities must be non-negative");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw DataError("covariate probabilities must sum to 1");
  }
};

struct RolloutConfig {
  std::size_t n0 = 25;
  std::size_t n_end = 1025;
  CovariateSupport support;
  double x_star = 1.0;
  /// Explicit initial context; when empty, n0 rows are drawn from
  /// P(Y=1|x) = sigmoid(init_slope x + init_intercept) on the support and
  /// redrawn until both labels appear.
  std::vector<Observation> initial;
  double init_slope = 2.0;
  double init_intercept = -0.5;
  std::uint64_t seed = 0;
  FallbackPolicy fallback = FallbackPolicy::Auto;

  void validate() const {
    support.validate();
    const std::size_t n_init = initial.empty() ? n0 : initial.size();
    if (n_init < 2) throw DataError("rollout initial context needs at least 2 rows");
    if (n_end < n_init) throw DataError("rollout end must not precede the initial context");
  }
};

namespace detail {

inline double draw_support(const CovariateSupport& s, Rng& rng) {
  return s.values[static_cast<std::size_t>(sample_discrete(s.probs, rng))];
}

inline std::vector<Observation> initial_context(const RolloutConfig& cfg, Rng& rng) {
  if (!cfg.initial.empty()) return cfg.initial;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<Observation> rows;
    bool seen[2] = {false, false};
    for (std::size_t i = 0; i < cfg.n0; ++i) {
      const double x = draw_support(cfg.support, rng);
      const double p = 1.0 / (1.0 + std::exp(-(cfg.init_slope * x + cfg.init_intercept)));
      const int y = rng.bernoulli(p) ? 1 : 0;
      seen[y] = true;
      rows.push_back({{x}, static_cast<double>(y)});
    }
    if (seen[0] && seen[1]) return rows;
  }
  throw DataError("could not draw an initial context containing both labels");
}

}  // namespace detail

/// Extends the initial context to n_end rows by iterating the rule:
/// X_t from the covariate law, Y_t ~ Bernoulli(g_{t-1}(X_t)).
inline ContextTable rollout(const PredictiveRule& rule, const RolloutConfig& cfg) {
  cfg.validate();
  const TaskKind task = TaskKind::binary();
  if (!rule.supports(task)) throw RuleError(rule.id() + ": rollouts need a binary rule");
  Rng rng(derive_seed(cfg.seed, "rollout"));
  std::vector<Observation> rows = detail::initial_context(cfg, rng);
  rows.reserve(std::max(cfg.n_end, rows.size()));
  while (rows.size() < cfg.n_end) {
    const double x = detail::draw_support(cfg.support, rng);
    const double g = predict_checked(rule, task, rows, QuerySpec({{{x}, 1.0}}), cfg.fallback)[0];
    rows.push_back({{x}, rng.bernoulli(g) ? 1.0 : 0.0});
  }
  return ContextTable::validated(std::move(rows), task);
}

struct ConditionalMoments {
  double b = 0.0;
  double b2 = 0.0;
};

/// Exact E[Delta | prefix] and E[Delta^2 | prefix] at x*, enumerating every
/// support point and both labels of the next observation.
inline ConditionalMoments conditional_moments(const PredictiveRule& rule, Rows prefix, double x_star,
                                              const CovariateSupport& support,
                                              FallbackPolicy policy = FallbackPolicy::Auto) {
  support.validate();
  const TaskKind task = TaskKind::binary();
  const std::size_t J = support.values.size();
  std::vector<Query> qs{{{x_star}, 1.0}};
  for (double v : support.values) qs.push_back({{v}, 1.0});
  const auto g_prev = predict_checked(rule, task, prefix, QuerySpec(std::move(qs)), policy);
  const QuerySpec star({{{x_star}, 1.0}});

  std::vector<Observation> buf(prefix.begin(), prefix.end());
  buf.emplace_back();
  ConditionalMoments cm;
  for (std::size_t j = 0; j < J; ++j) {
    if (support.probs[j] == 0.0) continue;
    double d[2];
    for (int y = 0; y < 2; ++y) {
      buf.back() = {{support.values[j]}, static_cast<double>(y)};
      d[y] = predict_checked(rule, task, buf, star, policy)[0] - g_prev[0];
    }
    const double gj = g_prev[j + 1];
    cm.b += support.probs[j] * ((1.0 - gj) * d[0] + gj * d[1]);
    cm.b2 += support.probs[j] * ((1.0 - gj) * d[0] * d[0] + gj * d[1] * d[1]);
  }
  return cm;
}

// ---------------------------------------------------------------------------
// Fits and sums

inline constexpr double kDiagnosticFloor = 1e-13;

struct PowerLawFit {
  double c = 0.0;         // prefactor C in value ~ C n^{-exponent}
  double exponent = 0.0;  // -slope
  double slope = 0.0;
  double se = 0.0;        // standard error of the slope
  double ci_lo = 0.0, ci_hi = 0.0;  // 95% interval for the exponent
  bool floored = false;             // some values were raised to the floor
};

/// OLS of log(value) on log(n). Values below 1e-13 are floored and flagged.
inline PowerLawFit power_law_fit(std::span<const double> ns, std::span<const double> values) {
  if (ns.size() != values.size()) throw DataError("power_law_fit: length mismatch");
  if (ns.size() < 3) throw DataError("power_law_fit needs at least 3 points");
  PowerLawFit f;
  const std::size_t n = ns.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ns[i] > 0)) throw DataError("power_law_fit: abscissae must be positive");
    double v = values[i];
    if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("power_law_fit: values must be non-negative");
    if (v < kDiagnosticFloor) {
      v = kDiagnosticFloor;
      f.floored = true;
    }
    lx[i] = std::log(ns[i]);
    ly[i] = std::log(v);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / double(n);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / double(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw DataError("power_law_fit: all abscissae equal");
  f.slope = sxy / sxx;
  const double icpt = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - icpt - f.slope * lx[i];
    rss += r * r;
  }
  f.se = std::sqrt(rss / double(n - 2) / sxx);
  f.c = std::exp(icpt);
  f.exponent = -f.slope;
  f.ci_lo = f.exponent - 1.96 * f.se;
  f.ci_hi = f.exponent + 1.96 * f.se;
  return f;
}

struct PartialSumTrace {
  std::vector<double> grid;
  std::vector<double> sums;
  bool weighted = false;
  /// Tail exponent of the (weighted) integrand; the series is flagged as
  /// divergent when it is at most 1.
  double tail_exponent = 0.0;
  bool divergent = false;
};

/// Block-trapezoid approximation of sum_{m <= n} w(m) v(m) on a sparse
/// increasing grid, w(m) = sqrt(m) when weighted. Between grid points
/// g_{i-1} < g_i the L - 1 interior terms are interpolated linearly, so a
/// dense grid reproduces the direct sum.
inline PartialSumTrace partial_sums(std::span<const double> grid, std::span<const double> values,
                                    bool weighted) {
  if (grid.size() != values.size()) throw DataError("partial_sums: length mismatch");
  if (grid.empty()) throw DataError("partial_sums: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw DataError("partial_sums: grid must be increasing");
  PartialSumTrace tr;
  tr.grid.assign(grid.begin(), grid.end());
  tr.weighted = weighted;
  std::vector<double> v(values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (weighted ? std::sqrt(grid[i]) : 1.0) * values[i];
  tr.sums.resize(v.size());
  tr.sums[0] = v[0];
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double len = grid[i] - grid[i - 1];
    tr.sums[i] = tr.sums[i - 1] + v[i] + (len - 1.0) * (v[i - 1] + v[i]) / 2.0;
  }
  // Tail behaviour from the upper half of the grid.
  const std::size_t start = v.size() / 2;
  if (v.size() - start >= 3) {
    const bool all_zero = std::all_of(v.begin() + static_cast<std::ptrdiff_t>(start), v.end(),
                                      [](double a) { return a == 0.0; });
    if (!all_zero) {
      std::vector<double> tv(v.begin() + static_cast<std::ptrdiff_t>(start), v.end());
      for (auto& a : tv) a = std::abs(a);
      const auto fit = power_law_fit(std::span<const double>(grid).subspan(start), tv);
      tr.tail_exponent = fit.exponent;
      tr.divergent = fit.exponent <= 1.0;
    } else {
      tr.tail_exponent = std::numeric_limits<double>::infinity();
    }
  }
  return tr;
}

/// `count` geometrically spaced integers on [lo, hi], rounded, deduplicated.
inline std::vector<std::size_t> tail_grid(std::size_t lo, std::size_t hi, std::size_t count) {
  if (lo == 0 || hi < lo) throw DataError("tail_grid needs 0 < lo <= hi");
  if (count == 0) throw DataError("tail_grid needs count >= 1");
  std::vector<std::size_t> g;
  const double a = std::log(double(lo)), b = std::log(double(hi));
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : double(i) / double(count - 1);
    g.push_back(static_cast<std::size_t>(std::llround(std::exp(a + (b - a) * t))));
  }
  g.front() = lo;
  g.back() = hi;
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

struct MomentTrace {
  std::vector<std::size_t> grid;  // n values; b_n uses the first n - 1 rows
  std::vector<double> b;
  std::vector<double> b2;
  std::size_t rollout_id = 0;
};

inline MomentTrace moment_trace(const PredictiveRule& rule, const ContextTable& seq,
                                const std::vector<std::size_t>& grid, double x_star,
                                const CovariateSupport& support, std::size_t rollout_id = 0,
                                FallbackPolicy policy = FallbackPolicy::Auto) {
  MomentTrace tr;
  tr.rollout_id = rollout_id;
  for (std::size_t n : grid) {
    if (n < 1 || n - 1 > seq.size()) throw DataError("moment grid point outside the rollout");
    if (!tr.grid.empty() && n <= tr.grid.back()) throw DataError("moment grid must be increasing");
    const auto cm = conditional_moments(rule, seq.prefix(n - 1), x_star, support, policy);
    tr.grid.push_back(n);
    tr.b.push_back(cm.b);
    tr.b2.push_back(std::max(cm.b2, 0.0));
  }
  return tr;
}

struct GammaFit {
  std::vector<double> gammas;  // per rollout
  double gamma_med = 0.0;
  /// n^gamma_med * b'_n per rollout, on each trace's grid.
  std::vector<std::vector<double>> rescaled;
  bool floored = false;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw DataError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline GammaFit gamma_fit(const std::vector<MomentTrace>& traces) {
  if (traces.empty()) throw DataError("gamma_fit needs at least one trace");
  GammaFit g;
  for (const auto& t : traces) {
    std::vector<double> ns(t.grid.begin(), t.grid.end());
    const auto f = power_law_fit(ns, t.b2);
    g.gammas.push_back(f.exponent);
    g.floored = g.floored || f.floored;
  }
  g.gamma_med = median(g.gammas);
  for (const auto& t : traces) {
    std::vector<double> r(t.grid.size());
    for (std::size_t i = 0; i < r.size(); ++i)
      r[i] = std::pow(double(t.grid[i]), g.gamma_med) * t.b2[i];
    g.rescaled.push_back(std::move(r));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Full diagnostic run

struct DiagnoseConfig {
  RolloutConfig rollout;
  std::size_t rollouts = 100;
  std::size_t m_tail = 100;
  std::size_t tail_offset = 100;  // tail grid starts at n0 + tail_offset
  std::size_t early_step = 5;     // every fifth n between n0 and n0 + tail_offset
  std::size_t workers = 0;
};

struct DiagnosticReport {
  std::vector<double> tail_ns;
  std::vector<double> mean_abs_b;  // across rollouts, on the tail grid
  PowerLawFit beta;
  GammaFit gamma;
  PartialSumTrace s_trace, t_trace;
  std::vector<MomentTrace> traces;
  bool qm_plausible = false;
  bool rootn_qm_plausible = false;
};

inline DiagnosticReport diagnose(const PredictiveRule& rule, const DiagnoseConfig& cfg) {
  cfg.rollout.validate();
  if (cfg.rollouts == 0) throw DataError("diagnose needs at least one rollout");
  const std::size_t n0 = cfg.rollout.initial.empty() ? cfg.rollout.n0 : cfg.rollout.initial.size();
  const std::size_t n_end = cfg.rollout.n_end;
  const std::size_t tail_lo = std::min(n0 + cfg.tail_offset, n_end);
  const auto tail = tail_grid(tail_lo, n_end, cfg.m_tail);
  if (tail.size() < 3) throw DataError("tail grid has fewer than 3 points; increase n_end");
  std::vector<std::size_t> grid;
  for (std::size_t n = std::max<std::size_t>(n0, 1); n < tail_lo; n += std::max<std::size_t>(cfg.early_step, 1))
    grid.push_back(n);
  grid.insert(grid.end(), tail.begin(), tail.end());

  DiagnosticReport rep;
  rep.traces.resize(cfg.rollouts);
  parallel_chunks(cfg.rollouts, cfg.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      RolloutConfig rc = cfg.rollout;
      rc.seed = derive_seed(cfg.rollout.seed, static_cast<std::uint64_t>(r));
      const auto seq = rollout(rule, rc);
      rep.traces[r] = moment_trace(rule, seq, grid, rc.x_star, rc.support, r, rc.fallback);
    }
  });

  std::vector<double> all_ns(grid.begin(), grid.end()), all_mean(grid.size(), 0.0);
  for (const auto& t : rep.traces)
    for (std::size_t i = 0; i < grid.size(); ++i) all_mean[i] += std::abs(t.b[i]) / double(cfg.rollouts);

  const std::size_t off = grid.size() - tail.size();
  rep.tail_ns.assign(all_ns.begin() + static_cast<std::ptrdiff_t>(off), all_ns.end());
  rep.mean_abs_b.assign(all_mean.begin() + static_cast<std::ptrdiff_t>(off), all_mean.end());
  rep.beta = power_law_fit(rep.tail_ns, rep.mean_abs_b);

  std::vector<MomentTrace> tail_traces;
  for (const auto& t : rep.traces) {
    MomentTrace tt;
    tt.rollout_id = t.rollout_id;
    tt.grid.assign(t.grid.begin() + static_cast<std::ptrdiff_t>(off), t.grid.end());
    tt.b.assign(t.b.begin() + static_cast<std::ptrdiff_t>(off), t.b.end());
    tt.b2.assign(t.b2.begin() + static_cast<std::ptrdiff_t>(off), t.b2.end());
    tail_traces.push_back(std::move(tt));
  }
  rep.gamma = gamma_fit(tail_traces);
  rep.s_trace = partial_sums(all_ns, all_mean, false);
  rep.t_trace = partial_sums(all_ns, all_mean, true);
  rep.qm_plausible = rep.beta.exponent > 1.0;
  rep.rootn_qm_plausible = rep.beta.exponent > 1.5;
  return rep;
}

inline nlohmann::ordered_json to_json(const DiagnosticReport& r) {
  using nlohmann::ordered_json;
  auto trace = [](const PartialSumTrace& t) {
    return ordered_json{{"grid", t.grid},
                        {"sums", t.sums},
                        {"tail_exponent", std::isfinite(t.tail_exponent) ? ordered_json(t.tail_exponent)
                                                                         : ordered_json(nullptr)},
                        {"divergent", t.divergent}};
  };
  return ordered_json{
      {"beta_hat", r.beta.exponent},
      {"ci", {r.beta.ci_lo, r.beta.ci_hi}},
      {"gamma_med", r.gamma.gamma_med},
      {"gammas", r.gamma.gammas},
      {"S_trace", trace(r.s_trace)},
      {"T_trace", trace(r.t_trace)},
      {"flags",
       {{"qm_plausible", r.qm_plausible},
        {"rootn_qm_plausible", r.rootn_qm_plausible},
        {"floored", r.beta.floored || r.gamma.floored}}},
      {"tail", {{"n", r.tail_ns}, {"mean_abs_b", r.mean_abs_b}}}};
}

/// Long-format CSV of every rollout's b_n and b'_n.
inline void write_moment_csv(std::ostream& os, const std::vector<MomentTrace>& traces) {
  os << "rollout,n,b,b2\n";
  const auto old = os.precision(17);
  for (const auto& t : traces)
    for (std::size_t i = 0; i < t.grid.size(); ++i)
      os << t.rollout_id << ',' << t.grid[i] << ',' << t.b[i] << ',' << t.b2[i] << '\n';
  os.precision(old);
}

}  // namespace pclt
