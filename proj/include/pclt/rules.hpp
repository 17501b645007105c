#pragma once

// Predictive-rule contract, the degenerate-prefix substitution, and the
// conjugate Bayesian rules whose limiting predictive law is known exactly.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "pclt/core.hpp"
#include "pclt/random.hpp"
#include "pclt/special.hpp"

namespace pclt {

/// A one-step-ahead predictive rule P_k(x, A) evaluated on a prefix z_{1:k}.
///
/// Implementations must be pure: the output depends only on (task, prefix,
/// queries) and the rule's own configuration, so evaluations on different
/// prefixes may run concurrently.
class PredictiveRule {
 public:
  virtual ~PredictiveRule() = default;

  virtual std::string id() const = 0;
  virtual bool supports(const TaskKind& task) const = 0;

  /// Predictive probability of each query's event given `prefix`. An empty
  /// prefix is only legal when has_prior_predictive() is true.
  virtual std::vector<double> predict(const TaskKind& task, Rows prefix,
                                      const QuerySpec& queries) const = 0;

  /// Predictions on the prefixes context[0:len) for each requested length.
  virtual std::vector<std::vector<double>> predict_prefixes(const TaskKind& task, Rows context,
                                                            std::span<const std::size_t> lengths,
                                                            const QuerySpec& queries) const {
    std::vector<std::vector<double>> out;
    out.reserve(lengths.size());
    for (std::size_t len : lengths) out.push_back(predict(task, context.first(len), queries));
    return out;
  }

  /// True when P_0 (the empty-context predictive) is defined.
  virtual bool has_prior_predictive() const { return false; }

  /// Whether the engine should substitute observed statistics on
  /// label-degenerate prefixes before calling this rule.
  virtual bool wants_degenerate_fallback() const { return true; }

  /// Exact draw of a regression response at x, when the rule can provide one.
  virtual std::optional<double> sample_response(const TaskKind&, Rows, const std::vector<double>&,
                                                Rng&) const {
    return std::nullopt;
  }
};

using RulePtr = std::shared_ptr<const PredictiveRule>;

enum class FallbackPolicy { Auto, Always, Never };

/// Observed-statistics substitute for prefixes without label diversity.
///
/// Classification: all labels equal c gives probability 1 for class c and 0
/// otherwise. Regression: fewer than two distinct responses gives the
/// empirical CDF of y_{1:k} at each threshold, ignoring x. Returns nullopt
/// when the prefix is diverse (or empty) and the real rule must be called.
inline std::optional<std::vector<double>> degenerate_fallback(Rows prefix, const QuerySpec& queries,
                                                              const TaskKind& task) {
  if (prefix.empty()) return std::nullopt;
  const double first = prefix.front().y;
  const bool constant = std::all_of(prefix.begin(), prefix.end(),
                                    [first](const Observation& o) { return o.y == first; });
  if (!constant) return std::nullopt;
  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    if (task.is_classification()) {
      out.push_back(static_cast<int>(q.event) == static_cast<int>(first) ? 1.0 : 0.0);
    } else {
      out.push_back(first <= q.event ? 1.0 : 0.0);
    }
  }
  return out;
}

inline bool fallback_enabled(const PredictiveRule& rule, FallbackPolicy policy) {
  switch (policy) {
    case FallbackPolicy::Always: return true;
    case FallbackPolicy::Never: return false;
    case FallbackPolicy::Auto: return rule.wants_degenerate_fallback();
  }
  return true;
}

/// Rule evaluation with the degenerate-prefix substitution applied per policy.
inline std::vector<double> predict_checked(const PredictiveRule& rule, const TaskKind& task,
                                           Rows prefix, const QuerySpec& queries,
                                           FallbackPolicy policy = FallbackPolicy::Auto) {
  if (fallback_enabled(rule, policy)) {
    if (auto fb = degenerate_fallback(prefix, queries, task)) return *fb;
  }
  if (prefix.empty() && !rule.has_prior_predictive()) {
    throw RuleError(rule.id() + ": no prior predictive for an empty context");
  }
  auto v = rule.predict(task, prefix, queries);
  if (v.size() != queries.size()) {
    throw RuleError(rule.id() + ": returned " + std::to_string(v.size()) + " values for " +
                    std::to_string(queries.size()) + " queries");
  }
  check_probabilities(v, rule.id());
  return v;
}

/// Label distribution at a single covariate: {P(y=0), ..., P(y=K-1)}.
inline std::vector<double> label_distribution(const PredictiveRule& rule, const TaskKind& task,
                                              Rows prefix, const std::vector<double>& x,
                                              FallbackPolicy policy = FallbackPolicy::Auto) {
  if (!task.is_classification()) throw RuleError("label_distribution needs a classification task");
  if (task.type == TaskType::Binary) {
    const double p1 = predict_checked(rule, task, prefix, QuerySpec({{x, 1.0}}), policy)[0];
    return {1.0 - p1, p1};
  }
  auto p = predict_checked(rule, task, prefix, QuerySpec::all_classes(x, task.classes), policy);
  check_distribution(p, rule.id(), 1e-6);
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= s;
  return p;
}

// ---------------------------------------------------------------------------
// Covariate binning

/// Partition of one covariate coordinate. Interval bins are half-open
/// [a, b); the right edge of the last bin belongs to it. Support bins match
/// exact discrete values.
class Binning {
 public:
  /// One bin covering everything.
  static Binning single() { return Binning{}; }

  static Binning intervals(std::vector<double> edges, std::size_t coordinate = 0) {
    if (edges.size() < 2) throw DataError("interval binning needs at least two edges");
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (!(edges[i] > edges[i - 1])) throw DataError("bin edges must be strictly increasing");
    }
    Binning b;
    b.kind_ = Kind::Intervals;
    b.points_ = std::move(edges);
    b.coord_ = coordinate;
    return b;
  }

  static Binning uniform(double lo, double hi, std::size_t count, std::size_t coordinate = 0) {
    if (count == 0 || !(hi > lo)) throw DataError("uniform binning needs count >= 1 and hi > lo");
    std::vector<double> e(count + 1);
    for (std::size_t i = 0; i <= count; ++i) e[i] = lo + (hi - lo) * double(i) / double(count);
    return intervals(std::move(e), coordinate);
  }

  static Binning support(std::vector<double> values, std::size_t coordinate = 0) {
    if (values.empty()) throw DataError("support binning needs at least one value");
    std::sort(values.begin(), values.end());
    if (std::adjacent_find(values.begin(), values.end()) != values.end())
      throw DataError("support values must be distinct");
    Binning b;
    b.kind_ = Kind::Support;
    b.points_ = std::move(values);
    b.coord_ = coordinate;
    return b;
  }

  std::size_t count() const {
    switch (kind_) {
      case Kind::Single: return 1;
      case Kind::Intervals: return points_.size() - 1;
      case Kind::Support: return points_.size();
    }
    return 0;
  }

  std::optional<std::size_t> bin_of(const std::vector<double>& x) const {
    if (kind_ == Kind::Single) return 0;
    if (coord_ >= x.size()) return std::nullopt;
    const double v = x[coord_];
    if (kind_ == Kind::Support) {
      auto it = std::lower_bound(points_.begin(), points_.end(), v);
      if (it != points_.end() && *it == v) return static_cast<std::size_t>(it - points_.begin());
      return std::nullopt;
    }
    if (v < points_.front() || v > points_.back()) return std::nullopt;
    if (v == points_.back()) return points_.size() - 2;
    auto it = std::upper_bound(points_.begin(), points_.end(), v);
    return static_cast<std::size_t>(it - points_.begin()) - 1;
  }

  std::size_t coordinate() const { return coord_; }
  const std::vector<double>& points() const { return points_; }

 private:
  enum class Kind { Single, Intervals, Support };
  Kind kind_ = Kind::Single;
  std::vector<double> points_;
  std::size_t coord_ = 0;
};

// ---------------------------------------------------------------------------
// Conjugate rules

struct BetaBernoulliPrior {
  double alpha = 1.0;
  double beta = 1.0;
};

struct DirichletPrior {
  std::vector<double> alpha;  // one concentration per class; empty means all ones
};

struct NormalNormalPrior {
  double mu0 = 0.0;
  double tau0_sq = 100.0;
  double sigma_sq = 1.0;  // known noise variance
};

struct ConjugateConfig {
  std::variant<BetaBernoulliPrior, DirichletPrior, NormalNormalPrior> prior = BetaBernoulliPrior{};
  Binning binning = Binning::single();

  void validate() const {
    std::visit(
        [](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, BetaBernoulliPrior>) {
            if (!(p.alpha > 0 && p.beta > 0)) throw DataError("beta-bernoulli prior must be positive");
          } else if constexpr (std::is_same_v<T, DirichletPrior>) {
            for (double a : p.alpha)
              if (!(a > 0)) throw DataError("dirichlet concentrations must be positive");
          } else {
            if (!(p.tau0_sq > 0 && p.sigma_sq > 0))
              throw DataError("normal-normal variances must be positive");
          }
        },
        prior);
  }
};

namespace detail {

/// Sufficient statistics per bin.
struct BinStats {
  std::vector<double> count;
  std::vector<std::vector<double>> class_count;  // classification
  std::vector<double> sum_y;                     // regression, normal model
  std::vector<std::vector<double>> ys;           // regression, indicator model

  BinStats(std::size_t bins, int classes)
      : count(bins, 0.0),
        class_count(bins, std::vector<double>(std::max(classes, 0), 0.0)),
        sum_y(bins, 0.0),
        ys(bins) {}
};

}  // namespace detail

/// Exact law of the limiting predictive P~(x, A) given a context.
///
/// For the Bernoulli and categorical models this is a Beta distribution. For
/// the normal model it is the law of Phi((t - mu)/sigma) with
/// mu ~ N(mean, tau^2), called a probit-normal law below.
struct LimitPosterior {
  enum class Kind { Beta, ProbitNormal };
  Kind kind = Kind::Beta;
  double a = 1.0, b = 1.0;                           // Beta
  double mu = 0.0, tau = 1.0, sigma = 1.0, t = 0.0;  // probit-normal

  double mean() const {
    if (kind == Kind::Beta) return a / (a + b);
    return normal_cdf((t - mu) / std::sqrt(sigma * sigma + tau * tau));
  }

  double variance() const {
    if (kind == Kind::Beta) return a * b / ((a + b) * (a + b) * (a + b + 1.0));
    // E[Phi(.)^2] - mean^2 by Simpson quadrature over mu.
    const int n = 4000;
    const double lo = mu - 10 * tau, hi = mu + 10 * tau, h = (hi - lo) / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double m = lo + i * h;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const double f = normal_cdf((t - m) / sigma);
      s += w * f * f * normal_pdf((m - mu) / tau) / tau;
    }
    const double m = mean();
    return s * h / 3.0 - m * m;
  }

  double cdf(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    if (kind == Kind::Beta) return boost::math::ibeta(a, b, u);
    return 1.0 - normal_cdf((t - sigma * std_normal_quantile(u) - mu) / tau);
  }

  double quantile(double p) const {
    if (kind == Kind::Beta) return boost::math::ibeta_inv(a, b, p);
    return normal_cdf((t - mu - tau * std_normal_quantile(1.0 - p)) / sigma);
  }
};

class ConjugateRule final : public PredictiveRule {
 public:
  explicit ConjugateRule(ConjugateConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const ConjugateConfig& config() const { return cfg_; }

  std::string id() const override {
    return std::visit(
        [](const auto& p) -> std::string {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, BetaBernoulliPrior>) return "builtin:beta-bernoulli";
          else if constexpr (std::is_same_v<T, DirichletPrior>) return "builtin:dirichlet";
          else return "builtin:normal";
        },
        cfg_.prior);
  }

  bool supports(const TaskKind& task) const override {
    // Beta-Bernoulli on a regression task models the indicator 1{y <= t}
    // separately for each threshold.
    if (std::holds_alternative<BetaBernoulliPrior>(cfg_.prior))
      return task.type == TaskType::Binary || task.type == TaskType::RegressionCdf;
    if (const auto* d = std::get_if<DirichletPrior>(&cfg_.prior))
      return task.is_classification() &&
             (d->alpha.empty() || d->alpha.size() == static_cast<std::size_t>(task.classes));
    return task.type == TaskType::RegressionCdf;
  }

  bool has_prior_predictive() const override { return true; }
  bool wants_degenerate_fallback() const override { return false; }

  std::vector<double> predict(const TaskKind& task, Rows prefix,
                              const QuerySpec& queries) const override {
    check_task(task);
    detail::BinStats st(cfg_.binning.count(), task.classes);
    for (const auto& o : prefix) accumulate(st, o);
    return evaluate(st, task, queries);
  }

  /// One pass over the context; O(n + lengths * m).
  std::vector<std::vector<double>> predict_prefixes(const TaskKind& task, Rows context,
                                                    std::span<const std::size_t> lengths,
                                                    const QuerySpec& queries) const override {
    check_task(task);
    if (indicator_mode(task)) return indicator_prefixes(context, lengths, queries);
    std::vector<std::size_t> order(lengths.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return lengths[i] < lengths[j]; });
    std::vector<std::vector<double>> out(lengths.size());
    detail::BinStats st(cfg_.binning.count(), task.classes);
    std::size_t consumed = 0;
    for (std::size_t idx : order) {
      const std::size_t len = lengths[idx];
      if (len > context.size()) throw RuleError("prefix length exceeds context");
      for (; consumed < len; ++consumed) accumulate(st, context[consumed]);
      out[idx] = evaluate(st, task, queries);
    }
    return out;
  }

  std::optional<double> sample_response(const TaskKind& task, Rows prefix,
                                        const std::vector<double>& x, Rng& rng) const override {
    const auto* nn = std::get_if<NormalNormalPrior>(&cfg_.prior);
    if (!nn) return std::nullopt;
    check_task(task);
    detail::BinStats st(cfg_.binning.count(), task.classes);
    for (const auto& o : prefix) accumulate(st, o);
    const auto [m, v] = normal_posterior(st, *nn, bin_for(x));
    return rng.normal(m, std::sqrt(v + nn->sigma_sq));
  }

  /// Exact posterior of the limiting predictive at one query.
  LimitPosterior exact_limit_posterior(const TaskKind& task, Rows context, const Query& q) const {
    check_task(task);
    detail::BinStats st(cfg_.binning.count(), task.classes);
    for (const auto& o : context) accumulate(st, o);
    const std::size_t b = bin_for(q.x);
    LimitPosterior lp;
    if (indicator_mode(task)) {
      const auto& bb = std::get<BetaBernoulliPrior>(cfg_.prior);
      double n_b = 0.0, s = 0.0;
      for (const auto& o : context) {
        if (cfg_.binning.bin_of(o.x) != b) continue;
        n_b += 1.0;
        if (o.y <= q.event) s += 1.0;
      }
      lp.a = bb.alpha + s;
      lp.b = bb.beta + n_b - s;
    } else if (const auto* bb = std::get_if<BetaBernoulliPrior>(&cfg_.prior)) {
      const double s = st.class_count[b][1];
      const double f = st.count[b] - s;
      const bool one = static_cast<int>(q.event) == 1;
      lp.a = (one ? bb->alpha + s : bb->beta + f);
      lp.b = (one ? bb->beta + f : bb->alpha + s);
    } else if (const auto* dir = std::get_if<DirichletPrior>(&cfg_.prior)) {
      const int k = static_cast<int>(q.event);
      double total = 0.0;
      for (int c = 0; c < task.classes; ++c) total += alpha_of(*dir, c) + st.class_count[b][c];
      lp.a = alpha_of(*dir, k) + st.class_count[b][k];
      lp.b = total - lp.a;
    } else {
      const auto& nn = std::get<NormalNormalPrior>(cfg_.prior);
      const auto [m, v] = normal_posterior(st, nn, b);
      lp.kind = LimitPosterior::Kind::ProbitNormal;
      lp.mu = m;
      lp.tau = std::sqrt(v);
      lp.sigma = std::sqrt(nn.sigma_sq);
      lp.t = q.event;
    }
    return lp;
  }

 private:
  void check_task(const TaskKind& task) const {
    if (!supports(task)) throw RuleError(id() + ": unsupported task " + to_string(task.type));
  }

  std::size_t bin_for(const std::vector<double>& x) const {
    auto b = cfg_.binning.bin_of(x);
    if (!b) throw RuleError(id() + ": query covariate outside all configured bins");
    return *b;
  }

  void accumulate(detail::BinStats& st, const Observation& o) const {
    auto b = cfg_.binning.bin_of(o.x);
    if (!b) return;  // observations outside the binned region carry no information
    st.count[*b] += 1.0;
    if (std::holds_alternative<NormalNormalPrior>(cfg_.prior)) {
      st.sum_y[*b] += o.y;
    } else if (st.class_count[*b].empty()) {
      st.ys[*b].push_back(o.y);
    } else {
      st.class_count[*b][static_cast<std::size_t>(o.label())] += 1.0;
    }
  }

  bool indicator_mode(const TaskKind& task) const {
    return task.type == TaskType::RegressionCdf &&
           std::holds_alternative<BetaBernoulliPrior>(cfg_.prior);
  }

  // Per-query running counts; avoids rescanning the bin at every prefix.
  std::vector<std::vector<double>> indicator_prefixes(Rows context,
                                                      std::span<const std::size_t> lengths,
                                                      const QuerySpec& queries) const {
    const auto& bb = std::get<BetaBernoulliPrior>(cfg_.prior);
    const std::size_t m = queries.size();
    std::vector<std::size_t> qbin(m);
    for (std::size_t j = 0; j < m; ++j) qbin[j] = bin_for(queries[j].x);
    std::vector<double> n_b(cfg_.binning.count(), 0.0), below(m, 0.0);
    std::vector<std::size_t> order(lengths.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return lengths[i] < lengths[j]; });
    std::vector<std::vector<double>> out(lengths.size());
    std::size_t consumed = 0;
    for (std::size_t idx : order) {
      const std::size_t len = lengths[idx];
      if (len > context.size()) throw RuleError("prefix length exceeds context");
      for (; consumed < len; ++consumed) {
        const auto& o = context[consumed];
        auto b = cfg_.binning.bin_of(o.x);
        if (!b) continue;
        n_b[*b] += 1.0;
        for (std::size_t j = 0; j < m; ++j)
          if (qbin[j] == *b && o.y <= queries[j].event) below[j] += 1.0;
      }
      auto& v = out[idx];
      v.resize(m);
      for (std::size_t j = 0; j < m; ++j)
        v[j] = (bb.alpha + below[j]) / (bb.alpha + bb.beta + n_b[qbin[j]]);
    }
    return out;
  }

  static double alpha_of(const DirichletPrior& d, int k) {
    return d.alpha.empty() ? 1.0 : d.alpha[static_cast<std::size_t>(k)];
  }

  static std::pair<double, double> normal_posterior(const detail::BinStats& st,
                                                    const NormalNormalPrior& nn, std::size_t b) {
    const double prec = 1.0 / nn.tau0_sq + st.count[b] / nn.sigma_sq;
    const double var = 1.0 / prec;
    const double mean = var * (nn.mu0 / nn.tau0_sq + st.sum_y[b] / nn.sigma_sq);
    return {mean, var};
  }

  std::vector<double> evaluate(const detail::BinStats& st, const TaskKind& task,
                               const QuerySpec& queries) const {
    std::vector<double> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
      const std::size_t b = bin_for(q.x);
      if (indicator_mode(task)) {
        const auto& bb = std::get<BetaBernoulliPrior>(cfg_.prior);
        const double s = static_cast<double>(std::count_if(
            st.ys[b].begin(), st.ys[b].end(), [&](double y) { return y <= q.event; }));
        out.push_back((bb.alpha + s) / (bb.alpha + bb.beta + st.count[b]));
      } else if (const auto* bb = std::get_if<BetaBernoulliPrior>(&cfg_.prior)) {
        const double p1 =
            (bb->alpha + st.class_count[b][1]) / (bb->alpha + bb->beta + st.count[b]);
        out.push_back(static_cast<int>(q.event) == 1 ? p1 : 1.0 - p1);
      } else if (const auto* dir = std::get_if<DirichletPrior>(&cfg_.prior)) {
        double total = st.count[b];
        for (int c = 0; c < task.classes; ++c) total += alpha_of(*dir, c);
        const int k = static_cast<int>(q.event);
        out.push_back((alpha_of(*dir, k) + st.class_count[b][static_cast<std::size_t>(k)]) / total);
      } else {
        const auto& nn = std::get<NormalNormalPrior>(cfg_.prior);
        const auto [m, v] = normal_posterior(st, nn, b);
        out.push_back(normal_cdf((q.event - m) / std::sqrt(v + nn.sigma_sq)));
      }
    }
    return out;
  }

  ConjugateConfig cfg_;
};

inline std::vector<double> conjugate_predict(const ConjugateConfig& cfg, const ContextTable& prefix,
                                             const QuerySpec& queries) {
  return ConjugateRule(cfg).predict(prefix.task(), prefix.rows(), queries);
}

inline LimitPosterior exact_limit_posterior(const ConjugateConfig& cfg, const ContextTable& context,
                                            const Query& query) {
  return ConjugateRule(cfg).exact_limit_posterior(context.task(), context.rows(), query);
}

/// Reports the same probability for every query (1 - p for class-0 events in
/// binary tasks). Useful as a zero-volatility reference.
class ConstantRule final : public PredictiveRule {
 public:
  explicit ConstantRule(double p) : p_(p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("constant rule probability outside [0,1]");
  }

  std::string id() const override { return "builtin:constant"; }
  bool supports(const TaskKind& task) const override { return task.type != TaskType::Multiclass; }
  bool has_prior_predictive() const override { return true; }
  bool wants_degenerate_fallback() const override { return false; }

  std::vector<double> predict(const TaskKind& task, Rows, const QuerySpec& queries) const override {
    std::vector<double> out;
    for (const auto& q : queries) {
      out.push_back(task.type == TaskType::Binary && static_cast<int>(q.event) == 0 ? 1.0 - p_ : p_);
    }
    return out;
  }

 private:
  double p_;
};

}  // namespace pclt
