#pragma once

// Synthetic data-generating processes with exact ground truth.
//
// Coverage DGPs draw X ~ Uniform(-10, 10) (gap variant: a fair coin picks
// Uniform(-8, -2) or Uniform(2, 8)) and then Y | X:
//
//   linear       Y = 0.2 X + e,                 e ~ N(0, 1)
//   polynomial   Y = 1 - 0.03 X^2 + e,          e ~ N(0, 1)
//   dependent    Y ~ N(0.5 X + 1, (0.5 + 0.5|X|)^2)
//   sine         Y = 0.5 sin(X / 2) + e,        e ~ N(0, 0.5^2)
//   poisson      Y ~ Poisson(0.05 X^2 + 1)
//   probit       Y ~ Bernoulli(0.6 Phi((X-8)/4) + 0.4 Phi((X+8)/4))
//   categorical  Y ~ softmax(-(X+5)^2/10, -X^2/30, -(X-7)^2/5, -(X-4)^2/8)
//   bernoulli_bins  Y ~ Bernoulli(p_b) with p constant on equal-width bins
//
// Toy generators for the entropy experiments:
//
//   logreg1d  X ~ N(1.5, 3^2), Y ~ Bernoulli(sigmoid(0.25 X - 0.5))
//   moons     two interleaved half circles: class 0 on (cos s, sin s),
//             class 1 on (1 - cos s, 0.5 - sin s), s evenly spaced on [0, pi]
//             (n/2 outer points, rest inner), shuffled, then N(0, noise^2)
//             added to both coordinates
//   spirals   C arms; class c gets t ~ U(0,1), r = 4 t,
//             angle = 4 pi t + 2 pi c / C, N(0, noise^2) jitter; classes are
//             filled as evenly as possible and the rows shuffled

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pclt/core.hpp"
#include "pclt/error.hpp"
#include "pclt/random.hpp"
#include "pclt/special.hpp"

namespace pclt {

enum class DgpName {
  Linear,
  Polynomial,
  Dependent,
  Sine,
  Poisson,
  Probit,
  Categorical,
  BernoulliBins,
  Logreg1d,
  Moons,
  Spirals
};

struct DgpSpec {
  DgpName name = DgpName::Linear;
  bool gap = false;
  /// Regression target threshold t in P(Y <= t | x); NaN picks the default
  /// (0, or 2 for poisson).
  double threshold = std::numeric_limits<double>::quiet_NaN();
  double x_lo = -10.0, x_hi = 10.0;
  std::vector<double> bin_probs = {0.2, 0.4, 0.6, 0.8};  // bernoulli_bins
  double noise = 0.1;                                      // moons / spirals
  int arms = 3;                                            // spirals

  double target_threshold() const {
    if (!std::isnan(threshold)) return threshold;
    return name == DgpName::Poisson ? 2.0 : 0.0;
  }
};

inline const std::vector<std::pair<std::string, DgpName>>& dgp_names() {
  static const std::vector<std::pair<std::string, DgpName>> names = {
      {"linear", DgpName::Linear},         {"polynomial", DgpName::Polynomial},
      {"dependent", DgpName::Dependent},   {"sine", DgpName::Sine},
      {"poisson", DgpName::Poisson},       {"probit", DgpName::Probit},
      {"categorical", DgpName::Categorical}, {"bernoulli_bins", DgpName::BernoulliBins},
      {"logreg1d", DgpName::Logreg1d},     {"moons", DgpName::Moons},
      {"spirals", DgpName::Spirals}};
  return names;
}

inline DgpName parse_dgp_name(const std::string& s) {
  for (const auto& [k, v] : dgp_names())
    if (k == s) return v;
  throw DataError("unknown DGP name '" + s + "'");
}

inline std::string to_string(DgpName d) {
  for (const auto& [k, v] : dgp_names())
    if (v == d) return k;
  return "?";
}

inline TaskKind dgp_task(const DgpSpec& spec) {
  switch (spec.name) {
    case DgpName::Linear:
    case DgpName::Polynomial:
    case DgpName::Dependent:
    case DgpName::Sine:
    case DgpName::Poisson: return TaskKind::regression_cdf();
    case DgpName::Categorical: return TaskKind::multiclass(4);
    case DgpName::Spirals: return TaskKind::multiclass(spec.arms);
    default: return TaskKind::binary();
  }
}

inline std::size_t dgp_dim(const DgpSpec& spec) {
  return (spec.name == DgpName::Moons || spec.name == DgpName::Spirals) ? 2 : 1;
}

namespace detail {

inline double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

inline std::array<double, 4> categorical_probs(double x) {
  std::array<double, 4> z = {-(x + 5) * (x + 5) / 10.0, -x * x / 30.0, -(x - 7) * (x - 7) / 5.0,
                             -(x - 4) * (x - 4) / 8.0};
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (auto& v : z) s += (v = std::exp(v - mx));
  for (auto& v : z) v /= s;
  return z;
}

inline double probit_p(double x) {
  return 0.6 * normal_cdf((x - 8.0) / 4.0) + 0.4 * normal_cdf((x + 8.0) / 4.0);
}

inline double poisson_rate(double x) { return 0.05 * x * x + 1.0; }

inline double poisson_cdf(double t, double lambda) {
  if (t < 0) return 0.0;
  const long kmax = static_cast<long>(std::floor(t));
  double term = std::exp(-lambda), sum = term;
  for (long k = 1; k <= kmax; ++k) {
    term *= lambda / static_cast<double>(k);
    sum += term;
  }
  return std::min(sum, 1.0);
}

/// Inversion: smallest k with F(k) > u.
inline double poisson_draw(double lambda, Rng& rng) {
  const double u = rng.uniform();
  double term = std::exp(-lambda), cdf = term;
  long k = 0;
  while (u >= cdf && k < 100000) {
    ++k;
    term *= lambda / static_cast<double>(k);
    cdf += term;
    if (term == 0.0 && cdf < u) break;
  }
  return static_cast<double>(k);
}

inline int bin_index(const DgpSpec& spec, double x) {
  const int b = static_cast<int>(spec.bin_probs.size());
  int i = static_cast<int>(std::floor((x - spec.x_lo) / (spec.x_hi - spec.x_lo) * b));
  return std::clamp(i, 0, b - 1);
}

inline double coverage_x(const DgpSpec& spec, Rng& rng) {
  if (spec.gap) return rng.bernoulli(0.5) ? rng.uniform(-8.0, -2.0) : rng.uniform(2.0, 8.0);
  return rng.uniform(spec.x_lo, spec.x_hi);
}

inline double dependent_sd(double x) { return 0.5 + 0.5 * std::abs(x); }

}  // namespace detail

/// Exact P(Y <= t | x) for regression DGPs, P(Y = event | x) for
/// classification DGPs.
inline double true_target(const DgpSpec& spec, double x, double event) {
  switch (spec.name) {
    case DgpName::Linear: return normal_cdf(event - 0.2 * x);
    case DgpName::Polynomial: return normal_cdf(event - (1.0 - 0.03 * x * x));
    case DgpName::Dependent: return normal_cdf((event - (0.5 * x + 1.0)) / detail::dependent_sd(x));
    case DgpName::Sine: return normal_cdf((event - 0.5 * std::sin(x / 2.0)) / 0.5);
    case DgpName::Poisson: return detail::poisson_cdf(event, detail::poisson_rate(x));
    case DgpName::Probit:
    case DgpName::Logreg1d:
    case DgpName::BernoulliBins: {
      const int c = static_cast<int>(event);
      if ((c != 0 && c != 1) || c != event) throw DataError("binary DGP event must be 0 or 1");
      const double p = spec.name == DgpName::Probit     ? detail::probit_p(x)
                       : spec.name == DgpName::Logreg1d ? detail::sigmoid(0.25 * x - 0.5)
                                                        : spec.bin_probs[static_cast<std::size_t>(
                                                              detail::bin_index(spec, x))];
      return c == 1 ? p : 1.0 - p;
    }
    case DgpName::Categorical: {
      const int c = static_cast<int>(event);
      if (c < 0 || c > 3 || c != event) throw DataError("categorical event must be a class in 0..3");
      return detail::categorical_probs(x)[static_cast<std::size_t>(c)];
    }
    case DgpName::Moons:
    case DgpName::Spirals: break;
  }
  throw DataError("no closed-form target for DGP " + to_string(spec.name));
}

inline double true_target(const DgpSpec& spec, double x) {
  return true_target(spec, x, spec.name == DgpName::Probit || spec.name == DgpName::Categorical ||
                                      spec.name == DgpName::Logreg1d ||
                                      spec.name == DgpName::BernoulliBins
                                  ? 1.0
                                  : spec.target_threshold());
}

inline ContextTable sample_toy2d(DgpName name, std::size_t n, double noise, std::uint64_t seed,
                                 int arms = 3);

inline ContextTable sample_dgp(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DataError("sample_dgp: n must be at least 1");
  if (spec.name == DgpName::Moons || spec.name == DgpName::Spirals ||
      spec.name == DgpName::Logreg1d) {
    return sample_toy2d(spec.name, n, spec.noise, seed, spec.arms);
  }
  if (spec.name == DgpName::BernoulliBins && spec.bin_probs.empty())
    throw DataError("bernoulli_bins needs at least one bin probability");
  Rng rng(derive_seed(seed, "dgp"));
  std::vector<Observation> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = detail::coverage_x(spec, rng);
    double y = 0.0;
    switch (spec.name) {
      case DgpName::Linear: y = 0.2 * x + rng.normal(); break;
      case DgpName::Polynomial: y = 1.0 - 0.03 * x * x + rng.normal(); break;
      case DgpName::Dependent: y = rng.normal(0.5 * x + 1.0, detail::dependent_sd(x)); break;
      case DgpName::Sine: y = 0.5 * std::sin(x / 2.0) + rng.normal(0.0, 0.5); break;
      case DgpName::Poisson: y = detail::poisson_draw(detail::poisson_rate(x), rng); break;
      case DgpName::Probit: y = rng.bernoulli(detail::probit_p(x)) ? 1.0 : 0.0; break;
      case DgpName::BernoulliBins:
        y = rng.bernoulli(spec.bin_probs[static_cast<std::size_t>(detail::bin_index(spec, x))]) ? 1.0 : 0.0;
        break;
      case DgpName::Categorical: {
        const auto p = detail::categorical_probs(x);
        y = sample_discrete(p, rng);
        break;
      }
      default: break;
    }
    rows.push_back({{x}, y});
  }
  return ContextTable::validated(std::move(rows), dgp_task(spec));
}

inline ContextTable sample_toy2d(DgpName name, std::size_t n, double noise, std::uint64_t seed,
                                 int arms) {
  if (n == 0) throw DataError("sample_toy2d: n must be at least 1");
  if (noise < 0) throw DataError("noise must be non-negative");
  Rng rng(derive_seed(seed, "toy"));
  std::vector<Observation> rows;
  rows.reserve(n);
  auto shuffle = [&rng](std::vector<Observation>& r) {
    for (std::size_t i = r.size(); i > 1; --i) std::swap(r[i - 1], r[rng.below(i)]);
  };
  switch (name) {
    case DgpName::Logreg1d: {
      for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.normal(1.5, 3.0);
        rows.push_back({{x}, rng.bernoulli(detail::sigmoid(0.25 * x - 0.5)) ? 1.0 : 0.0});
      }
      return ContextTable::validated(std::move(rows), TaskKind::binary());
    }
    case DgpName::Moons: {
      const std::size_t n_out = n / 2, n_in = n - n_out;
      auto lin = [](std::size_t i, std::size_t count) {
        return count <= 1 ? 0.0 : std::numbers::pi * double(i) / double(count - 1);
      };
      for (std::size_t i = 0; i < n_out; ++i) {
        const double s = lin(i, n_out);
        rows.push_back({{std::cos(s), std::sin(s)}, 0.0});
      }
      for (std::size_t i = 0; i < n_in; ++i) {
        const double s = lin(i, n_in);
        rows.push_back({{1.0 - std::cos(s), 0.5 - std::sin(s)}, 1.0});
      }
      shuffle(rows);
      for (auto& r : rows) {
        r.x[0] += noise * rng.normal();
        r.x[1] += noise * rng.normal();
      }
      return ContextTable::validated(std::move(rows), TaskKind::binary());
    }
    case DgpName::Spirals: {
      if (arms < 2) throw DataError("spirals need at least 2 arms");
      for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % static_cast<std::size_t>(arms));
        const double t = rng.uniform();
        const double r = 4.0 * t;
        const double theta = 2.0 * std::numbers::pi * 2.0 * t + 2.0 * std::numbers::pi * c / arms;
        rows.push_back({{r * std::cos(theta) + noise * rng.normal(),
                         r * std::sin(theta) + noise * rng.normal()},
                        static_cast<double>(c)});
      }
      shuffle(rows);
      return ContextTable::validated(std::move(rows), TaskKind::multiclass(arms));
    }
    default: break;
  }
  throw DataError("sample_toy2d: unsupported generator " + to_string(name));
}

/// `count` evenly spaced points on [lo, hi] (inclusive).
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = count == 1 ? lo : lo + (hi - lo) * double(i) / double(count - 1);
  return g;
}

}  // namespace pclt
