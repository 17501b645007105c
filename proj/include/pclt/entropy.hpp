#pragma once

// Entropy-based aleatoric / epistemic split.
//
// The Gaussian limit of g~(x*) is replaced by a moment-matched Beta (binary)
// or Dirichlet (multiclass) distribution, whose expected entropy has a closed
// form in digamma functions. Epistemic uncertainty is the residual
// H(y*|x*, z) - U_a. All quantities are in nats.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pclt/error.hpp"
#include "pclt/special.hpp"

namespace pclt {

/// Relative margin keeping the clipped variance strictly below its bound.
inline constexpr double kVarianceClipEps = 1e-9;

enum class EntropyMethod { Beta, Dirichlet, Delta };

inline const char* to_string(EntropyMethod m) {
  switch (m) {
    case EntropyMethod::Beta: return "beta";
    case EntropyMethod::Dirichlet: return "dirichlet";
    case EntropyMethod::Delta: return "delta";
  }
  return "?";
}

struct UncertaintySplit {
  double total = 0.0;
  double aleatoric = 0.0;
  double epistemic = 0.0;
  EntropyMethod method = EntropyMethod::Beta;
  bool clipped = false;
};

struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;
  bool clipped = false;

  double mean() const { return alpha / (alpha + beta); }
  double variance() const {
    const double s = alpha + beta;
    return alpha * beta / (s * s * (s + 1.0));
  }
};

/// Beta(alpha, beta) with mean g and variance min(var, (1-eps) g(1-g)):
/// T = g(1-g)/var - 1, alpha = g T, beta = (1-g) T.
inline BetaParams beta_moment_match(double g, double var) {
  if (!(g > 0.0 && g < 1.0)) {
    throw DataError("beta_moment_match: mean must lie in (0,1), got " + std::to_string(g));
  }
  if (!(var > 0.0)) throw DataError("beta_moment_match: variance must be positive");
  const double bound = g * (1.0 - g);
  BetaParams p;
  const double cap = (1.0 - kVarianceClipEps) * bound;
  if (var > cap) {
    var = cap;
    p.clipped = true;
  }
  const double t = bound / var - 1.0;
  p.alpha = g * t;
  p.beta = (1.0 - g) * t;
  return p;
}

/// E[h(G)], G ~ Beta(alpha, beta):
/// -a/(a+b) psi(a+1) - b/(a+b) psi(b+1) + psi(a+b+1).
inline double beta_expected_entropy(const BetaParams& p) {
  const double s = p.alpha + p.beta;
  return -(p.alpha / s) * digamma(p.alpha + 1.0) - (p.beta / s) * digamma(p.beta + 1.0) +
         digamma(s + 1.0);
}

/// Aleatoric entropy for a binary predictive with CLT variance `var`
/// (already divided by n). Zero at the boundary, h(g) when var = 0.
inline double aleatoric_binary(double g, double var) {
  if (!(g >= 0.0 && g <= 1.0)) throw DataError("aleatoric_binary: g outside [0,1]");
  if (var < 0.0) throw DataError("aleatoric_binary: negative variance");
  if (g == 0.0 || g == 1.0) return 0.0;
  if (var == 0.0) return binary_entropy(g);
  return std::max(0.0, beta_expected_entropy(beta_moment_match(g, var)));
}

namespace detail {

inline void check_simplex(std::span<const double> g) {
  if (g.size() < 2) throw DataError("class probability vector needs at least 2 entries");
  double s = 0.0;
  for (double v : g) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("class probability outside [0,1]");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw DataError("class probabilities do not sum to 1");
}

struct DirichletMatch {
  double alpha0 = 0.0;
  bool clipped = false;
  bool degenerate = false;  // zero total variance or one-hot g
};

inline DirichletMatch dirichlet_moment_match(std::span<const double> g, std::span<const double> var) {
  check_simplex(g);
  if (var.size() != g.size()) throw DataError("variance vector length differs from class count");
  double total_var = 0.0;
  for (double v : var) {
    if (v < 0.0) throw DataError("negative class variance");
    total_var += v;
  }
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double bound = 1.0 - sq;
  DirichletMatch dm;
  if (bound <= 0.0 || total_var == 0.0) {
    dm.degenerate = true;
    return dm;
  }
  const double cap = (1.0 - kVarianceClipEps) * bound;
  if (total_var > cap) {
    total_var = cap;
    dm.clipped = true;
  }
  dm.alpha0 = bound / total_var - 1.0;
  return dm;
}

}  // namespace detail

/// Expected Shannon entropy of Dir(alpha0 g) with alpha0 matched to the
/// summed per-class variances: psi(alpha0+1) - sum_k g_k psi(alpha0 g_k + 1).
inline double aleatoric_multiclass(std::span<const double> g, std::span<const double> var) {
  const auto dm = detail::dirichlet_moment_match(g, var);
  if (dm.degenerate) return shannon_entropy(g);
  double s = digamma(dm.alpha0 + 1.0);
  for (double gk : g) {
    if (gk > 0.0) s -= gk * digamma(dm.alpha0 * gk + 1.0);
  }
  return std::max(0.0, s);
}

/// Second-order delta-method comparator h(g) - var / (2 g (1-g)). Unbounded
/// below near the boundary.
inline double delta_method_aleatoric(double g, double var) {
  if (!(g > 0.0 && g < 1.0)) throw DataError("delta_method_aleatoric: g must lie in (0,1)");
  return binary_entropy(g) - var / (2.0 * g * (1.0 - g));
}

inline UncertaintySplit decompose(std::span<const double> g, std::span<const double> var);

/// Binary split. The Dirichlet method treats (1-g, g) as a two-class
/// distribution with the same variance on both sides, which reproduces the
/// Beta match.
inline UncertaintySplit decompose(double g, double var, EntropyMethod method = EntropyMethod::Beta) {
  if (!(g >= 0.0 && g <= 1.0)) throw DataError("decompose: g outside [0,1]");
  if (method == EntropyMethod::Dirichlet) {
    const double gv[2] = {1.0 - g, g};
    const double vv[2] = {var, var};
    return decompose(std::span<const double>(gv, 2), std::span<const double>(vv, 2));
  }
  UncertaintySplit s;
  s.method = method;
  if (g == 0.0 || g == 1.0) return s;
  s.total = binary_entropy(g);
  if (method == EntropyMethod::Beta) {
    if (var > 0.0) s.clipped = beta_moment_match(g, var).clipped;
    s.aleatoric = aleatoric_binary(g, var);
  } else {
    s.aleatoric = delta_method_aleatoric(g, var);
  }
  s.epistemic = s.total - s.aleatoric;
  return s;
}

/// Multiclass split with the Dirichlet match.
inline UncertaintySplit decompose(std::span<const double> g, std::span<const double> var) {
  UncertaintySplit s;
  s.method = EntropyMethod::Dirichlet;
  s.total = shannon_entropy(g);
  const auto dm = detail::dirichlet_moment_match(g, var);
  s.clipped = dm.clipped;
  s.aleatoric = aleatoric_multiclass(g, var);
  s.epistemic = s.total - s.aleatoric;
  return s;
}

}  // namespace pclt
