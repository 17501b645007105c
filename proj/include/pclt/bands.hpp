#pragma once

// Pointwise Gaussian credible intervals and simultaneous sup-t bands built
// from a center P_n and a covariance estimate C_n (V_n or U_n); the plug-in
// covariance of the limit is C_n / n.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pclt/core.hpp"
#include "pclt/estimators.hpp"
#include "pclt/random.hpp"
#include "pclt/special.hpp"

namespace pclt {

enum class BandKind { Pointwise, SupT };

inline const char* to_string(BandKind k) { return k == BandKind::Pointwise ? "pointwise" : "sup-t"; }

struct Band {
  std::vector<double> center, lower, upper;
  std::vector<double> se;  // s_j = sqrt(C_jj / n)
  double alpha = 0.05;
  BandKind kind = BandKind::Pointwise;
  double critical = 0.0;
  CovKind sigma_kind = CovKind::Vn;
  std::size_t draws = 0;  // sup-t only
  std::uint64_t seed = 0;

  std::size_t size() const { return center.size(); }
  double width(std::size_t j) const { return upper[j] - lower[j]; }
  bool contains(std::size_t j, double v) const { return lower[j] <= v && v <= upper[j]; }
};

inline constexpr std::size_t kDefaultSupTDraws = 10'000;

namespace detail {

inline std::vector<double> standard_errors(const CovarianceEstimate& sigma) {
  if (sigma.n == 0) throw DataError("covariance estimate has n = 0");
  std::vector<double> se(sigma.m());
  for (std::size_t j = 0; j < se.size(); ++j) {
    double v = sigma.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    if (v < -1e-12) {
      throw NumericError("negative variance " + std::to_string(v) + " at component " +
                         std::to_string(j));
    }
    se[j] = std::sqrt(std::max(v, 0.0) / static_cast<double>(sigma.n));
  }
  return se;
}

inline Band finish_band(std::span<const double> center, std::vector<double> se, double crit,
                        double alpha, BandKind kind, const CovarianceEstimate& sigma) {
  Band b;
  b.center.assign(center.begin(), center.end());
  b.lower.resize(center.size());
  b.upper.resize(center.size());
  for (std::size_t j = 0; j < center.size(); ++j) {
    const double half = crit * se[j];
    b.lower[j] = std::clamp(center[j] - half, 0.0, 1.0);
    b.upper[j] = std::clamp(center[j] + half, 0.0, 1.0);
  }
  b.se = std::move(se);
  b.alpha = alpha;
  b.kind = kind;
  b.critical = crit;
  b.sigma_kind = sigma.kind;
  return b;
}

inline void check_inputs(std::span<const double> center, const CovarianceEstimate& sigma,
                         double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must lie in (0,1)");
  if (center.size() != sigma.m()) throw DataError("band center and covariance sizes differ");
}

}  // namespace detail

/// [P_j -/+ z_{1-alpha/2} s_j] intersected with [0,1].
inline Band pointwise_band(std::span<const double> center, const CovarianceEstimate& sigma,
                           double alpha) {
  detail::check_inputs(center, sigma, alpha);
  const double z = std_normal_quantile(1.0 - alpha / 2.0);
  return detail::finish_band(center, detail::standard_errors(sigma), z, alpha,
                             BandKind::Pointwise, sigma);
}

/// `count` draws from N(0, cov), one per row. Uses the symmetric square root
/// Q sqrt(Lambda), so semidefinite (including zero) matrices are fine;
/// eigenvalues below -1e-10 (relative) are rejected.
inline Eigen::MatrixXd sample_mvn(const Eigen::MatrixXd& cov, std::size_t count,
                                  std::uint64_t seed) {
  const Eigen::Index m = cov.rows();
  if (cov.cols() != m) throw NumericError("sample_mvn: covariance is not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericError("sample_mvn: eigen-decomposition failed");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if (m > 0 && es.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw NumericError("sample_mvn: covariance is indefinite");
  }
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd factor = es.eigenvectors() * root.asDiagonal();

  Rng rng(derive_seed(seed, "mvn"));
  Eigen::MatrixXd z(static_cast<Eigen::Index>(count), m);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < m; ++j) z(i, j) = rng.normal();
  return z * factor.transpose();
}

inline Eigen::MatrixXd sample_mvn(const CovarianceEstimate& sigma, std::size_t count,
                                  std::uint64_t seed) {
  return sample_mvn(sigma.matrix, count, seed);
}

/// Studentized sup-norm band: c is the empirical (1-alpha) quantile (order
/// statistic ceil((1-alpha) L)) of max_j |W_j| / s_j over L Gaussian draws.
/// Components with s_j = 0 are left out of the max and collapse to the
/// center. c is never taken below z_{1-alpha/2}, so the band always contains
/// the pointwise band.
inline Band supt_band(std::span<const double> center, const CovarianceEstimate& sigma, double alpha,
                      std::size_t draws, std::uint64_t seed) {
  detail::check_inputs(center, sigma, alpha);
  if (draws == 0) throw DataError("sup-t band needs at least one draw");
  auto se = detail::standard_errors(sigma);
  const double z = std_normal_quantile(1.0 - alpha / 2.0);

  std::vector<Eigen::Index> active;
  for (std::size_t j = 0; j < se.size(); ++j)
    if (se[j] > 0.0) active.push_back(static_cast<Eigen::Index>(j));

  double crit = z;
  if (!active.empty()) {
    const auto reg = regularize_psd(sigma);
    const Eigen::MatrixXd w = sample_mvn(reg.matrix, draws, seed);
    std::vector<double> stat(draws);
    for (std::size_t l = 0; l < draws; ++l) {
      double t = 0.0;
      for (Eigen::Index j : active) {
        const double sd = std::sqrt(sigma.matrix(j, j));
        t = std::max(t, std::abs(w(static_cast<Eigen::Index>(l), j)) / sd);
      }
      stat[l] = t;
    }
    std::size_t idx = static_cast<std::size_t>(std::ceil((1.0 - alpha) * double(draws)));
    idx = std::clamp<std::size_t>(idx, 1, draws) - 1;
    std::nth_element(stat.begin(), stat.begin() + static_cast<std::ptrdiff_t>(idx), stat.end());
    crit = std::max(stat[idx], z);
  }
  Band b = detail::finish_band(center, std::move(se), crit, alpha, BandKind::SupT, sigma);
  b.draws = draws;
  b.seed = seed;
  return b;
}

/// Plot-ready CSV: query_index, x, t_or_class, center, lower, upper, kind,
/// alpha. Multi-dimensional covariates are joined with ';' in the x column.
inline void write_band_header(std::ostream& os) {
  os << "query_index,x,t_or_class,center,lower,upper,kind,alpha\n";
}

inline void write_band_rows(std::ostream& os, const Band& band, const QuerySpec& queries) {
  if (queries.size() != band.size()) throw DataError("band and query sizes differ");
  const auto old = os.precision(12);
  for (std::size_t j = 0; j < band.size(); ++j) {
    os << j << ',';
    for (std::size_t c = 0; c < queries[j].x.size(); ++c) os << (c ? ";" : "") << queries[j].x[c];
    os << ',' << queries[j].event << ',' << band.center[j] << ',' << band.lower[j] << ','
       << band.upper[j] << ',' << to_string(band.kind) << ',' << band.alpha << '\n';
  }
  os.precision(old);
}

}  // namespace pclt
