#pragma once

// Scalar special functions: normal CDF/quantile, digamma, entropies.

#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include "pclt/error.hpp"

namespace pclt {

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Inverse standard normal CDF.
inline double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DataError("std_normal_quantile: p must lie in (0,1), got " + std::to_string(p));
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DataError("digamma: argument must be positive and finite, got " + std::to_string(x));
  }
  return boost::math::digamma(x);
}

/// Binary entropy in nats; h(0) = h(1) = 0.
inline double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

/// Shannon entropy in nats; zero-probability classes contribute nothing.
inline double shannon_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace pclt
