#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <sstream>

#include "pclt/bands.hpp"

using namespace pclt;

namespace {

CovarianceEstimate cov(Eigen::MatrixXd m, std::size_t n) {
  CovarianceEstimate c;
  c.matrix = std::move(m);
  c.n = n;
  return c;
}

double z975() { return boost::math::quantile(boost::math::normal(), 0.975); }

}  // namespace

TEST(Quantile, AgreesWithBoost) {
  boost::math::normal nd;
  for (double p : {1e-12, 1e-6, 0.001, 0.025, 0.2, 0.5, 0.7, 0.975, 0.999999}) {
    EXPECT_NEAR(std_normal_quantile(p), boost::math::quantile(nd, p), 1e-9) << p;
  }
  EXPECT_EQ(std_normal_quantile(0.5), 0.0);
  EXPECT_THROW(std_normal_quantile(0.0), DataError);
  EXPECT_THROW(std_normal_quantile(1.0), DataError);
}

TEST(Pointwise, ScalarExample) {
  const std::vector<double> c{0.5};
  const auto b = pointwise_band(c, cov(Eigen::MatrixXd::Constant(1, 1, 10.0), 1000), 0.05);
  EXPECT_NEAR(b.lower[0], 0.5 - z975() * 0.1, 1e-12);
  EXPECT_NEAR(b.upper[0], 0.5 + z975() * 0.1, 1e-12);
  EXPECT_NEAR(b.lower[0], 0.304, 1e-3);
  EXPECT_NEAR(b.upper[0], 0.696, 1e-3);
  EXPECT_NEAR(b.se[0], 0.1, 1e-15);
}

TEST(Pointwise, ClipsAndCollapses) {
  const std::vector<double> c{0.99, 0.02, 0.4};
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
  m(0, 0) = m(1, 1) = 50;
  const auto b = pointwise_band(c, cov(m, 100), 0.05);
  EXPECT_EQ(b.upper[0], 1.0);
  EXPECT_EQ(b.lower[1], 0.0);
  EXPECT_EQ(b.lower[2], 0.4);
  EXPECT_EQ(b.upper[2], 0.4);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_TRUE(b.lower[j] <= b.center[j] && b.center[j] <= b.upper[j]);
}

TEST(Pointwise, RejectsBadInputs) {
  const std::vector<double> c{0.5};
  EXPECT_THROW(pointwise_band(c, cov(Eigen::MatrixXd::Constant(1, 1, -1.0), 10), 0.05), NumericError);
  EXPECT_THROW(pointwise_band(c, cov(Eigen::MatrixXd::Constant(1, 1, 1.0), 10), 1.0), DataError);
  EXPECT_THROW(pointwise_band(c, cov(Eigen::MatrixXd::Identity(2, 2), 10), 0.05), DataError);
  EXPECT_THROW(pointwise_band(c, cov(Eigen::MatrixXd::Identity(1, 1), 0), 0.05), DataError);
}

TEST(Pointwise, MonotoneInAlpha) {
  const std::vector<double> c{0.3, 0.7};
  const auto s = cov(Eigen::MatrixXd::Identity(2, 2) * 0.5, 50);
  const auto wide = pointwise_band(c, s, 0.01), narrow = pointwise_band(c, s, 0.1);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_LE(wide.lower[j], narrow.lower[j]);
    EXPECT_GE(wide.upper[j], narrow.upper[j]);
  }
}

TEST(SupT, OneCoordinateIsZQuantile) {
  const std::vector<double> c{0.5};
  const auto b = supt_band(c, cov(Eigen::MatrixXd::Constant(1, 1, 0.3), 100), 0.05, 100000, 1);
  EXPECT_NEAR(b.critical, z975(), 0.01 * z975());
  EXPECT_EQ(b.draws, 100000u);
}

TEST(SupT, IndependentPairMatchesClosedForm) {
  const double oracle = boost::math::quantile(boost::math::normal(), (1 + std::sqrt(0.95)) / 2);
  const std::vector<double> c{0.5, 0.5};
  const auto b = supt_band(c, cov(Eigen::MatrixXd::Identity(2, 2) * 0.2, 100), 0.05, 200000, 2);
  EXPECT_NEAR(b.critical, oracle, 0.01);
  EXPECT_NEAR(b.critical, 2.236, 0.01);
}

TEST(SupT, ContainsPointwiseAndCollapsesZeroVariance) {
  const std::vector<double> c{0.2, 0.5, 0.9};
  Eigen::MatrixXd m(3, 3);
  m << 0.16, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.09;
  const auto s = cov(m, 40);
  const auto p = pointwise_band(c, s, 0.05), t = supt_band(c, s, 0.05, 5000, 3);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_LE(t.lower[j], p.lower[j]);
    EXPECT_GE(t.upper[j], p.upper[j]);
  }
  EXPECT_EQ(t.lower[1], 0.5);
  EXPECT_EQ(t.upper[1], 0.5);
  // Fully degenerate: the critical value falls back to z.
  const auto zero = supt_band(c, cov(Eigen::MatrixXd::Zero(3, 3), 40), 0.05, 100, 3);
  EXPECT_DOUBLE_EQ(zero.critical, std_normal_quantile(0.975));
  EXPECT_EQ(zero.lower, zero.center);
}

TEST(SupT, PerfectlyCorrelatedFloorsAtZ) {
  // rho = 1 reduces the max to a single |Z|; the floor at z keeps nesting.
  const std::vector<double> c{0.5, 0.5};
  const auto b = supt_band(c, cov(Eigen::MatrixXd::Constant(2, 2, 0.25), 100), 0.05, 20000, 4);
  EXPECT_GE(b.critical, std_normal_quantile(0.975));
  EXPECT_NEAR(b.critical, z975(), 0.05);
}

TEST(SupT, CriticalValueFallsWithCorrelation) {
  const std::vector<double> c{0.5, 0.5};
  double prev = 1e9;
  for (double rho : {0.0, 0.3, 0.6, 0.9, 0.99}) {
    Eigen::MatrixXd m(2, 2);
    m << 1, rho, rho, 1;
    const double crit = supt_band(c, cov(m, 100), 0.05, 200000, 5).critical;
    EXPECT_LE(crit, prev + 0.02) << rho;
    prev = crit;
  }
}

TEST(SupT, MonotoneInAlphaWithSameSeed) {
  const std::vector<double> c{0.3, 0.6, 0.8};
  Eigen::MatrixXd m(3, 3);
  m << 1, 0.2, 0.1, 0.2, 1, 0.4, 0.1, 0.4, 1;
  const auto s = cov(m * 0.1, 80);
  const auto a = supt_band(c, s, 0.01, 20000, 6), b = supt_band(c, s, 0.1, 20000, 6);
  EXPECT_GE(a.critical, b.critical);
  EXPECT_THROW(supt_band(c, s, 0.05, 0, 6), DataError);
}

TEST(SupT, IndefiniteRejected) {
  const std::vector<double> c{0.5, 0.5};
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 2, 1;
  EXPECT_THROW(supt_band(c, cov(m, 10), 0.05, 1000, 1), NumericError);
}

TEST(Mvn, ZeroAndDeterminism) {
  EXPECT_EQ(sample_mvn(Eigen::MatrixXd::Zero(3, 3), 10, 1).cwiseAbs().maxCoeff(), 0.0);
  Eigen::MatrixXd s(2, 2);
  s << 2, 0.5, 0.5, 1;
  EXPECT_EQ(sample_mvn(s, 100, 9), sample_mvn(s, 100, 9));
  EXPECT_NE(sample_mvn(s, 100, 9), sample_mvn(s, 100, 10));
}

TEST(Mvn, EmpiricalCovariance) {
  const auto w = sample_mvn(Eigen::MatrixXd::Identity(2, 2), 1000000, 11);
  const Eigen::MatrixXd emp = w.transpose() * w / double(w.rows());
  EXPECT_LE((emp - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.005);

  Eigen::MatrixXd s(3, 3);
  s << 1.0, 0.6, -0.2, 0.6, 2.0, 0.3, -0.2, 0.3, 0.5;
  const auto v = sample_mvn(s, 1000000, 12);
  const Eigen::MatrixXd e2 = v.transpose() * v / double(v.rows());
  EXPECT_LE((e2 - s).norm() / s.norm(), 0.02);
}

TEST(BandCsv, Layout) {
  const std::vector<double> c{0.5, 0.25};
  const auto b = pointwise_band(c, cov(Eigen::MatrixXd::Identity(2, 2) * 0.0, 10), 0.05);
  std::ostringstream os;
  write_band_header(os);
  write_band_rows(os, b, QuerySpec({{{1.0, 2.0}, 0.0}, {{3.0, 4.0}, 1.0}}));
  EXPECT_EQ(os.str(),
            "query_index,x,t_or_class,center,lower,upper,kind,alpha\n"
            "0,1;2,0,0.5,0.5,0.5,pointwise,0.05\n"
            "1,3;4,1,0.25,0.25,0.25,pointwise,0.05\n");
}
