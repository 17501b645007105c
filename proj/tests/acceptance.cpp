// Acceptance run: one [PASS]/[FAIL] line per criterion, non-zero exit if
// any fails. Oracles are computed here from Boost and the standard library,
// independently of the code under test.

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>

#include "pclt/pclt.hpp"

using namespace pclt;
namespace bm = boost::math;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::shared_ptr<ConjugateRule> four_bin_rule() {
  return std::make_shared<ConjugateRule>(ConjugateConfig{BetaBernoulliPrior{}, Binning::uniform(-10, 10, 4)});
}

// Expected pointwise coverage of the equal-tailed Beta(1+s, 1+f) interval
// for one bin with success probability p, when each of n draws lands in the
// bin with probability q. Exact double sum over the binomial bin count and
// the binomial successes.
double enumerated_beta_coverage(std::size_t n, double q, double p, double alpha) {
  const bm::binomial_distribution<double> count(double(n), q);
  double total = 0;
  for (std::size_t nb = 0; nb <= n; ++nb) {
    const double w = bm::pdf(count, double(nb));
    if (w < 1e-16) continue;
    const bm::binomial_distribution<double> succ(double(nb), p);
    double cov = 0;
    for (std::size_t s = 0; s <= nb; ++s) {
      const double ws = bm::pdf(succ, double(s));
      if (ws < 1e-18) continue;
      const double cdf = bm::ibeta(1.0 + double(s), 1.0 + double(nb - s), p);
      if (cdf >= alpha / 2 && cdf <= 1 - alpha / 2) cov += ws;
    }
    total += w * cov;
  }
  return total;
}

void coverage_criterion() {
  Stopwatch sw;
  CoverageConfig cfg;
  cfg.dgp.name = DgpName::BernoulliBins;
  cfg.rule = four_bin_rule();
  cfg.ns = {500};
  cfg.replications = 200;
  cfg.bands.supt = false;
  cfg.seed = 2024;
  const auto rep = coverage_experiment(cfg);
  const double secs = sw.seconds();
  const double rate = rep.row(500, "Vn", "pointwise").rate;

  // Grid-averaged exact Bayes coverage.
  double oracle = 0;
  for (double x : cfg.grid) {
    const double p = true_target(cfg.dgp, x);
    oracle += enumerated_beta_coverage(500, 0.25, p, 0.05) / double(cfg.grid.size());
  }
  report(rate >= 0.90 && rate <= 0.99 && secs < 60 && std::abs(rate - oracle) <= 0.05 && rep.failures == 0,
         "exact-oracle CLT coverage",
         fmt("V_n pointwise rate %.4f (need [0.90,0.99]), enumerated Beta coverage %.4f (|diff| %.4f <= 0.05), "
             "%.1f s (< 60 s)",
             rate, oracle, std::abs(rate - oracle), secs));
}

ContextTable coin_flips(std::size_t n, double p, std::uint64_t seed) {
  DgpSpec d;
  d.name = DgpName::BernoulliBins;
  d.bin_probs = {p};
  return sample_dgp(d, n, seed);
}

const QuerySpec kOne({{{0.0}, 1.0}});

void variance_criterion() {
  ConjugateRule rule{ConjugateConfig{}};
  UnOptions exact;
  exact.mode = UnOptions::Mode::Exact;
  double rel_v = 0, rel_u = 0;
  for (int s = 0; s < 50; ++s) {
    const auto ctx = coin_flips(2000, 0.6, 500 + s);
    const auto tr = build_trajectory(rule, ctx, kOne, s);
    const double g = tr.terminal()[0], target = g * (1 - g);
    rel_v += std::abs(vn(tr).matrix(0, 0) - target) / target / 50;
    rel_u += std::abs(un(rule, ctx, kOne, s, exact).matrix(0, 0) - target) / target / 50;
  }
  report(rel_v <= 0.15 && rel_u <= 0.05, "variance consistency",
         fmt("mean relative error V_n %.4f (<= 0.15), U_n exact %.4f (<= 0.05), n=2000, 50 seeds", rel_v, rel_u));
}

void gaussian_limit_criterion() {
  ConjugateRule rule{ConjugateConfig{}};
  double mean_ks = 0, worst = 0;
  for (int s = 0; s < 20; ++s) {
    const auto ctx = coin_flips(1000, 0.3, 900 + s);
    double succ = 0;
    for (const auto& o : ctx.rows()) succ += o.y;
    const auto tr = build_trajectory(rule, ctx, kOne, s);
    const double g = tr.terminal()[0], sd = std::sqrt(vn(tr).matrix(0, 0) / 1000.0);
    const bm::beta_distribution<double> post(1 + succ, 1 + 1000 - succ);
    const bm::normal_distribution<double> approx(g, sd);
    double ks = 0;
    for (int i = 1; i < 20000; ++i) {
      const double t = i / 20000.0;
      ks = std::max(ks, std::abs(bm::cdf(post, t) - bm::cdf(approx, t)));
    }
    mean_ks += ks / 20;
    worst = std::max(worst, ks);
  }
  report(mean_ks <= 0.05, "Gaussian limit quality",
         fmt("mean Kolmogorov distance %.4f (<= 0.05), worst seed %.4f, n=1000, 20 seeds", mean_ks, worst));
}

struct McResult {
  double mean, se;
};

McResult mc_dirichlet_entropy(const std::vector<double>& a, std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<std::gamma_distribution<double>> gam;
  for (double ak : a) gam.emplace_back(ak, 1.0);
  double s1 = 0, s2 = 0;
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < draws; ++i) {
    double tot = 0;
    for (std::size_t k = 0; k < a.size(); ++k) tot += v[k] = gam[k](gen);
    double h = 0;
    for (double x : v) {
      const double p = x / tot;
      if (p > 0) h -= p * std::log(p);
    }
    s1 += h;
    s2 += h * h;
  }
  const double m = s1 / double(draws);
  return {m, std::sqrt((s2 / double(draws) - m * m) / double(draws))};
}

void entropy_criterion() {
  const double closed = bm::digamma(5.0) - bm::digamma(3.0);
  const double got = decompose(0.5, 0.05).aleatoric;
  const bool closed_ok = std::abs(got - 0.5833333333333333) <= 1e-9 && std::abs(got - closed) <= 1e-9;

  std::mt19937_64 gen(31415);
  std::uniform_real_distribution<double> u(0.05, 0.95), frac(0.05, 0.9);
  int beta_bad = 0, dir_bad = 0;
  double worst_z = 0;
  for (int r = 0; r < 20; ++r) {
    const double g = u(gen), var = frac(gen) * g * (1 - g);
    const double t = g * (1 - g) / var - 1;  // Beta(gT, (1-g)T) has mean g, variance var
    const auto mc = mc_dirichlet_entropy({g * t, (1 - g) * t}, 1000000, 7000 + r);
    const double z = std::abs(decompose(g, var).aleatoric - mc.mean) / mc.se;
    worst_z = std::max(worst_z, z);
    beta_bad += z > 3;
  }
  for (int r = 0; r < 20; ++r) {
    std::vector<double> w{u(gen), u(gen), u(gen)};
    const double ws = w[0] + w[1] + w[2];
    std::vector<double> g;
    double sq = 0;
    for (double x : w) {
      g.push_back(x / ws);
      sq += g.back() * g.back();
    }
    const double a0 = 1.0 + 30.0 * u(gen);
    // Dirichlet(a0 g) has Var_k = g_k (1 - g_k) / (a0 + 1).
    std::vector<double> var, a;
    for (double gk : g) {
      var.push_back(gk * (1 - gk) / (a0 + 1));
      a.push_back(a0 * gk);
    }
    const auto mc = mc_dirichlet_entropy(a, 1000000, 8000 + r);
    const double z = std::abs(decompose(g, var).aleatoric - mc.mean) / mc.se;
    worst_z = std::max(worst_z, z);
    dir_bad += z > 3;
  }
  int negative = 0;
  for (int i = 1; i <= 50; ++i)
    for (int j = 1; j <= 50; ++j) {
      const double g = i / 51.0, var = g * (1 - g) * j / 50.0;
      negative += decompose(g, var).epistemic < 0;
    }
  report(closed_ok && beta_bad == 0 && dir_bad == 0 && negative == 0, "entropy closed forms",
         fmt("U_a(0.5, 0.05) = %.10f vs psi(5)-psi(3) = %.10f; MC outside 3 SE: beta %d/20, dirichlet %d/20 "
             "(worst %.2f SE, 1e6 draws each); negative epistemic on 50x50 grid: %d",
             got, closed, beta_bad, dir_bad, worst_z, negative));
}

CovarianceEstimate make_cov(const Eigen::MatrixXd& m, std::size_t n) {
  CovarianceEstimate c;
  c.matrix = m;
  c.n = n;
  return c;
}

void supt_criterion() {
  const double z = bm::quantile(bm::normal(), 0.975);
  const std::vector<double> one{0.5}, two{0.5, 0.5};
  const double c1 = supt_band(one, make_cov(Eigen::MatrixXd::Constant(1, 1, 0.3), 100), 0.05, 100000, 11).critical;
  const double oracle2 = bm::quantile(bm::normal(), (1 + std::sqrt(0.95)) / 2);
  const double c2 = supt_band(two, make_cov(Eigen::MatrixXd::Identity(2, 2) * 0.2, 100), 0.05, 200000, 12).critical;

  // Nesting on random problems, with zero-variance and clipped coordinates.
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0, 1);
  int not_nested = 0;
  const int runs = 200;
  for (int r = 0; r < runs; ++r) {
    const int m = 1 + r % 6;
    Eigen::MatrixXd a(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) a(i, j) = u(gen) - 0.5;
    if (r % 5 == 0) a.row(0).setZero();
    Eigen::MatrixXd s = a * a.transpose();
    std::vector<double> c;
    for (int i = 0; i < m; ++i) c.push_back(u(gen));
    const auto cov = make_cov(s, 5 + r);
    const double alpha = 0.01 + 0.2 * u(gen);
    const auto p = pointwise_band(c, cov, alpha), t = supt_band(c, cov, alpha, 2000, 100 + r);
    for (int j = 0; j < m; ++j) not_nested += t.lower[j] > p.lower[j] || t.upper[j] < p.upper[j];
  }
  const bool ok = std::abs(c1 - z) <= 0.01 * z && std::abs(c2 - oracle2) <= 0.01 && not_nested == 0;
  report(ok, "sup-t correctness",
         fmt("m=1 critical %.5f vs %.5f (1%% tol), m=2 critical %.5f vs %.5f (tol 0.01), nesting failures %d over "
             "%d runs",
             c1, z, c2, oracle2, not_nested, runs));
}

DgpSpec pinned(DgpName name, double x) {
  DgpSpec d;
  d.name = name;
  d.x_lo = d.x_hi = x;
  return d;
}

void dgp_criterion() {
  Stopwatch sw;
  const auto phi = [](double x) { return bm::cdf(bm::normal(), x); };
  DgpSpec lin;
  DgpSpec poi;
  poi.name = DgpName::Poisson;
  DgpSpec pro;
  pro.name = DgpName::Probit;
  const double v1 = true_target(lin, 5.0), v2 = true_target(poi, 0.0), v3 = true_target(pro, 0.0);
  // Seven-digit literals are matched to one unit in the last digit; the
  // closed forms are matched to 1e-14. The probit literal 0.4045501 is one
  // unit above the correctly rounded 0.4045500 (exact 0.40455003).
  const bool pinned_ok = std::abs(v1 - 0.1586553) <= 1e-7 && std::abs(v1 - phi(-1)) < 1e-14 &&
                         std::abs(v2 - 0.9196986) <= 1e-7 && std::abs(v2 - 2.5 * std::exp(-1.0)) < 1e-14 &&
                         std::abs(v3 - 0.4045501) <= 1e-7 && std::abs(v3 - (0.6 * phi(-2) + 0.4 * phi(2))) < 1e-14;

  const std::vector<double> xs{-8.0, -3.5, 0.0, 4.5, 9.0};
  int checks = 0, misses = 0;
  std::string missed;
  for (auto name : {DgpName::Linear, DgpName::Polynomial, DgpName::Dependent, DgpName::Sine, DgpName::Poisson,
                    DgpName::Probit, DgpName::Categorical, DgpName::BernoulliBins}) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto spec = pinned(name, xs[i]);
      const auto tab = sample_dgp(spec, 100000, 31 * i + 7);
      const bool cls = tab.task().is_classification();
      const double event = cls ? 1.0 : spec.target_threshold();
      double hits = 0;
      for (const auto& o : tab.rows()) hits += cls ? (o.y == event) : (o.y <= event);
      const double p = true_target(spec, xs[i], event);
      ++checks;
      if (std::abs(hits / 1e5 - p) > 3 * std::sqrt(p * (1 - p) / 1e5) + 1e-12) {
        ++misses;
        missed += " " + to_string(name) + "@" + fmt("%g", xs[i]);
      }
    }
  }
  const double secs = sw.seconds();
  report(pinned_ok && misses == 0 && secs < 30, "DGP ground truth",
         fmt("Phi(-1)=%.9f, Poisson F(2|0)=%.9f, probit p(0)=%.9f (literals to 1e-7, closed forms to 1e-14); %d/%d frequency checks outside 3 sigma%s; %.1f s "
             "(< 30 s)",
             v1, v2, v3, misses, checks, missed.c_str(), secs));
}

void diagnostics_criterion() {
  Stopwatch sw;
  std::vector<double> ns, exact, noisy;
  for (int i = 0; i < 100; ++i) ns.push_back(std::round(125 * std::pow(1025.0 / 125, i / 99.0)));
  std::mt19937_64 gen(87);
  std::normal_distribution<double> eps(0, 0.1);
  for (double n : ns) {
    exact.push_back(0.5 * std::pow(n, -1.2));
    noisy.push_back(0.3 * std::pow(n, -0.87) * std::exp(eps(gen)));
  }
  const auto fe = power_law_fit(ns, exact), fn = power_law_fit(ns, noisy);

  ConjugateRule rule{ConjugateConfig{BetaBernoulliPrior{}, Binning::support({-1, 0, 1, 2})}};
  DiagnoseConfig cfg;
  cfg.rollouts = 50;
  cfg.rollout.seed = 77;
  const auto rep = diagnose(rule, cfg);
  double max_b = 0;
  for (const auto& t : rep.traces)
    for (double b : t.b) max_b = std::max(max_b, std::abs(b));
  const double secs = sw.seconds();
  const bool ok = std::abs(fe.exponent - 1.2) <= 1e-6 && fn.ci_lo <= 0.87 && 0.87 <= fn.ci_hi && max_b <= 1e-10 &&
                  std::abs(rep.gamma.gamma_med - 2.0) <= 0.1 && secs < 300;
  report(ok, "diagnostics recovery",
         fmt("exact beta %.9f (1.2 +- 1e-6); noisy beta %.4f CI [%.4f, %.4f] vs 0.87; max |b| %.2e (<= 1e-10); "
             "gamma_med %.4f (2 +- 0.1, 50 rollouts); %.1f s (< 300 s)",
             fe.exponent, fn.exponent, fn.ci_lo, fn.ci_hi, max_b, rep.gamma.gamma_med, secs));
}

void trend_criterion() {
  CoverageConfig cfg;
  cfg.dgp.name = DgpName::BernoulliBins;
  cfg.rule = four_bin_rule();
  cfg.ns = {200, 500, 1000};
  cfg.replications = 30;
  cfg.bands.estimator = EstimatorChoice::Both;
  cfg.bands.supt = false;
  cfg.seed = 99;
  const auto rep = coverage_experiment(cfg);
  std::vector<double> wv, wu;
  for (auto n : cfg.ns) {
    wv.push_back(rep.row(n, "Vn", "pointwise").mean_width);
    wu.push_back(rep.row(n, "Un", "pointwise").mean_width);
  }
  const bool decreasing = wv[0] > wv[1] && wv[1] > wv[2] && wu[0] > wu[1] && wu[1] > wu[2];
  const double mv = (wv[0] + wv[1] + wv[2]) / 3, mu = (wu[0] + wu[1] + wu[2]) / 3;
  report(decreasing && mu >= mv, "trend properties",
         fmt("V_n widths %.4f > %.4f > %.4f, U_n widths %.4f > %.4f > %.4f, mean U_n %.4f >= mean V_n %.4f", wv[0],
             wv[1], wv[2], wu[0], wu[1], wu[2], mu, mv));
}

}  // namespace

int main() {
  const std::pair<const char*, void (*)()> criteria[] = {
      {"exact-oracle CLT coverage", coverage_criterion}, {"variance consistency", variance_criterion},
      {"Gaussian limit quality", gaussian_limit_criterion}, {"entropy closed forms", entropy_criterion},
      {"sup-t correctness", supt_criterion},               {"DGP ground truth", dgp_criterion},
      {"diagnostics recovery", diagnostics_criterion},     {"trend properties", trend_criterion}};
  for (const auto& [name, fn] : criteria) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(false, name, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
