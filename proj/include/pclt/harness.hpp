#pragma once

// Experiment drivers: frequentist coverage of the credible bands on
// synthetic DGPs, gap experiments, and the band pipeline for CSV data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "pclt/bands.hpp"
#include "pclt/core.hpp"
#include "pclt/csv.hpp"
#include "pclt/dgp.hpp"
#include "pclt/error.hpp"
#include "pclt/estimators.hpp"
#include "pclt/parallel.hpp"
#include "pclt/rules.hpp"
#include "pclt/trajectory.hpp"

namespace pclt {

enum class EstimatorChoice { Vn, Un, Both };

inline EstimatorChoice parse_estimator(const std::string& s) {
  if (s == "vn" || s == "Vn") return EstimatorChoice::Vn;
  if (s == "un" || s == "Un") return EstimatorChoice::Un;
  if (s == "both") return EstimatorChoice::Both;
  throw DataError("estimator must be vn, un or both, got '" + s + "'");
}

inline std::vector<CovKind> estimator_kinds(EstimatorChoice e) {
  switch (e) {
    case EstimatorChoice::Vn: return {CovKind::Vn};
    case EstimatorChoice::Un: return {CovKind::Un};
    case EstimatorChoice::Both: return {CovKind::Vn, CovKind::Un};
  }
  return {};
}

/// Settings shared by every band computation in the harness.
struct BandSettings {
  double alpha = 0.05;
  EstimatorChoice estimator = EstimatorChoice::Vn;
  bool pointwise = true;
  bool supt = true;
  std::size_t supt_draws = kDefaultSupTDraws;
  TrajectoryOptions trajectory;
  UnOptions un;
  /// Regression U_n without an exact response sampler needs a threshold
  /// grid; when the task has none, this many points spanning the observed
  /// responses are used.
  std::size_t auto_threshold_points = 50;
};

struct LabeledBand {
  CovKind estimator = CovKind::Vn;
  Band band;
};

namespace detail {

inline TaskKind with_thresholds(const ContextTable& ctx, const BandSettings& s) {
  TaskKind task = ctx.task();
  if (task.type != TaskType::RegressionCdf || !task.thresholds.empty()) return task;
  double lo = ctx[0].y, hi = ctx[0].y;
  for (const auto& o : ctx.rows()) {
    lo = std::min(lo, o.y);
    hi = std::max(hi, o.y);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  return TaskKind::regression_cdf(linspace(lo, hi, std::max<std::size_t>(2, s.auto_threshold_points)));
}

}  // namespace detail

/// Trajectory, estimator(s) and band(s) for one context. Bands are listed
/// per estimator, pointwise before sup-t.
inline std::vector<LabeledBand> compute_bands(const PredictiveRule& rule, const ContextTable& context,
                                              const QuerySpec& queries, std::uint64_t seed,
                                              const BandSettings& s) {
  if (!s.pointwise && !s.supt) throw DataError("no band kind selected");
  const auto tr = build_trajectory(rule, context, queries, derive_seed(seed, "trajectory"), s.trajectory);
  const auto& center = tr.terminal();
  std::vector<LabeledBand> out;
  for (CovKind k : estimator_kinds(s.estimator)) {
    CovarianceEstimate cov;
    if (k == CovKind::Vn) {
      if (s.supt) {
        cov = vn(tr);
      } else {
        // Pointwise bands only need the diagonal.
        const auto d = vn_diagonal(tr);
        cov.matrix = Eigen::VectorXd::Map(d.data(), static_cast<Eigen::Index>(d.size())).asDiagonal();
        cov.n = tr.n;
        cov.kind = CovKind::Vn;
      }
    } else {
      const ContextTable ctx = ContextTable::validated(
          std::vector<Observation>(context.rows().begin(), context.rows().end()), detail::with_thresholds(context, s));
      UnOptions uo = s.un;
      uo.fallback = s.trajectory.fallback;
      cov = un(rule, ctx, queries, derive_seed(seed, "un"), uo);
    }
    if (s.pointwise) out.push_back({k, pointwise_band(center, cov, s.alpha)});
    if (s.supt) out.push_back({k, supt_band(center, cov, s.alpha, s.supt_draws, derive_seed(seed, "supt"))});
  }
  return out;
}

/// Equal-tailed credible band from the exact limit posterior of a conjugate
/// rule; bypasses the CLT entirely.
inline Band exact_posterior_band(const ConjugateRule& rule, const ContextTable& context,
                                 const QuerySpec& queries, double alpha) {
  Band b;
  b.alpha = alpha;
  b.kind = BandKind::Pointwise;
  for (const auto& q : queries) {
    const auto lp = rule.exact_limit_posterior(context.task(), context.rows(), q);
    b.center.push_back(lp.mean());
    b.lower.push_back(lp.quantile(alpha / 2.0));
    b.upper.push_back(lp.quantile(1.0 - alpha / 2.0));
    b.se.push_back(std::sqrt(lp.variance()));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Coverage study

struct CoverageConfig {
  DgpSpec dgp;
  RulePtr rule;
  std::vector<std::size_t> ns = {200, 500, 1000};
  std::size_t replications = 100;
  std::vector<double> grid = linspace(-10.0, 10.0, 100);
  /// Event scored at every grid point; defaults to the DGP's own target.
  std::optional<double> event;
  BandSettings bands;
  /// Also score the exact-posterior band (conjugate rules only).
  bool exact_oracle = false;
  std::uint64_t seed = 0;
  std::size_t workers = 0;

  void validate() const {
    if (!rule) throw DataError("coverage experiment needs a rule");
    if (replications < 1) throw DataError("replications must be at least 1");
    if (grid.empty()) throw DataError("evaluation grid is empty");
    if (ns.empty()) throw DataError("no sample sizes given");
    if (!(bands.alpha > 0 && bands.alpha < 1)) throw DataError("alpha must lie in (0,1)");
    if (dgp.name == DgpName::Moons || dgp.name == DgpName::Spirals)
      throw DataError("coverage needs a DGP with a closed-form target");
  }

  double target_event() const {
    if (event) return *event;
    return dgp_task(dgp).is_classification() ? 1.0 : dgp.target_threshold();
  }
};

struct ReplicationRecord {
  std::size_t n = 0;
  std::size_t replication = 0;
  std::string estimator;  // "Vn", "Un" or "exact"
  std::string kind;       // "pointwise", "sup-t" or "exact"
  std::vector<bool> covered;
  double mean_width = 0.0;
  double critical = 0.0;

  bool operator==(const ReplicationRecord&) const = default;
};

struct CoverageRow {
  std::string dgp;
  std::size_t n = 0;
  std::string estimator;
  std::string kind;
  /// Pointwise rate for pointwise and exact bands, simultaneous rate for
  /// sup-t bands.
  double rate = 0.0;
  double pointwise_rate = 0.0;
  double simultaneous_rate = 0.0;
  double mean_width = 0.0;
  std::size_t replications = 0;

  bool operator==(const CoverageRow&) const = default;
};

struct CoverageReport {
  std::string dgp;
  std::string rule;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::vector<double> grid;
  std::vector<CoverageRow> rows;
  std::vector<ReplicationRecord> records;
  std::size_t failures = 0;
  std::vector<std::string> warnings;
  std::size_t nesting_violations = 0;  // sup-t band not containing pointwise band

  const CoverageRow& row(std::size_t n, const std::string& estimator, const std::string& kind) const {
    for (const auto& r : rows)
      if (r.n == n && r.estimator == estimator && r.kind == kind) return r;
    throw DataError("no coverage row for n=" + std::to_string(n) + " " + estimator + " " + kind);
  }

  bool operator==(const CoverageReport&) const = default;
};

namespace detail {

inline ReplicationRecord score_band(const Band& b, const std::vector<double>& truth, std::size_t n,
                                    std::size_t rep, std::string est, std::string kind) {
  ReplicationRecord r{n, rep, std::move(est), std::move(kind), {}, 0.0, b.critical};
  double w = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    r.covered.push_back(b.contains(j, truth[j]));
    w += b.width(j);
  }
  r.mean_width = w / double(truth.size());
  return r;
}

inline bool nested(const Band& outer, const Band& inner) {
  for (std::size_t j = 0; j < outer.size(); ++j)
    if (outer.lower[j] > inner.lower[j] + 1e-15 || outer.upper[j] < inner.upper[j] - 1e-15) return false;
  return true;
}

}  // namespace detail

/// Aggregates records into one row per (n, estimator, kind). Independent of
/// record order.
inline std::vector<CoverageRow> aggregate_records(const std::vector<ReplicationRecord>& records,
                                                  const std::string& dgp) {
  std::map<std::tuple<std::size_t, std::string, std::string>, std::vector<const ReplicationRecord*>> groups;
  for (const auto& r : records) groups[{r.n, r.estimator, r.kind}].push_back(&r);
  std::vector<CoverageRow> rows;
  for (const auto& [key, recs] : groups) {
    CoverageRow row;
    row.dgp = dgp;
    std::tie(row.n, row.estimator, row.kind) = key;
    row.replications = recs.size();
    double pw = 0.0, sim = 0.0, width = 0.0;
    for (const auto* r : recs) {
      std::size_t hit = 0;
      for (bool c : r->covered) hit += c;
      pw += double(hit) / double(r->covered.size());
      sim += hit == r->covered.size() ? 1.0 : 0.0;
      width += r->mean_width;
    }
    const double R = double(recs.size());
    row.pointwise_rate = pw / R;
    row.simultaneous_rate = sim / R;
    row.mean_width = width / R;
    row.rate = row.kind == "sup-t" ? row.simultaneous_rate : row.pointwise_rate;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline CoverageReport coverage_experiment(const CoverageConfig& cfg) {
  cfg.validate();
  const TaskKind task = dgp_task(cfg.dgp);
  if (!cfg.rule->supports(task)) throw RuleError(cfg.rule->id() + ": does not support task " + to_string(task.type));
  const double event = cfg.target_event();
  std::vector<Query> qs;
  std::vector<double> truth;
  for (double x : cfg.grid) {
    qs.push_back({{x}, event});
    truth.push_back(true_target(cfg.dgp, x, event));
  }
  const QuerySpec queries(std::move(qs));
  const auto* conj = dynamic_cast<const ConjugateRule*>(cfg.rule.get());
  if (cfg.exact_oracle && !conj) throw RuleError("exact-posterior bands need a conjugate rule");

  CoverageReport rep;
  rep.dgp = to_string(cfg.dgp.name) + (cfg.dgp.gap ? "-gap" : "");
  rep.rule = cfg.rule->id();
  rep.alpha = cfg.bands.alpha;
  rep.seed = cfg.seed;
  rep.grid = cfg.grid;

  struct Job {
    std::size_t n, r;
  };
  std::vector<Job> jobs;
  for (std::size_t n : cfg.ns)
    for (std::size_t r = 0; r < cfg.replications; ++r) jobs.push_back({n, r});
  std::vector<std::vector<ReplicationRecord>> per_job(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::vector<std::size_t> nest_bad(jobs.size(), 0);

  BandSettings bs = cfg.bands;
  bs.trajectory.workers = 1;  // parallelism is across replications
  bs.un.workers = 1;

  parallel_chunks(jobs.size(), cfg.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto [n, r] = jobs[i];
      const std::uint64_t s = derive_seed(derive_seed(cfg.seed, static_cast<std::uint64_t>(n)), r);
      try {
        const auto ctx = sample_dgp(cfg.dgp, n, derive_seed(s, "data"));
        const auto bands = compute_bands(*cfg.rule, ctx, queries, s, bs);
        const Band* last_pw = nullptr;
        for (const auto& lb : bands) {
          per_job[i].push_back(detail::score_band(lb.band, truth, n, r, to_string(lb.estimator),
                                                  to_string(lb.band.kind)));
          if (lb.band.kind == BandKind::Pointwise) last_pw = &lb.band;
          else if (last_pw && !detail::nested(lb.band, *last_pw)) ++nest_bad[i];
        }
        if (cfg.exact_oracle) {
          const auto eb = exact_posterior_band(*conj, ctx, queries, cfg.bands.alpha);
          per_job[i].push_back(detail::score_band(eb, truth, n, r, "exact", "exact"));
        }
      } catch (const std::exception& ex) {
        per_job[i].clear();
        errors[i] = ex.what();
      }
    }
  });

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!errors[i].empty()) {
      ++rep.failures;
      rep.warnings.push_back("replication " + std::to_string(jobs[i].r) + " at n=" + std::to_string(jobs[i].n) +
                             " failed: " + errors[i]);
    }
    rep.nesting_violations += nest_bad[i];
    for (auto& r : per_job[i]) rep.records.push_back(std::move(r));
  }
  rep.rows = aggregate_records(rep.records, rep.dgp);
  return rep;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::ordered_json to_json(const CoverageReport& r) {
  using nlohmann::ordered_json;
  ordered_json rows = ordered_json::array(), recs = ordered_json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"dgp", row.dgp},
                    {"n", row.n},
                    {"estimator", row.estimator},
                    {"kind", row.kind},
                    {"rate", row.rate},
                    {"pointwise_rate", row.pointwise_rate},
                    {"simultaneous_rate", row.simultaneous_rate},
                    {"mean_width", row.mean_width},
                    {"replications", row.replications}});
  }
  for (const auto& rec : r.records) {
    std::vector<int> cov(rec.covered.begin(), rec.covered.end());
    recs.push_back({{"n", rec.n},
                    {"replication", rec.replication},
                    {"estimator", rec.estimator},
                    {"kind", rec.kind},
                    {"covered", cov},
                    {"mean_width", rec.mean_width},
                    {"critical", rec.critical}});
  }
  return ordered_json{{"dgp", r.dgp},
                      {"rule", r.rule},
                      {"alpha", r.alpha},
                      {"seed", r.seed},
                      {"grid", r.grid},
                      {"failures", r.failures},
                      {"nesting_violations", r.nesting_violations},
                      {"warnings", r.warnings},
                      {"rows", rows},
                      {"records", recs}};
}

inline CoverageReport coverage_report_from_json(const nlohmann::ordered_json& j) {
  CoverageReport r;
  try {
    r.dgp = j.at("dgp").get<std::string>();
    r.rule = j.at("rule").get<std::string>();
    r.alpha = j.at("alpha").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.grid = j.at("grid").get<std::vector<double>>();
    r.failures = j.at("failures").get<std::size_t>();
    r.nesting_violations = j.at("nesting_violations").get<std::size_t>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) {
      r.rows.push_back({row.at("dgp").get<std::string>(), row.at("n").get<std::size_t>(),
                        row.at("estimator").get<std::string>(), row.at("kind").get<std::string>(),
                        row.at("rate").get<double>(), row.at("pointwise_rate").get<double>(),
                        row.at("simultaneous_rate").get<double>(), row.at("mean_width").get<double>(),
                        row.at("replications").get<std::size_t>()});
    }
    for (const auto& rec : j.at("records")) {
      ReplicationRecord x;
      x.n = rec.at("n").get<std::size_t>();
      x.replication = rec.at("replication").get<std::size_t>();
      x.estimator = rec.at("estimator").get<std::string>();
      x.kind = rec.at("kind").get<std::string>();
      for (int c : rec.at("covered").get<std::vector<int>>()) x.covered.push_back(c != 0);
      x.mean_width = rec.at("mean_width").get<double>();
      x.critical = rec.at("critical").get<double>();
      r.records.push_back(std::move(x));
    }
  } catch (const nlohmann::ordered_json::exception& e) {
    throw DataError(std::string("malformed coverage report: ") + e.what());
  }
  return r;
}

inline void write_coverage_csv(std::ostream& os, const CoverageReport& r) {
  os << "dgp,rule,n,estimator,kind,rate,pointwise_rate,simultaneous_rate,mean_width,replications,failures\n";
  const auto old = os.precision(17);
  for (const auto& row : r.rows) {
    os << row.dgp << ',' << r.rule << ',' << row.n << ',' << row.estimator << ',' << row.kind << ',' << row.rate
       << ',' << row.pointwise_rate << ',' << row.simultaneous_rate << ',' << row.mean_width << ','
       << row.replications << ',' << r.failures << '\n';
  }
  os.precision(old);
}

enum class ReportFormat { Json, Csv };

inline ReportFormat parse_format(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw DataError("format must be json or csv, got '" + s + "'");
}

/// Thrown when an output file cannot be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void emit_report(const CoverageReport& r, const std::string& path, ReportFormat fmt) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  if (fmt == ReportFormat::Json) os << to_json(r).dump(2) << '\n';
  else write_coverage_csv(os, r);
  if (!os) throw IoError("failed writing " + path);
}

inline CoverageReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::ordered_json::exception& e) {
    throw DataError(std::string("report is not valid JSON: ") + e.what());
  }
  return coverage_report_from_json(j);
}

// ---------------------------------------------------------------------------
// Gap experiment

struct GapOutput {
  std::size_t n = 0;
  ContextTable data;
  QuerySpec queries;
  std::vector<LabeledBand> bands;
};

struct GapConfig {
  DgpSpec dgp;  // gap flag is forced on
  RulePtr rule;
  std::vector<std::size_t> ns = {200, 500, 1000};
  std::vector<double> grid = linspace(-10.0, 10.0, 100);
  std::optional<double> event;
  BandSettings bands;
  std::uint64_t seed = 0;
};

inline std::vector<GapOutput> gap_experiment(const GapConfig& cfg) {
  if (!cfg.rule) throw DataError("gap experiment needs a rule");
  if (cfg.grid.empty()) throw DataError("evaluation grid is empty");
  DgpSpec spec = cfg.dgp;
  spec.gap = true;
  const double event = cfg.event ? *cfg.event : (dgp_task(spec).is_classification() ? 1.0 : spec.target_threshold());
  const QuerySpec queries = QuerySpec::at([&] {
    std::vector<std::vector<double>> xs;
    for (double x : cfg.grid) xs.push_back({x});
    return xs;
  }(), event);
  std::vector<GapOutput> out;
  for (std::size_t n : cfg.ns) {
    const std::uint64_t s = derive_seed(cfg.seed, static_cast<std::uint64_t>(n));
    GapOutput g;
    g.n = n;
    g.data = sample_dgp(spec, n, derive_seed(s, "data"));
    g.queries = queries;
    g.bands = compute_bands(*cfg.rule, g.data, queries, s, cfg.bands);
    out.push_back(std::move(g));
  }
  return out;
}

inline void write_dataset_csv(std::ostream& os, const ContextTable& t) {
  for (std::size_t c = 0; c < t.dim(); ++c) os << 'x' << c << ',';
  os << "y\n";
  const auto old = os.precision(17);
  for (const auto& o : t.rows()) {
    for (double v : o.x) os << v << ',';
    os << o.y << '\n';
  }
  os.precision(old);
}

/// Band CSV with an extra estimator column after kind.
inline void write_labeled_bands(std::ostream& os, const std::vector<LabeledBand>& bands, const QuerySpec& q) {
  os << "query_index,x,t_or_class,center,lower,upper,kind,alpha,estimator\n";
  for (const auto& lb : bands) {
    std::ostringstream tmp;
    write_band_rows(tmp, lb.band, q);
    std::istringstream lines(tmp.str());
    std::string line;
    while (std::getline(lines, line)) os << line << ',' << to_string(lb.estimator) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Real-data band pipeline

struct PipelineConfig {
  CsvOptions csv;
  /// Evaluation covariates, each of the data's dimension.
  std::vector<std::vector<double>> grid;
  /// Class index for classification; threshold t for regression.
  double event = 1.0;
  /// Regression only: report R(t | x) = 1 - F(t | x) instead of F.
  bool reliability = false;
  BandSettings bands;
  std::uint64_t seed = 0;
};

struct PipelineOutput {
  CsvData data;
  QuerySpec queries;
  std::vector<LabeledBand> bands;
  std::vector<bool> extrapolated;  // grid point outside the covariate bounding box
};

/// 1 - F applied to a band: center' = 1 - center, bounds swap.
inline Band complement_band(const Band& b) {
  Band c = b;
  for (std::size_t j = 0; j < b.size(); ++j) {
    c.center[j] = 1.0 - b.center[j];
    c.lower[j] = 1.0 - b.upper[j];
    c.upper[j] = 1.0 - b.lower[j];
  }
  return c;
}

inline PipelineOutput run_pipeline(const PredictiveRule& rule, CsvData data, const PipelineConfig& cfg) {
  if (cfg.grid.empty()) throw DataError("evaluation grid is empty");
  if (cfg.reliability && data.table.task().type != TaskType::RegressionCdf)
    throw DataError("reliability mode needs a regression response");
  PipelineOutput out;
  const auto& t = data.table;
  std::vector<double> lo(t.dim(), INFINITY), hi(t.dim(), -INFINITY);
  for (const auto& o : t.rows())
    for (std::size_t c = 0; c < t.dim(); ++c) {
      lo[c] = std::min(lo[c], o.x[c]);
      hi[c] = std::max(hi[c], o.x[c]);
    }
  std::vector<Query> qs;
  for (const auto& x : cfg.grid) {
    if (x.size() != t.dim()) throw DataError("grid point dimension differs from the data");
    bool outside = false;
    for (std::size_t c = 0; c < x.size(); ++c) outside = outside || x[c] < lo[c] || x[c] > hi[c];
    out.extrapolated.push_back(outside);
    qs.push_back({x, cfg.event});
  }
  out.queries = QuerySpec(std::move(qs));
  out.bands = compute_bands(rule, t, out.queries, cfg.seed, cfg.bands);
  if (cfg.reliability)
    for (auto& lb : out.bands) lb.band = complement_band(lb.band);
  out.data = std::move(data);
  return out;
}

inline PipelineOutput real_data_pipeline(const std::string& csv_path, const PredictiveRule& rule,
                                         const PipelineConfig& cfg) {
  return run_pipeline(rule, read_csv_file(csv_path, cfg.csv), cfg);
}

}  // namespace pclt
