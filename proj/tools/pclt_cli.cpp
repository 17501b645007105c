// pclt: command-line front end for bands, entropy splits, coverage and gap
// studies, martingale diagnostics, rollouts and DGP samples.
//
// Exit codes: 0 ok, 1 usage, 2 data/IO/numeric, 3 rule or protocol failure.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "pclt/pclt.hpp"

using namespace pclt;
using Json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string rule;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::string estimator = "vn";
  std::string out;
  std::string format;
  bool fast = false;
  std::size_t workers = 0;
  int timeout_ms = 30000;
  std::size_t max_in_flight = 1;
  std::string replay_log;
};

// Where the context comes from: a CSV file or a fresh DGP sample.
struct DataSource {
  std::string csv, label, task = "binary";
  std::vector<double> thresholds;
  std::string dgp;
  std::size_t n = 500;
  bool gap = false;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

double to_num(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("not a number: '" + s + "'");
  }
}

// "lo:hi:count" or a list of points "a;b;c", coordinates separated by ','.
std::vector<std::vector<double>> parse_grid(const std::string& s) {
  if (s.find(':') != std::string::npos) {
    const auto p = split(s, ':');
    if (p.size() != 3) throw UsageError("grid lo:hi:count expected, got '" + s + "'");
    const double c = to_num(p[2]);
    if (c < 1 || c != std::floor(c)) throw UsageError("grid count must be a positive integer");
    std::vector<std::vector<double>> out;
    for (double x : linspace(to_num(p[0]), to_num(p[1]), static_cast<std::size_t>(c))) out.push_back({x});
    return out;
  }
  std::vector<std::vector<double>> out;
  for (const auto& pt : split(s, ';')) {
    std::vector<double> x;
    for (const auto& c : split(pt, ',')) x.push_back(to_num(c));
    out.push_back(std::move(x));
  }
  if (out.empty()) throw UsageError("empty grid");
  return out;
}

std::vector<double> flat_grid(const std::string& s) {
  std::vector<double> out;
  for (const auto& x : parse_grid(s)) {
    if (x.size() != 1) throw UsageError("this command takes a one-dimensional grid");
    out.push_back(x[0]);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& p : split(s, ',')) {
    const double v = to_num(p);
    if (v < 1 || v != std::floor(v)) throw UsageError("sample sizes must be positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw UsageError("no sample sizes given");
  return out;
}

TaskType parse_task(const std::string& s) {
  if (s == "binary") return TaskType::Binary;
  if (s == "multiclass") return TaskType::Multiclass;
  if (s == "regression") return TaskType::RegressionCdf;
  throw UsageError("task must be binary, multiclass or regression");
}

std::string default_rule(const TaskKind& t) {
  switch (t.type) {
    case TaskType::Binary: return "builtin:beta-bernoulli?bins=-10:10:4";
    case TaskType::Multiclass: return "builtin:dirichlet?k=" + std::to_string(t.classes) + "&bins=-10:10:4";
    default: return "builtin:normal?bins=-10:10:4";
  }
}

RulePtr make_rule(const Globals& g, const std::string& fallback) {
  RemoteOptions ro;
  ro.timeout_ms = g.timeout_ms;
  ro.max_in_flight = g.max_in_flight;
  ro.replay_log = g.replay_log;
  try {
    return parse_rule(g.rule.empty() ? fallback : g.rule, ro);
  } catch (const DataError& e) {
    throw RuleError(e.what());  // a malformed rule string is a rule failure
  }
}

BandSettings band_settings(const Globals& g, const std::string& kinds, std::size_t draws) {
  BandSettings s;
  s.alpha = g.alpha;
  s.estimator = parse_estimator(g.estimator);
  if (kinds != "both" && kinds != "pointwise" && kinds != "supt")
    throw UsageError("kinds must be both, pointwise or supt");
  s.pointwise = kinds != "supt";
  s.supt = kinds != "pointwise";
  s.supt_draws = draws;
  s.trajectory.workers = g.workers;
  s.un.workers = g.workers;
  return s;
}

CsvData load(const DataSource& d, std::uint64_t seed) {
  if (!d.csv.empty()) {
    if (d.label.empty()) throw UsageError("--data needs --label");
    CsvOptions o;
    o.label_column = d.label;
    o.task = parse_task(d.task);
    o.thresholds = d.thresholds;
    return read_csv_file(d.csv, o);
  }
  if (d.dgp.empty()) throw UsageError("give --data FILE --label COL or --dgp NAME");
  DgpSpec spec;
  spec.name = parse_dgp_name(d.dgp);
  spec.gap = d.gap;
  CsvData out;
  out.table = sample_dgp(spec, d.n, derive_seed(seed, "data"));
  for (std::size_t c = 0; c < out.table.dim(); ++c) out.feature_names.push_back("x" + std::to_string(c));
  return out;
}

void with_output(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  fn(os);
  if (!os) throw IoError("write to '" + path + "' failed");
}

Json band_json(const std::vector<LabeledBand>& bands, const QuerySpec& q, const std::vector<bool>& extrapolated) {
  Json arr = Json::array();
  for (const auto& lb : bands) {
    Json pts = Json::array();
    for (std::size_t j = 0; j < lb.band.size(); ++j) {
      Json p{{"x", q[j].x},        {"t_or_class", q[j].event}, {"center", lb.band.center[j]},
             {"lower", lb.band.lower[j]}, {"upper", lb.band.upper[j]}, {"se", lb.band.se[j]}};
      if (!extrapolated.empty()) p["extrapolated"] = bool(extrapolated[j]);
      pts.push_back(std::move(p));
    }
    arr.push_back({{"estimator", to_string(lb.estimator)},
                   {"kind", to_string(lb.band.kind)},
                   {"alpha", lb.band.alpha},
                   {"critical", lb.band.critical},
                   {"points", std::move(pts)}});
  }
  return arr;
}

void write_dataset(std::ostream& os, const ContextTable& t, const std::string& format) {
  if (format == "json") {
    Json xs = Json::array(), ys = Json::array();
    for (const auto& o : t.rows()) {
      xs.push_back(o.x);
      ys.push_back(o.y);
    }
    os << Json{{"task", to_string(t.task().type)}, {"x", xs}, {"y", ys}}.dump(2) << '\n';
  } else {
    write_dataset_csv(os, t);
  }
}

// Splices a JSON config into argv ahead of the command line, so explicit
// flags (parsed later, last one wins) override it. Top-level scalars are
// global options; an object keyed by a subcommand name holds its options.
std::vector<std::string> apply_config(std::vector<std::string> args, const std::set<std::string>& subcommands) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config '" + path + "'");
  Json cfg;
  try {
    cfg = Json::parse(in);
  } catch (const std::exception& e) {
    throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config must be a JSON object");

  auto to_args = [](const Json& obj, std::vector<std::string>& out) {
    for (const auto& [k, v] : obj.items()) {
      if (v.is_object()) continue;
      const std::string flag = "--" + k;
      if (v.is_boolean()) {
        if (v.get<bool>()) out.push_back(flag);
      } else if (v.is_array()) {
        std::string joined;
        for (const auto& e : v) joined += (joined.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : e.dump());
        out.push_back(flag);
        out.push_back(joined);
      } else {
        out.push_back(flag);
        out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      }
    }
  };
  std::vector<std::string> global;
  to_args(cfg, global);
  for (const auto& [k, v] : cfg.items())
    if (v.is_object() && !subcommands.count(k)) throw UsageError("config section '" + k + "' is not a command");

  std::vector<std::string> out{args[0]};
  out.insert(out.end(), global.begin(), global.end());
  for (std::size_t i = 1; i < args.size(); ++i) {
    out.push_back(args[i]);
    if (subcommands.count(args[i]) && cfg.contains(args[i]) && cfg[args[i]].is_object()) {
      std::vector<std::string> sub;
      to_args(cfg[args[i]], sub);
      out.insert(out.end(), sub.begin(), sub.end());
    }
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Predictive-CLT credible bands and uncertainty diagnostics"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::string config_path;
  app.add_option("--rule", g.rule, "builtin:... or external:subprocess:CMD / external:tcp:HOST:PORT");
  app.add_option("--seed", g.seed);
  app.add_option("--alpha", g.alpha)->check(CLI::Range(0.0, 1.0));
  app.add_option("--estimator", g.estimator)->check(CLI::IsMember({"vn", "un", "both"}));
  app.add_option("--out", g.out, "output file, stdout when omitted");
  app.add_option("--format", g.format)->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--config", config_path, "JSON file of defaults; flags override it");
  app.add_flag("--fast", g.fast, "small budget: 30 replications, 40 grid points");
  app.add_option("--workers", g.workers, "0 = hardware concurrency");
  app.add_option("--timeout-ms", g.timeout_ms, "remote rule timeout");
  app.add_option("--max-in-flight", g.max_in_flight, "remote rule connections");
  app.add_option("--replay-log", g.replay_log, "append remote traffic to this file");

  // bands
  auto* bands = app.add_subcommand("bands", "pointwise and sup-t bands on a grid");
  DataSource bsrc;
  std::string bgrid, bkinds = "both";
  double bevent = 1.0;
  bool reliability = false;
  std::size_t bdraws = kDefaultSupTDraws;
  auto add_source = [](CLI::App* c, DataSource& d) {
    c->add_option("--data", d.csv, "CSV file with a header row");
    c->add_option("--label", d.label, "label column");
    c->add_option("--task", d.task)->check(CLI::IsMember({"binary", "multiclass", "regression"}));
    c->add_option("--thresholds", d.thresholds, "regression threshold grid")->delimiter(',');
    c->add_option("--dgp", d.dgp, "sample the context from a built-in DGP instead");
    c->add_option("--n", d.n, "DGP sample size");
    c->add_flag("--gap", d.gap, "DGP gap variant");
  };
  add_source(bands, bsrc);
  bands->add_option("--grid", bgrid, "lo:hi:count or points a;b;c with ',' between coordinates")->required();
  bands->add_option("--event", bevent, "class index, or threshold t for regression");
  bands->add_flag("--reliability", reliability, "report 1 - F(t|x)");
  bands->add_option("--kinds", bkinds)->check(CLI::IsMember({"both", "pointwise", "supt"}));
  bands->add_option("--draws", bdraws, "sup-t Monte Carlo draws");

  // entropy
  auto* entropy = app.add_subcommand("entropy", "total / aleatoric / epistemic split at query points");
  DataSource esrc;
  std::string egrid = "-10:10:21", emethod;
  add_source(entropy, esrc);
  entropy->add_option("--grid", egrid, "query points");
  entropy->add_option("--method", emethod)->check(CLI::IsMember({"beta", "dirichlet", "delta"}));

  // coverage
  auto* coverage = app.add_subcommand("coverage", "frequentist coverage study");
  std::string cdgp = "bernoulli_bins", cns = "200,500,1000", cgrid = "-10:10:100", ckinds = "both";
  std::size_t creps = 100, cdraws = 2000;
  std::optional<double> cevent;
  bool exact_oracle = false;
  coverage->add_option("--dgp", cdgp);
  coverage->add_option("--ns", cns, "comma-separated sample sizes");
  coverage->add_option("--replications", creps);
  coverage->add_option("--grid", cgrid);
  coverage->add_option("--event", cevent);
  coverage->add_option("--kinds", ckinds)->check(CLI::IsMember({"both", "pointwise", "supt"}));
  coverage->add_option("--draws", cdraws, "sup-t Monte Carlo draws");
  coverage->add_flag("--exact-oracle", exact_oracle, "also score the exact posterior band");

  // gap
  auto* gap = app.add_subcommand("gap", "bands on gap DGPs; writes data and band CSVs per n");
  std::string gdgp = "linear", gns = "200,500,1000", ggrid = "-10:10:100", gkinds = "both";
  std::optional<double> gevent;
  std::size_t gdraws = 2000;
  gap->add_option("--dgp", gdgp);
  gap->add_option("--ns", gns);
  gap->add_option("--grid", ggrid);
  gap->add_option("--event", gevent);
  gap->add_option("--kinds", gkinds)->check(CLI::IsMember({"both", "pointwise", "supt"}));
  gap->add_option("--draws", gdraws);

  // diagnose / rollout
  DiagnoseConfig dcfg;
  std::string traces_path;
  auto* diag = app.add_subcommand("diagnose", "martingale and quasi-martingale probes");
  auto add_rollout = [](CLI::App* c, RolloutConfig& r) {
    c->add_option("--n0", r.n0);
    c->add_option("--n-end", r.n_end);
    c->add_option("--x-star", r.x_star);
  };
  add_rollout(diag, dcfg.rollout);
  diag->add_option("--rollouts", dcfg.rollouts);
  diag->add_option("--m-tail", dcfg.m_tail);
  diag->add_option("--traces", traces_path, "CSV of every rollout's b_n, b'_n");

  RolloutConfig rcfg;
  auto* roll = app.add_subcommand("rollout", "one predictive-resampling sequence as CSV");
  add_rollout(roll, rcfg);

  // dgp
  auto* dgp = app.add_subcommand("dgp", "sample a built-in DGP");
  DgpSpec dspec;
  std::string dname = "linear";
  std::size_t dn = 1000;
  dgp->add_option("--name", dname)->check(CLI::IsMember([] {
    std::vector<std::string> v;
    for (const auto& [k, _] : dgp_names()) v.push_back(k);
    return v;
  }()));
  dgp->add_option("--n", dn);
  dgp->add_flag("--gap", dspec.gap);
  dgp->add_option("--noise", dspec.noise);
  dgp->add_option("--arms", dspec.arms);

  std::vector<std::string> args(argv, argv + argc);
  std::set<std::string> names;
  for (const auto* s : app.get_subcommands({})) names.insert(s->get_name());
  args = apply_config(args, names);
  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  const std::string fmt = g.format.empty() ? "csv" : g.format;

  if (*bands) {
    CsvData data = load(bsrc, g.seed);
    PipelineConfig pc;
    pc.grid = parse_grid(bgrid);
    pc.event = bevent;
    pc.reliability = reliability;
    pc.bands = band_settings(g, bkinds, bdraws);
    pc.seed = g.seed;
    const auto rule = make_rule(g, default_rule(data.table.task()));
    const auto res = run_pipeline(*rule, std::move(data), pc);
    with_output(g.out, [&](std::ostream& os) {
      if (fmt == "json") os << band_json(res.bands, res.queries, res.extrapolated).dump(2) << '\n';
      else write_labeled_bands(os, res.bands, res.queries);
    });
    return 0;
  }

  if (*entropy) {
    const CsvData data = load(esrc, g.seed);
    const auto& task = data.table.task();
    if (!task.is_classification()) throw DataError("entropy split needs a classification task");
    const auto xs = parse_grid(egrid);
    const auto rule = make_rule(g, default_rule(task));
    auto settings = band_settings(g, "pointwise", 1);
    EntropyMethod method = task.type == TaskType::Binary ? EntropyMethod::Beta : EntropyMethod::Dirichlet;
    if (emethod == "beta") method = EntropyMethod::Beta;
    if (emethod == "dirichlet") method = EntropyMethod::Dirichlet;
    if (emethod == "delta") method = EntropyMethod::Delta;
    if (task.type == TaskType::Multiclass && method != EntropyMethod::Dirichlet)
      throw UsageError("multiclass entropy uses --method dirichlet");
    std::vector<Query> qs;
    const std::size_t per = task.type == TaskType::Binary ? 1 : task.classes;
    for (const auto& x : xs) {
      if (per == 1) qs.push_back({x, 1.0});
      else
        for (std::size_t c = 0; c < per; ++c) qs.push_back({x, double(c)});
    }
    const QuerySpec q(std::move(qs));
    const auto bandsv = compute_bands(*rule, data.table, q, g.seed, settings);
    Json rows = Json::array();
    std::ostringstream csv;
    csv << "x,total,aleatoric,epistemic,method,estimator,clipped\n";
    csv.precision(12);
    for (const auto& lb : bandsv) {
      for (std::size_t i = 0; i < xs.size(); ++i) {
        std::vector<double> gv, vv;
        for (std::size_t c = 0; c < per; ++c) {
          gv.push_back(lb.band.center[i * per + c]);
          vv.push_back(lb.band.se[i * per + c] * lb.band.se[i * per + c]);
        }
        const auto sp = per == 1 ? decompose(gv[0], vv[0], method) : decompose(gv, vv);
        for (std::size_t c = 0; c < xs[i].size(); ++c) csv << (c ? ";" : "") << xs[i][c];
        csv << ',' << sp.total << ',' << sp.aleatoric << ',' << sp.epistemic << ',' << to_string(sp.method)
            << ',' << to_string(lb.estimator) << ',' << (sp.clipped ? 1 : 0) << '\n';
        rows.push_back({{"x", xs[i]},
                        {"total", sp.total},
                        {"aleatoric", sp.aleatoric},
                        {"epistemic", sp.epistemic},
                        {"method", to_string(sp.method)},
                        {"estimator", to_string(lb.estimator)},
                        {"clipped", sp.clipped}});
      }
    }
    with_output(g.out, [&](std::ostream& os) { os << (fmt == "json" ? rows.dump(2) + "\n" : csv.str()); });
    return 0;
  }

  if (*coverage) {
    CoverageConfig cc;
    cc.dgp.name = parse_dgp_name(cdgp);
    cc.ns = parse_sizes(cns);
    cc.replications = creps;
    cc.grid = flat_grid(cgrid);
    if (g.fast) {
      if (coverage->count("--replications") == 0) cc.replications = 30;
      if (coverage->count("--grid") == 0) cc.grid = linspace(-10, 10, 40);
    }
    cc.event = cevent;
    cc.bands = band_settings(g, ckinds, cdraws);
    cc.exact_oracle = exact_oracle;
    cc.seed = g.seed;
    cc.workers = g.workers;
    cc.bands.trajectory.workers = cc.bands.un.workers = 1;  // parallel over replications instead
    cc.rule = make_rule(g, default_rule(dgp_task(cc.dgp)));
    const auto rep = coverage_experiment(cc);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
    const auto rf = parse_format(g.format.empty() ? "json" : g.format);
    if (g.out.empty()) {
      if (rf == ReportFormat::Json) std::cout << to_json(rep).dump(2) << '\n';
      else write_coverage_csv(std::cout, rep);
    } else {
      emit_report(rep, g.out, rf);
    }
    return 0;
  }

  if (*gap) {
    if (g.out.empty()) throw UsageError("gap needs --out DIR");
    GapConfig gc;
    gc.dgp.name = parse_dgp_name(gdgp);
    gc.ns = parse_sizes(gns);
    gc.grid = flat_grid(ggrid);
    if (g.fast && gap->count("--grid") == 0) gc.grid = linspace(-10, 10, 40);
    gc.event = gevent;
    gc.bands = band_settings(g, gkinds, gdraws);
    gc.seed = g.seed;
    gc.rule = make_rule(g, default_rule(dgp_task(gc.dgp)));
    const auto outs = gap_experiment(gc);
    std::error_code ec;
    std::filesystem::create_directories(g.out, ec);
    if (ec) throw IoError("cannot create directory '" + g.out + "'");
    for (const auto& o : outs) {
      const std::string stem = g.out + "/" + gdgp + "_gap_n" + std::to_string(o.n);
      with_output(stem + "_data.csv", [&](std::ostream& os) { write_dataset_csv(os, o.data); });
      with_output(stem + "_bands.csv", [&](std::ostream& os) { write_labeled_bands(os, o.bands, o.queries); });
    }
    return 0;
  }

  if (*diag) {
    if (g.fast) {
      if (diag->count("--rollouts") == 0) dcfg.rollouts = 30;
      if (diag->count("--m-tail") == 0) dcfg.m_tail = 40;
    }
    dcfg.rollout.seed = g.seed;
    dcfg.workers = g.workers;
    const auto rule = make_rule(g, "builtin:beta-bernoulli?values=-1,0,1,2");
    const auto rep = diagnose(*rule, dcfg);
    with_output(g.out, [&](std::ostream& os) { os << to_json(rep).dump(2) << '\n'; });
    if (!traces_path.empty()) with_output(traces_path, [&](std::ostream& os) { write_moment_csv(os, rep.traces); });
    return 0;
  }

  if (*roll) {
    rcfg.seed = g.seed;
    const auto rule = make_rule(g, "builtin:beta-bernoulli?values=-1,0,1,2");
    const auto seq = rollout(*rule, rcfg);
    with_output(g.out, [&](std::ostream& os) { write_dataset(os, seq, fmt); });
    return 0;
  }

  if (*dgp) {
    dspec.name = parse_dgp_name(dname);
    if (dn == 0) throw DataError("--n must be positive");
    const auto t = sample_dgp(dspec, dn, g.seed);
    with_output(g.out, [&](std::ostream& os) { write_dataset(os, t, fmt); });
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const RuleError& e) {  // includes protocol, transport and timeout failures
    std::cerr << "rule error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
