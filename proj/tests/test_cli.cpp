#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(PCLT_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

fs::path scratch() {
  const auto d = fs::temp_directory_path() / ("pclt-cli-" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("dgp --bogus 3").code, 1);
  EXPECT_EQ(run("--alpha 1.5 dgp").code, 1);
  EXPECT_EQ(run("--estimator wn dgp").code, 1);
  EXPECT_EQ(run("bands --dgp linear").code, 1);  // --grid is required
  EXPECT_EQ(run("coverage --ns 10,x").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, DgpSampleIsDeterministic) {
  const auto a = run("--seed 3 dgp --name probit --n 50");
  ASSERT_EQ(a.code, 0);
  const auto ls = lines(a.out);
  ASSERT_EQ(ls.size(), 51u);
  EXPECT_EQ(ls[0], "x0,y");
  EXPECT_EQ(run("--seed 3 dgp --name probit --n 50").out, a.out);
  EXPECT_NE(run("--seed 4 dgp --name probit --n 50").out, a.out);

  const auto j = nlohmann::json::parse(run("--format json dgp --name spirals --n 12").out);
  EXPECT_EQ(j["task"], "multiclass");
  EXPECT_EQ(j["x"].size(), 12u);
  EXPECT_EQ(j["x"][0].size(), 2u);
}

TEST(Cli, BandsFromDgpSample) {
  const auto r = run("--seed 1 bands --dgp bernoulli_bins --n 300 --grid=-9:9:5 --draws 500");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 1u + 2 * 5);
  EXPECT_EQ(ls[0], "query_index,x,t_or_class,center,lower,upper,kind,alpha,estimator");
  EXPECT_NE(ls[1].find(",pointwise,0.05,Vn"), std::string::npos);
  EXPECT_NE(ls[6].find(",sup-t,0.05,Vn"), std::string::npos);

  const auto both = run("--estimator both --format json bands --dgp bernoulli_bins --n 300 --grid '0;5' --draws 500");
  ASSERT_EQ(both.code, 0);
  const auto j = nlohmann::json::parse(both.out);
  ASSERT_EQ(j.size(), 4u);
  EXPECT_EQ(j[2]["estimator"], "Un");
  for (const auto& b : j)
    for (const auto& p : b["points"]) {
      EXPECT_LE(p["lower"].get<double>(), p["center"].get<double>());
      EXPECT_LE(p["center"].get<double>(), p["upper"].get<double>());
    }
}

TEST(Cli, BandsFromCsvAndDataErrors) {
  const auto dir = scratch();
  {
    std::ofstream os(dir / "d.csv");
    os << "a,lab\n";
    for (int i = 0; i < 40; ++i) os << (i % 10) << ',' << (i % 3 == 0 ? "yes" : "no") << '\n';
  }
  const auto ok = run("bands --data " + (dir / "d.csv").string() + " --label lab --grid '2;-5' --kinds pointwise --format json");
  ASSERT_EQ(ok.code, 0);
  const auto j = nlohmann::json::parse(ok.out);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_FALSE(j[0]["points"][0]["extrapolated"].get<bool>());
  EXPECT_TRUE(j[0]["points"][1]["extrapolated"].get<bool>());

  EXPECT_EQ(run("bands --data /nonexistent.csv --label lab --grid 0").code, 2);
  EXPECT_EQ(run("bands --data " + (dir / "d.csv").string() + " --label nope --grid 0").code, 2);
  std::ofstream(dir / "empty.csv") << "";
  EXPECT_EQ(run("bands --data " + (dir / "empty.csv").string() + " --label lab --grid 0").code, 2);
  EXPECT_EQ(run("--out /nonexistent-dir/x.csv dgp --n 5").code, 2);
  fs::remove_all(dir);
}

TEST(Cli, RuleAndProtocolErrorsExitThree) {
  EXPECT_EQ(run("--rule builtin:nope dgp --n 5").code, 0);  // dgp does not touch the rule
  EXPECT_EQ(run("--rule builtin:nope bands --dgp probit --n 50 --grid 0").code, 3);
  EXPECT_EQ(run("--rule 'builtin:beta-bernoulli?alpha=-1' bands --dgp probit --n 50 --grid 0").code, 3);
  const std::string bridge = PCLT_FAKE_BRIDGE;
  EXPECT_EQ(run("--rule 'external:subprocess:" + bridge + " error' bands --dgp probit --n 30 --grid 0").code, 3);
  EXPECT_EQ(run("--rule 'external:subprocess:" + bridge + " badversion' bands --dgp probit --n 30 --grid 0").code, 3);
  EXPECT_EQ(run("--rule external:tcp:127.0.0.1:1 bands --dgp probit --n 30 --grid 0").code, 3);
  // Task the rule cannot serve.
  EXPECT_EQ(run("--rule builtin:normal bands --dgp probit --n 30 --grid 0").code, 3);

  const auto r = run("--rule 'external:subprocess:" + bridge + " ok' --max-in-flight 2 bands --dgp probit --n 30 "
                     "--grid='-1;1' --kinds pointwise");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(lines(r.out).size(), 3u);
}

TEST(Cli, CoverageReport) {
  const auto r = run("--fast --seed 2 coverage --ns 60 --replications 4 --grid=-9:9:6 --draws 300 --exact-oracle");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["dgp"], "bernoulli_bins");
  EXPECT_EQ(j["rows"].size(), 3u);
  for (const auto& row : j["rows"]) {
    EXPECT_GE(row["rate"].get<double>(), 0.0);
    EXPECT_LE(row["rate"].get<double>(), 1.0);
  }
  const auto dir = scratch();
  const auto csv = dir / "cov.csv";
  ASSERT_EQ(run("--seed 2 --format csv --out " + csv.string() + " coverage --ns 60,80 --replications 3 --grid=-9:9:6 "
                "--kinds pointwise")
                .code,
            0);
  const auto ls = lines(read_file(csv));
  EXPECT_EQ(ls.size(), 3u);
  EXPECT_EQ(ls[0].substr(0, 3), "dgp");
  EXPECT_EQ(run("coverage --dgp moons --replications 2").code, 2);
  fs::remove_all(dir);
}

TEST(Cli, ConfigFileAndOverrides) {
  const auto dir = scratch();
  const auto cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"seed": 5, "dgp": {"n": 10, "name": "logreg1d"}})";
  const auto from_cfg = run("--config " + cfg.string() + " dgp");
  ASSERT_EQ(from_cfg.code, 0);
  EXPECT_EQ(from_cfg.out, run("--seed 5 dgp --n 10 --name logreg1d").out);
  const auto overridden = run("--config " + cfg.string() + " --seed 6 dgp --n 12");
  EXPECT_EQ(overridden.out, run("--seed 6 dgp --n 12 --name logreg1d").out);
  EXPECT_EQ(lines(overridden.out).size(), 13u);

  std::ofstream(dir / "bad.json") << "{not json";
  EXPECT_EQ(run("--config " + (dir / "bad.json").string() + " dgp").code, 1);
  std::ofstream(dir / "unknown.json") << R"({"nosuch": {"n": 3}})";
  EXPECT_EQ(run("--config " + (dir / "unknown.json").string() + " dgp").code, 1);
  fs::remove_all(dir);
}

TEST(Cli, EntropySplit) {
  const auto r = run("--seed 4 entropy --dgp bernoulli_bins --n 400 --grid=-7.5:7.5:4");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 5u);
  EXPECT_EQ(ls[0], "x,total,aleatoric,epistemic,method,estimator,clipped");
  const auto j = nlohmann::json::parse(run("--seed 4 --format json entropy --dgp bernoulli_bins --n 400 --grid 5").out);
  ASSERT_EQ(j.size(), 1u);
  const double total = j[0]["total"], ale = j[0]["aleatoric"], epi = j[0]["epistemic"];
  EXPECT_NEAR(total, ale + epi, 1e-12);
  EXPECT_GT(epi, 0.0);
  EXPECT_LT(epi, 0.05);  // n = 400 leaves little epistemic uncertainty
  EXPECT_EQ(j[0]["method"], "beta");

  const auto cat = nlohmann::json::parse(run("--format json entropy --dgp categorical --n 300 --grid 0").out);
  EXPECT_EQ(cat[0]["method"], "dirichlet");
  EXPECT_EQ(run("entropy --dgp linear --n 50").code, 2);
  EXPECT_EQ(run("entropy --dgp categorical --n 50 --method beta").code, 1);
}

TEST(Cli, DiagnoseRolloutAndGap) {
  const auto dir = scratch();
  const auto traces = dir / "traces.csv";
  const auto d = run("--seed 1 diagnose --rollouts 3 --m-tail 10 --n-end 200 --traces " + traces.string());
  ASSERT_EQ(d.code, 0);
  const auto j = nlohmann::json::parse(d.out);
  for (const char* k : {"beta_hat", "ci", "gamma_med", "S_trace", "T_trace", "flags"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_TRUE(j["flags"].contains("qm_plausible"));
  EXPECT_EQ(lines(read_file(traces))[0], "rollout,n,b,b2");

  const auto roll = run("--seed 2 rollout --n0 10 --n-end 60");
  ASSERT_EQ(roll.code, 0);
  EXPECT_EQ(lines(roll.out).size(), 61u);
  EXPECT_EQ(run("rollout --n0 10 --n-end 5").code, 2);

  const auto out = dir / "gap";
  ASSERT_EQ(run("--out " + out.string() + " gap --ns 100,200 --grid=-6:6:5 --kinds pointwise").code, 0);
  for (const char* f : {"linear_gap_n100_data.csv", "linear_gap_n100_bands.csv", "linear_gap_n200_bands.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_EQ(lines(read_file(out / "linear_gap_n200_bands.csv")).size(), 6u);
  EXPECT_EQ(run("gap --ns 100").code, 1);  // needs --out
  fs::remove_all(dir);
}
