#include <gtest/gtest.h>

#include <sstream>

#include "pclt/dgp.hpp"
#include "pclt/trajectory.hpp"

using namespace pclt;

namespace {

ContextTable labels_at_zero(std::vector<int> ys) {
  std::vector<Observation> rows;
  for (int y : ys) rows.push_back({{0.0}, double(y)});
  return ContextTable::validated(rows, TaskKind::binary());
}

const QuerySpec kOne({{{0.0}, 1.0}});

}  // namespace

TEST(Trajectory, TwoStepBetaBernoulli) {
  ConjugateRule rule{ConjugateConfig{}};
  TrajectoryOptions o;
  o.permute = false;
  const auto tr = build_trajectory(rule, labels_at_zero({1, 0}), kOne, 0, o);
  ASSERT_EQ(tr.ks, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_DOUBLE_EQ(tr.vectors[0].values[0], 0.5);
  EXPECT_DOUBLE_EQ(tr.vectors[1].values[0], 2.0 / 3);
  EXPECT_DOUBLE_EQ(tr.vectors[2].values[0], 0.5);
  const auto& inc = increments_matrix(tr);
  ASSERT_EQ(inc.size(), 2u);
  EXPECT_NEAR(inc[0][0], 1.0 / 6, 1e-15);
  EXPECT_NEAR(inc[1][0], -1.0 / 6, 1e-15);
  EXPECT_EQ(tr.increment_ks, (std::vector<std::size_t>{1, 2}));
}

TEST(Trajectory, ConstantRuleHasZeroIncrements) {
  ConstantRule rule(0.7);
  const auto tr = build_trajectory(rule, labels_at_zero({1, 0, 1, 1, 0}), kOne, 3);
  for (const auto& d : increments_matrix(tr)) EXPECT_EQ(d[0], 0.0);
}

TEST(Trajectory, IncrementEnvelope) {
  DgpSpec d;
  d.name = DgpName::BernoulliBins;
  d.bin_probs = {0.6};
  const auto ctx = sample_dgp(d, 500, 1);
  ConjugateRule rule{ConjugateConfig{}};
  const auto tr = build_trajectory(rule, ctx, kOne, 2);
  const auto& inc = increments_matrix(tr);
  for (std::size_t i = 0; i < inc.size(); ++i) {
    // |Delta_k| = |y_k - g_{k-1}| / (alpha + beta + k) <= 1/k
    EXPECT_LE(std::abs(inc[i][0]), 1.0 / double(tr.increment_ks[i]) + 1e-15);
  }
}

TEST(Trajectory, ShapesWithAndWithoutPrior) {
  ConjugateRule rule{ConjugateConfig{}};
  const QuerySpec q = QuerySpec::at({{0.0}, {0.0}, {0.0}}, 1.0);
  const auto ctx = labels_at_zero({1, 0, 0, 1});
  EXPECT_EQ(increments_matrix(build_trajectory(rule, ctx, q, 1)).size(), 4u);
  TrajectoryOptions o;
  o.start = TrajectoryOptions::Start::WithoutPrior;
  const auto tr = build_trajectory(rule, ctx, q, 1, o);
  ASSERT_EQ(increments_matrix(tr).size(), 3u);
  EXPECT_EQ(increments_matrix(tr)[0].size(), 3u);
  EXPECT_EQ(tr.increment_ks.front(), 2u);
}

TEST(Trajectory, CorruptionDetected) {
  ConjugateRule rule{ConjugateConfig{}};
  auto tr = build_trajectory(rule, labels_at_zero({1, 0, 1}), kOne, 1);
  tr.increments[1][0] += 1e-6;
  EXPECT_THROW(increments_matrix(tr), DataError);
  tr.increments.pop_back();
  EXPECT_THROW(increments_matrix(tr), DataError);
}

TEST(Trajectory, TooShortContext) {
  ConjugateRule rule{ConjugateConfig{}};
  EXPECT_THROW(build_trajectory(rule, labels_at_zero({1}), kOne, 0), DataError);
}

TEST(Trajectory, TerminalInvariantAcrossSeeds) {
  DgpSpec d;
  d.name = DgpName::BernoulliBins;
  const auto ctx = sample_dgp(d, 200, 4);
  ConjugateRule rule{ConjugateConfig{BetaBernoulliPrior{}, Binning::uniform(-10, 10, 4)}};
  const QuerySpec q = QuerySpec::at({{-7.0}, {-1.0}, {3.0}, {9.0}}, 1.0);
  const auto a = build_trajectory(rule, ctx, q, 1), b = build_trajectory(rule, ctx, q, 2);
  EXPECT_EQ(a.terminal(), b.terminal());
  EXPECT_NE(a.increments, b.increments);
}

TEST(Trajectory, ReproducibleAndParallelMatchesSerial) {
  DgpSpec d;
  d.name = DgpName::Linear;
  const auto ctx = sample_dgp(d, 150, 8);
  ConjugateRule rule{ConjugateConfig{NormalNormalPrior{}, Binning::uniform(-10, 10, 5)}};
  const QuerySpec q({{{0.0}, -1.0}, {{0.0}, 0.0}, {{0.0}, 1.0}});
  TrajectoryOptions serial, par;
  serial.workers = 1;
  par.workers = 4;
  const auto a = build_trajectory(rule, ctx, q, 5, serial), b = build_trajectory(rule, ctx, q, 5, par);
  EXPECT_EQ(a.increments, b.increments);
  EXPECT_EQ(a.increments, build_trajectory(rule, ctx, q, 5, serial).increments);
  // CDF monotonicity in t at every prefix.
  for (const auto& v : a.vectors) {
    EXPECT_LE(v.values[0], v.values[1]);
    EXPECT_LE(v.values[1], v.values[2]);
  }
}

TEST(Trajectory, FallbackAppliedToRulesThatWantIt) {
  // A rule that refuses single-class prefixes, like a remote model would.
  struct Picky final : PredictiveRule {
    std::string id() const override { return "picky"; }
    bool supports(const TaskKind& t) const override { return t.type == TaskType::Binary; }
    std::vector<double> predict(const TaskKind&, Rows prefix, const QuerySpec& q) const override {
      double s = 0;
      bool a = false, b = false;
      for (const auto& o : prefix) {
        s += o.y;
        (o.y > 0 ? a : b) = true;
      }
      if (!(a && b)) throw RuleError("single-class prefix");
      return std::vector<double>(q.size(), s / double(prefix.size()));
    }
  } rule;
  TrajectoryOptions o;
  o.permute = false;
  const auto tr = build_trajectory(rule, labels_at_zero({1, 1, 0, 1}), kOne, 0, o);
  ASSERT_EQ(tr.ks.front(), 1u);
  EXPECT_EQ(tr.vectors[0].values[0], 1.0);
  EXPECT_EQ(tr.vectors[1].values[0], 1.0);
  EXPECT_DOUBLE_EQ(tr.vectors[2].values[0], 2.0 / 3);
  o.fallback = FallbackPolicy::Never;
  EXPECT_THROW(build_trajectory(rule, labels_at_zero({1, 1, 0, 1}), kOne, 0, o), RuleError);
}

TEST(Trajectory, StrideKeepsTerminal) {
  ConjugateRule rule{ConjugateConfig{}};
  TrajectoryOptions o;
  o.stride = 3;
  const auto tr = build_trajectory(rule, labels_at_zero({1, 0, 1, 1, 0, 0, 1}), kOne, 0, o);
  EXPECT_EQ(tr.ks, (std::vector<std::size_t>{0, 3, 6, 7}));
  EXPECT_NO_THROW(increments_matrix(tr));
}

TEST(Trajectory, CsvDump) {
  ConjugateRule rule{ConjugateConfig{}};
  TrajectoryOptions o;
  o.permute = false;
  const auto tr = build_trajectory(rule, labels_at_zero({1, 0}), kOne, 0, o);
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "k,query_index,value,delta");
  EXPECT_NE(s.find("0,0,0.5,\n"), std::string::npos);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}
