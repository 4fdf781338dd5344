#include <gtest/gtest.h>

#include "oracles.hpp"
#include "privlabel/error.hpp"
#include "privlabel/evaluation.hpp"
#include "privlabel/rng.hpp"
#include "support.hpp"

using namespace privlabel;

namespace {

// Predicts from a per-excerpt table and abstains on excerpts starting "?".
class ScriptedMatcher final : public Matcher {
 public:
  ScriptedMatcher() : Matcher(0.5) {}
  MatchScore score(std::string_view, std::string_view excerpt) const override {
    if (excerpt.front() == '?') return MatchScore{0.0, 0.0, true, false};
    const double p = excerpt.back() == '1' ? 0.9 : 0.1;
    return MatchScore{p, p, false, false};
  }
  std::string id() const override { return "scripted"; }
};

}  // namespace

TEST(Metrics, HandComputedExample) {
  const std::vector<int> gold = {1, 1, 1, 0, 0, 0, 0};
  const std::vector<int> pred = {1, 1, 0, 1, 0, 0, 0};
  const auto r = report_from_predictions(gold, pred);
  EXPECT_EQ(r.confusion, (Confusion{2, 1, 1, 3}));
  EXPECT_DOUBLE_EQ(r[1].precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r[1].recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r[0].precision, 0.75);
  EXPECT_DOUBLE_EQ(r[0].recall, 0.75);
  EXPECT_EQ(r[1].support, 3u);
  EXPECT_EQ(r[0].support, 4u);
}

TEST(Metrics, ZeroDivisionReportsZeroAndFlags) {
  const std::vector<int> gold = {0, 0, 0};
  const std::vector<int> pred = {0, 0, 0};
  const auto r = report_from_predictions(gold, pred);
  EXPECT_EQ(r[1].precision, 0.0);
  EXPECT_TRUE(r[1].precision_undefined);
  EXPECT_TRUE(r[1].recall_undefined);
  EXPECT_EQ(r[1].f1, 0.0);
  EXPECT_EQ(r[0].f1, 1.0);
}

TEST(Metrics, MatchesOracleOnRandomFixtures) {
  Rng rng(11);
  for (int k = 0; k < 300; ++k) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<int> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = static_cast<int>(rng.below(2));
      pred[i] = static_cast<int>(rng.below(2));
    }
    std::string why;
    ASSERT_TRUE(oracle::report_matches(report_from_predictions(gold, pred), gold, pred, &why)) << why;
  }
}

TEST(Metrics, RejectsBadInput) {
  const std::vector<int> a = {0, 1}, b = {0};
  EXPECT_THROW(report_from_predictions(a, b), Error);
  const std::vector<int> c = {0, 2};
  EXPECT_THROW(report_from_predictions(a, c), Error);
}

TEST(Evaluate, ExcludesAbstentionsAndCountsThem) {
  ScriptedMatcher m;
  std::vector<TextPair> pairs = {
      {"c", "e1", "t", "x 1", 1}, {"c", "e2", "t", "x 0", 1}, {"c", "e3", "t", "? 1", 1},
      {"c", "e4", "t", "x 0", 0}, {"c", "e5", "t", "x 1", 0}};
  const auto r = evaluate(m, pairs, "probe");
  EXPECT_EQ(r.abstained, 1u);
  EXPECT_EQ(r.confusion, (Confusion{1, 1, 1, 1}));
  EXPECT_EQ(r.set_name, "probe");
  EXPECT_EQ(r.model_id, "scripted");
  EXPECT_THROW(evaluate(m, std::vector<TextPair>{}), Error);
}

TEST(Evaluate, SerialAndParallelAgree) {
  testsupport::OverlapMatcher m;
  const auto corpus = testsupport::make_separable_corpus(5, 200, 0, 0);
  const auto a = evaluate(m, corpus.train, "t", kernels::Exec::kSerial);
  const auto b = evaluate(m, corpus.train, "t", kernels::Exec::kParallel);
  EXPECT_EQ(a.confusion, b.confusion);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(Evaluate, PartitionedNeedsBothSets) {
  ScriptedMatcher m;
  std::vector<TextPair> one = {{"c", "e", "t", "x 1", 1}};
  EXPECT_THROW(evaluate_partitioned(m, one, {}), Error);
  const auto r = evaluate_partitioned(m, one, one);
  EXPECT_EQ(r.standalone.set_name, "standalone");
  EXPECT_EQ(r.contrasting.set_name, "contrasting");
}

TEST(Aggregate, MeanAndSampleStd) {
  std::vector<ClassReport> reps(3);
  const double f1s[] = {0.5, 0.7, 0.9};
  for (int i = 0; i < 3; ++i) {
    reps[i].set_name = "contrasting";
    reps[i].classes[0].f1 = f1s[i];
  }
  const auto m = aggregate_runs(reps);
  EXPECT_NEAR(m.classes[0].f1.mean, 0.7, 1e-15);
  EXPECT_NEAR(m.classes[0].f1.stddev, 0.2, 1e-15);
  EXPECT_EQ(m.runs, 3u);
}

TEST(Aggregate, PermutationInvariant) {
  Rng rng(2);
  std::vector<ClassReport> reps(5);
  for (auto& r : reps) {
    r.set_name = "s";
    for (auto& c : r.classes) {
      c.precision = rng.uniform();
      c.recall = rng.uniform();
      c.f1 = rng.uniform();
      c.support = rng.below(100);
    }
  }
  const auto base = aggregate_runs(reps).to_json();
  for (int k = 0; k < 20; ++k) {
    rng.shuffle(std::span<ClassReport>(reps));
    ASSERT_EQ(aggregate_runs(reps).to_json(), base);
  }
}

TEST(Aggregate, RejectsMixedSetsAndSingleRun) {
  std::vector<ClassReport> reps(2);
  reps[0].set_name = "a";
  reps[1].set_name = "b";
  EXPECT_THROW(aggregate_runs(reps), Error);
  EXPECT_THROW(aggregate_runs(std::span<const ClassReport>(reps.data(), 1)), Error);
}

TEST(Sweep, OneRowPerRatioStrategyClassSet) {
  const Strategy strategies[] = {Strategy::kRandom, Strategy::kCluster};
  const std::uint32_t ratios[] = {1, 3};
  int calls = 0;
  const auto cells = sweep_ratios(strategies, ratios, 2, [&](Strategy, std::uint32_t r, int run) {
    ++calls;
    PartitionedReport p;
    p.standalone.set_name = "standalone";
    p.contrasting.set_name = "contrasting";
    p.contrasting.classes[0].f1 = 0.1 * r + 0.01 * run;
    return p;
  });
  EXPECT_EQ(calls, 8);
  ASSERT_EQ(cells.size(), 4u);
  const auto csv = sweep_to_csv(cells);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 2 * 2);
  EXPECT_NE(csv.find("1:3,CBS,0,contrasting"), std::string::npos);
  EXPECT_NEAR(cells[2].contrasting.classes[0].f1.mean, 0.305, 1e-12);
  const auto j = sweep_to_json(cells, {{"seed", 1}});
  EXPECT_EQ(j["cells"].size(), 4u);
}
