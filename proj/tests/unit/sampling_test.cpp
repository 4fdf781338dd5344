#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "privlabel/error.hpp"
#include "privlabel/sampling.hpp"
#include "support.hpp"

using namespace privlabel;
using testsupport::make_corpus;

namespace {

std::size_t count_origin(const TrainingSet& s, PairOrigin o) {
  return static_cast<std::size_t>(
      std::count_if(s.pairs.begin(), s.pairs.end(), [&](auto& p) { return p.origin == o; }));
}

}  // namespace

TEST(Sampling, RatioContractOnRoomyCorpus) {
  const auto c = make_corpus({2, 3, 8, 8, 8});
  for (std::uint32_t ratio : kSupportedRatios) {
    const auto set = sample_training_set(c.annotations.approved(), c.annotations, c.clusters,
                                         {Strategy::kRandom, ratio, 4});
    std::map<std::string, std::size_t> pos, neg;
    for (const auto& p : set.pairs) (p.label ? pos : neg)[p.case_id] += 1;
    if (ratio <= 2) {
      EXPECT_TRUE(set.warnings.empty());
      for (const auto& [id, n] : pos) EXPECT_EQ(neg[id], ratio * n) << id;
    }
    EXPECT_EQ(set.positives(), 29u);
  }
}

TEST(Sampling, WithinClusterFirstThenTopUp) {
  // c0 (2 positives) shares a cluster with c1 (3 excerpts). Ratio 3 needs 6
  // negatives: all 3 siblings, then 3 from outside.
  const auto c = make_corpus({2, 3, 10}, {{0, 1}});
  const auto set = sample_training_set(c.annotations.approved(), c.annotations, c.clusters,
                                       {Strategy::kCluster, 3, 9});
  std::size_t within = 0, random = 0;
  for (const auto& p : set.pairs) {
    if (p.case_id != "c0" || p.label) continue;
    (p.origin == PairOrigin::kWithinClusterNegative ? within : random) += 1;
  }
  EXPECT_EQ(within, 3u);
  EXPECT_EQ(random, 3u);
  EXPECT_EQ(oracle::check_cluster_sample(c.annotations.approved(), c.annotations, c.clusters, 3, set),
            "");
}

TEST(Sampling, RandomEqualsClusterWithoutClusters) {
  const auto c = make_corpus({3, 1, 4, 1, 5});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rs = sample_training_set(c.annotations.approved(), c.annotations, c.clusters,
                                        {Strategy::kRandom, 2, seed});
    const auto cbs = sample_training_set(c.annotations.approved(), c.annotations, c.clusters,
                                         {Strategy::kCluster, 2, seed});
    ASSERT_EQ(rs.pairs, cbs.pairs);
  }
}

TEST(Sampling, SameSeedSameOutputDifferentSeedDiffers) {
  const auto c = make_corpus({4, 4, 4, 4}, {{0, 1}});
  const SamplingConfig cfg{Strategy::kCluster, 1, 17};
  const auto a = sample_training_set(c.annotations.approved(), c.annotations, c.clusters, cfg);
  const auto b = sample_training_set(c.annotations.approved(), c.annotations, c.clusters, cfg);
  EXPECT_EQ(a.pairs, b.pairs);
  const auto d = sample_training_set(c.annotations.approved(), c.annotations, c.clusters,
                                     {Strategy::kCluster, 1, 18});
  EXPECT_NE(a.pairs, d.pairs);
}

TEST(Sampling, ShortPoolWarnsInsteadOfDuplicating) {
  const auto c = make_corpus({5, 1});
  const auto set = sample_training_set(c.annotations.approved(), c.annotations, c.clusters,
                                       {Strategy::kRandom, 3, 0});
  ASSERT_FALSE(set.warnings.empty());
  const auto& w = set.warnings.front();
  EXPECT_EQ(w.case_id, "c0");
  EXPECT_EQ(w.requested, 15u);
  EXPECT_EQ(w.produced, 1u);
}

TEST(Sampling, NegativesNeverHitPositivesOutsidePartition) {
  // The same excerpt text annotated to two cases: it must never be a
  // negative for either.
  std::vector<Case> cases = {{"a", "A", Rating::kGood, {}}, {"b", "B", Rating::kBad, {}}};
  CaseCatalog cat(cases);
  const auto anns = ingest_annotations({{"a", "s", "shared text", true},
                                        {"b", "s", "shared text", true},
                                        {"a", "s", "only a", true},
                                        {"b", "s", "only b", true}},
                                       cat);
  const std::vector<Annotation> part = {anns.approved()[0], anns.approved()[2],
                                        anns.approved()[3]};
  ClusterSet none;
  const auto set = sample_training_set(part, anns, none, {Strategy::kRandom, 5, 1});
  for (const auto& p : set.pairs) {
    if (p.label == 0) EXPECT_FALSE(anns.is_positive(p.case_id, p.excerpt_id));
  }
}

TEST(Sampling, ZeroRatioRejected) {
  const auto c = make_corpus({2, 2});
  EXPECT_THROW(sample_training_set(c.annotations.approved(), c.annotations, c.clusters,
                                   {Strategy::kRandom, 0, 0}),
               Error);
}

TEST(Sampling, DuplicateKeysRejected) {
  LabeledPair p{"c", "e", "t", 1, PairOrigin::kPositive};
  EXPECT_THROW(build_training_set({p, p}, {}, 0), Error);
  LabeledPair n{"c", "e", "t", 0, PairOrigin::kRandomNegative};
  try {
    build_training_set({p}, {n}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDuplicate);
  }
}

TEST(Sampling, EvalPairsAreWithinClusterOnly) {
  const auto c = make_corpus({3, 1, 10, 10}, {{0, 1}});
  const auto set = build_eval_pairs(c.annotations.approved(), c.annotations, c.clusters, 5);
  for (const auto& p : set.pairs) {
    if (p.case_id == "c0" && p.label == 0) {
      EXPECT_EQ(p.origin, PairOrigin::kWithinClusterNegative);
    }
  }
  EXPECT_EQ(count_origin(set, PairOrigin::kWithinClusterNegative), 1u + 1u);
}

TEST(Sampling, JsonlRoundTrip) {
  const auto c = make_corpus({2, 2, 2});
  const auto set = sample_training_set(c.annotations.approved(), c.annotations, c.clusters,
                                       {Strategy::kRandom, 1, 3});
  const auto back = training_set_from_jsonl(training_set_to_jsonl(set, c.catalog));
  EXPECT_EQ(back, set.pairs);
  EXPECT_THROW(training_set_from_jsonl("{\"case_id\": 1}\n"), Error);
  const auto m = sampling_manifest(set, {Strategy::kRandom, 1, 3});
  EXPECT_EQ(m["counts"]["positive"], 6);
  EXPECT_EQ(m["total"], set.pairs.size());
}

TEST(Sampling, PropertiesHoldAcrossSeedsAndShapes) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<std::size_t> sizes;
    for (int i = 0; i < 6; ++i) sizes.push_back(1 + rng.below(10));
    const auto c = make_corpus(sizes, {{0, 1, 2}, {3, 4}});
    for (std::uint32_t ratio : kSupportedRatios) {
      const auto set = sample_training_set(c.annotations.approved(), c.annotations, c.clusters,
                                           {Strategy::kCluster, ratio, seed});
      ASSERT_EQ(oracle::check_cluster_sample(c.annotations.approved(), c.annotations, c.clusters,
                                             ratio, set),
                "")
          << "seed " << seed << " ratio " << ratio;
    }
  }
}
