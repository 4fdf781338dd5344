#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "privlabel/error.hpp"
#include "privlabel/matchers.hpp"
#include "privlabel/rng.hpp"

using namespace privlabel;

namespace {

// Returns a fixed vector per text so tests control the geometry.
class FixedEmbedder final : public SentenceEmbedder {
 public:
  std::vector<double> embed(std::string_view text) const override {
    if (text == "x") return {1.0, 0.0};
    if (text == "y") return {0.0, 1.0};
    if (text == "zero") return {0.0, 0.0};
    return {1.0, 1.0};
  }
  std::string id() const override { return "fixed"; }
};

}  // namespace

TEST(Bce, ReferenceValues) {
  EXPECT_NEAR(bce_loss(0, 0.5), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(1, 0.25), std::log(4.0), 1e-12);
  EXPECT_NEAR(bce_loss(1, 0.5), 0.6931, 1e-4);
  EXPECT_TRUE(std::isfinite(bce_loss(1, 0.0)));
  EXPECT_NEAR(bce_loss(1, 0.0), -std::log(kBceEpsilon), 1e-9);
  EXPECT_THROW(bce_loss(2, 0.5), Error);
  EXPECT_THROW(bce_loss(1, 1.5), Error);
}

TEST(Bce, LogitFormAgreesWithProbabilityForm) {
  for (double z : {-8.0, -1.0, 0.0, 0.3, 5.0}) {
    for (int y : {0, 1}) {
      EXPECT_NEAR(bce_with_logit(y, z), bce_loss(y, sigmoid(z)), 1e-9) << z << " " << y;
    }
  }
  EXPECT_TRUE(std::isfinite(bce_with_logit(1, -800.0)));
}

TEST(Calibration, HandExamples) {
  // Best F1 at t = 0.6 (tp 2, fp 0, fn 0).
  std::vector<ScoredLabel> s = {{0.9, 1}, {0.6, 1}, {0.4, 0}, {0.1, 0}};
  EXPECT_EQ(calibrate_threshold(s), 0.6);
  // Threshold 0.8 gives F1 2/3 (tp1 fp0 fn1); 0.3 gives 2/3 as well
  // (tp2 fp2 fn0 -> 4/6). Ties go to the smaller threshold.
  std::vector<ScoredLabel> t = {{0.8, 1}, {0.6, 0}, {0.5, 0}, {0.3, 1}};
  EXPECT_EQ(calibrate_threshold(t), 0.3);
  std::vector<ScoredLabel> all_pos = {{0.2, 1}, {0.7, 1}};
  EXPECT_EQ(calibrate_threshold(all_pos), 0.2);
  std::vector<ScoredLabel> all_neg = {{0.2, 0}};
  EXPECT_THROW(calibrate_threshold(all_neg), Error);
  EXPECT_THROW(calibrate_threshold({}), Error);
}

TEST(Calibration, MatchesBruteForce) {
  Rng rng(8);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<ScoredLabel> s(n);
    bool any_pos = false;
    for (auto& x : s) {
      x.score = static_cast<double>(rng.below(12)) / 11.0;  // coarse grid forces ties
      x.label = static_cast<int>(rng.below(2));
      any_pos |= x.label == 1;
    }
    if (!any_pos) s[0].label = 1;
    ASSERT_EQ(calibrate_threshold(s), oracle::best_threshold(s)) << "fixture " << k;
  }
}

TEST(Cosine, SelfAndOrthogonal) {
  auto m = cosine_matcher(std::make_shared<FixedEmbedder>());
  EXPECT_EQ(m->similarity_threshold(), 0.25);
  const auto self = m->score("x", "x");
  EXPECT_DOUBLE_EQ(self.raw, 1.0);
  EXPECT_DOUBLE_EQ(self.probability, 1.0);
  EXPECT_TRUE(m->predict(self));
  const auto orth = m->score("x", "y");
  EXPECT_DOUBLE_EQ(orth.raw, 0.0);
  EXPECT_DOUBLE_EQ(orth.probability, 0.5);
  EXPECT_FALSE(m->predict(orth));
  const auto diag = m->score("x", "w");
  EXPECT_NEAR(diag.raw, std::sqrt(0.5), 1e-12);
  EXPECT_TRUE(m->predict(diag));
  m->set_similarity_threshold(0.8);
  EXPECT_FALSE(m->predict(m->score("x", "w")));
  EXPECT_DOUBLE_EQ(m->decision_threshold(), 0.9);
}

TEST(Cosine, ZeroNormAndEmptyInput) {
  auto m = cosine_matcher(std::make_shared<FixedEmbedder>());
  try {
    m->score("x", "zero");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  }
  EXPECT_THROW(m->score("x", "  "), Error);
}

TEST(Cosine, HashingEmbedderSelfSimilarity) {
  auto m = cosine_matcher(std::make_shared<HashingEmbedder>(64));
  EXPECT_NEAR(m->score("we share data", "We share data").raw, 1.0, 1e-12);
  const auto a = HashingEmbedder(64).embed("cookies");
  EXPECT_EQ(a.size(), 64u);
}

TEST(Matcher, DecisionRule) {
  class Fixed final : public Matcher {
   public:
    Fixed() : Matcher(0.5) {}
    MatchScore score(std::string_view, std::string_view) const override { return {}; }
    std::string id() const override { return "f"; }
  } m;
  EXPECT_TRUE(m.predict({0.5, 0, false, false}));
  EXPECT_FALSE(m.predict({0.4999, 0, false, false}));
  EXPECT_FALSE(m.predict({0.9, 0, true, false}));
  m.set_decision_threshold(0.9);
  EXPECT_FALSE(m.predict({0.8, 0, false, false}));
}

TEST(CrossEncoder, DeterministicAndBounded) {
  TrainConfig cfg;
  cfg.scratch_encoder.d_model = 16;
  cfg.scratch_encoder.ffn = 16;
  cfg.scratch_encoder.layers = 1;
  cfg.scratch_encoder.max_len = 8;
  const auto base = load_base_model(cfg, {"alpha beta gamma delta epsilon zeta eta theta"});
  CrossEncoderMatcher m(base.vocab, base.encoder, 0.5, "probe");
  const auto a = m.score("alpha beta", "gamma delta epsilon zeta eta theta");
  const auto b = m.score("alpha beta", "gamma delta epsilon zeta eta theta");
  EXPECT_EQ(a.probability, b.probability);
  EXPECT_GE(a.probability, 0.0);
  EXPECT_LE(a.probability, 1.0);
  EXPECT_TRUE(a.truncated);
  EXPECT_THROW(m.score("alpha", ""), Error);
  EXPECT_EQ(TrainConfig{}.learning_rate, 1e-5);
  EXPECT_EQ(TrainConfig{}.epochs, 3u);
}
