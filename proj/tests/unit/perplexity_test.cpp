#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "privlabel/error.hpp"
#include "privlabel/perplexity.hpp"
#include "support.hpp"

using namespace privlabel;

namespace {

EncoderMLM small_mlm(const std::vector<std::string>& texts, std::uint64_t seed,
                     Vocabulary* vocab_out = nullptr, Encoder* enc_out = nullptr) {
  auto vocab = Vocabulary::build(texts);
  EncoderConfig c;
  c.vocab_size = vocab.size();
  c.d_model = 16;
  c.heads = 2;
  c.layers = 2;
  c.ffn = 24;
  c.max_len = 16;
  c.init_std = 0.3;
  Encoder enc(c, seed);
  if (vocab_out) *vocab_out = vocab;
  if (enc_out) *enc_out = enc;
  return EncoderMLM("tiny", vocab, enc);
}

const std::vector<std::string> kTexts = {
    "we may share your personal data with our partners for advertising",
    "you can delete your account at any time",
    "cookies help us understand how the service is used by visitors every day",
    "data"};

}  // namespace

TEST(Perplexity, UniformModelGivesVocabularySize) {
  UniformMLM u(50);
  for (const char* t : {"a", "one two", "a b c d e f g h i j k l m n o p q r s"}) {
    EXPECT_DOUBLE_EQ(pseudo_perplexity(u, t), 50.0) << t;
  }
  EXPECT_THROW(pseudo_perplexity(u, "   "), Error);
}

TEST(Perplexity, WindowLayout) {
  const auto w = perplexity_windows(10, 4, 2);
  ASSERT_EQ(w.size(), 4u);
  EXPECT_EQ(w[0].begin, 0u);
  EXPECT_EQ(w[3].begin, 6u);
  EXPECT_EQ(w[3].end, 10u);
  // Short text fits one window.
  const auto one = perplexity_windows(3, 8, 4);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].end, 3u);
  // A trailing single-token window is folded into its predecessor.
  const auto merged = perplexity_windows(9, 8, 8);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].begin, 0u);
  EXPECT_EQ(merged[0].end, 9u);
  EXPECT_THROW(perplexity_windows(5, 0, 1), Error);
  EXPECT_THROW(perplexity_windows(5, 4, 0), Error);
}

TEST(Perplexity, WindowsCoverEveryToken) {
  for (std::size_t n = 1; n <= 40; ++n) {
    for (std::size_t size = 2; size <= 10; ++size) {
      for (std::size_t stride = 1; stride <= size; ++stride) {
        const auto w = perplexity_windows(n, size, stride);
        ASSERT_FALSE(w.empty());
        EXPECT_EQ(w.front().begin, 0u);
        EXPECT_EQ(w.back().end, n);
        for (std::size_t i = 1; i < w.size(); ++i) {
          EXPECT_EQ(w[i].begin, w[i - 1].begin + stride);
          EXPECT_LE(w[i].begin, w[i - 1].end);
        }
        if (w.size() > 1) EXPECT_GE(w.back().end - w.back().begin, 2u);
      }
    }
  }
}

TEST(Perplexity, ScalingProbabilitiesLowersPerplexity) {
  auto base = std::make_shared<UniformMLM>(40);
  const std::string text = "one two three four five six seven eight nine ten";
  double prev = pseudo_perplexity(*base, text);
  for (double f : {1.5, 2.0, 4.0, 10.0}) {
    ScaledMLM s(base, f);
    const double p = pseudo_perplexity(s, text);
    EXPECT_NEAR(p, 40.0 / f, 1e-9);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Perplexity, SingleWindowIndependentOfStride) {
  const auto mlm = small_mlm(kTexts, 4);
  const std::string text = "you can delete your account";
  const double a = pseudo_perplexity(mlm, text, 8, 4);
  for (std::size_t stride : {1, 2, 3, 7}) EXPECT_DOUBLE_EQ(pseudo_perplexity(mlm, text, 8, stride), a);
}

TEST(Perplexity, EncoderMatchesNaiveOracle) {
  Vocabulary vocab;
  Encoder enc;
  const auto mlm = small_mlm(kTexts, 9, &vocab, &enc);
  for (const auto& t : kTexts) {
    for (auto [w, s] : {std::pair<std::size_t, std::size_t>{8, 4}, {4, 2}, {5, 5}, {3, 1}}) {
      const double got = pseudo_perplexity(mlm, t, w, s);
      const double want = oracle::naive_pseudo_perplexity(vocab, enc, t, w, s);
      EXPECT_NEAR(got, want, 1e-6 * want) << t << " w=" << w << " s=" << s;
    }
  }
}

TEST(Perplexity, UnknownWordsUseUnkToken) {
  const auto mlm = small_mlm(kTexts, 2);
  const auto toks = mlm.tokenize("zebra data");
  ASSERT_EQ(toks.size(), 2u);
  EXPECT_EQ(toks[0], Vocabulary::kUnk);
  EXPECT_TRUE(std::isfinite(pseudo_perplexity(mlm, "zebra data")));
}

TEST(Perplexity, QuantilesAndDescribe) {
  const std::vector<double> v = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 4.0);
  const auto d = describe({5, 1, 3});
  EXPECT_EQ(d.count, 3u);
  EXPECT_DOUBLE_EQ(d.mean, 3.0);
  EXPECT_DOUBLE_EQ(d.median, 3.0);
  EXPECT_DOUBLE_EQ(d.min, 1.0);
  EXPECT_DOUBLE_EQ(d.max, 5.0);
  EXPECT_THROW(describe({}), Error);
}

TEST(Perplexity, SummaryIgnoresRecordOrder) {
  std::vector<PerplexityRecord> recs;
  Rng rng(3);
  for (int i = 0; i < 40; ++i) {
    recs.push_back({"e" + std::to_string(i), std::string(to_string(kAllRatings[i % 4])),
                    i % 3 ? "m1" : "m2", 1.0 + rng.uniform() * 100.0, 1});
  }
  const auto a = summarize_perplexity(recs);
  rng.shuffle(std::span(recs));
  const auto b = summarize_perplexity(recs);
  EXPECT_EQ(a.summary_json(), b.summary_json());
  EXPECT_EQ(a.to_csv().substr(0, a.to_csv().find('\n')),
            "excerpt_id,rating,model_id,pseudo_perplexity");
}

TEST(Perplexity, RatingReportNeedsEveryRating) {
  auto corpus = testsupport::make_corpus({2, 2, 2, 2});
  std::vector<std::shared_ptr<const MaskedLanguageModel>> models = {
      std::make_shared<UniformMLM>(30), std::make_shared<UniformMLM>(60)};
  const std::vector<ComparisonSentence> general = {{"g1", "we care about privacy"}};
  const auto rep = rating_perplexity_report(models, corpus.annotations, corpus.catalog, general);
  EXPECT_EQ(rep.records.size(), 2u * 9u);
  EXPECT_EQ(rep.summary.at("uniform-30").at("general").count, 1u);
  EXPECT_DOUBLE_EQ(rep.summary.at("uniform-60").at("blocker").mean, 60.0);
  auto partial = testsupport::make_corpus({2, 2, 2});
  EXPECT_THROW(rating_perplexity_report(models, partial.annotations, partial.catalog), Error);
  EXPECT_THROW(rating_perplexity_report({}, corpus.annotations, corpus.catalog), Error);
}

TEST(Perplexity, LoadMlmSpecs) {
  EXPECT_EQ(load_mlm("uniform:50")->id(), "uniform-50");
  EXPECT_THROW(load_mlm("/definitely/not/here"), Error);
}
