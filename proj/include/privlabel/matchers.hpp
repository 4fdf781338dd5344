#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "privlabel/checkpoint.hpp"
#include "privlabel/corpus.hpp"
#include "privlabel/encoder.hpp"
#include "privlabel/sampling.hpp"

namespace privlabel {

struct MatchScore {
  double probability = 0.0;
  // Matcher-specific raw value (cosine similarity, logit).
  double raw = 0.0;
  bool abstained = false;
  bool truncated = false;
};

class Matcher {
 public:
  virtual ~Matcher() = default;

  // Both texts must be non-empty after trimming.
  virtual MatchScore score(std::string_view case_title, std::string_view excerpt) const = 0;
  virtual std::string id() const = 0;

  double decision_threshold() const { return threshold_; }
  void set_decision_threshold(double t) { threshold_ = t; }

  // Label 1 iff probability >= decision_threshold. Abstentions are never a
  // match.
  virtual bool predict(const MatchScore& s) const {
    return !s.abstained && s.probability >= threshold_;
  }

 protected:
  explicit Matcher(double threshold) : threshold_(threshold) {}
  static void check_inputs(std::string_view case_title, std::string_view excerpt);

 private:
  double threshold_;
};

// (case title, excerpt text, gold label) after resolving ids.
struct TextPair {
  std::string case_id;
  std::string excerpt_id;
  std::string case_title;
  std::string excerpt;
  int label = 0;
};

std::vector<TextPair> to_text_pairs(std::span<const LabeledPair> pairs, const CaseCatalog& catalog);

// -- loss -------------------------------------------------------------------

inline constexpr double kBceEpsilon = 1e-7;

// -[y log p + (1 - y) log(1 - p)] with p clamped to [eps, 1 - eps].
double bce_loss(int y, double p);
// Same objective from a logit (numerically stable form used in training).
double bce_with_logit(int y, double logit);

// -- cross-encoder ------------------------------------------------------------

struct TrainConfig {
  // Path to an MLM checkpoint directory, or "scratch" for random init.
  std::string base_model_identifier = "scratch";
  double learning_rate = 1e-5;
  std::uint32_t epochs = 3;
  std::uint32_t batch_size = 16;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  double max_grad_norm = 1.0;
  bool parallel = true;
  // Used only for "scratch" bases.
  EncoderConfig scratch_encoder;
  std::size_t scratch_min_count = 1;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j);
};

class CrossEncoderMatcher final : public Matcher {
 public:
  CrossEncoderMatcher(Vocabulary vocab, Encoder encoder, double threshold, std::string id);
  static std::shared_ptr<CrossEncoderMatcher> from_checkpoint(const Checkpoint& ck,
                                                              std::string id);

  MatchScore score(std::string_view case_title, std::string_view excerpt) const override;
  std::string id() const override { return id_; }

  const Vocabulary& vocab() const { return vocab_; }
  const Encoder& encoder() const { return encoder_; }

 private:
  Vocabulary vocab_;
  Encoder encoder_;
  std::string id_;
};

struct EpochStats {
  std::uint32_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainedMatcher {
  std::shared_ptr<CrossEncoderMatcher> matcher;
  std::vector<EpochStats> history;
  Checkpoint checkpoint;
};

struct BaseModel {
  std::string identifier;
  Vocabulary vocab;
  Encoder encoder;
};

// "scratch" builds a vocabulary from `texts` and a randomly initialized
// encoder; anything else is loaded as an MLM checkpoint directory.
BaseModel load_base_model(const TrainConfig& config, const std::vector<std::string>& texts);

// Fine-tunes a binary head on "[CLS] case [SEP] excerpt [SEP]" with binary
// cross-entropy and Adam. Throws on an empty or single-class training set
// and on a non-finite loss.
TrainedMatcher train_cross_encoder(std::span<const TextPair> training,
                                   std::span<const TextPair> validation,
                                   const TrainConfig& config);
TrainedMatcher train_cross_encoder(std::span<const TextPair> training,
                                   std::span<const TextPair> validation, const TrainConfig& config,
                                   BaseModel base);

// Mean BCE of the matcher's probabilities (for reporting).
double mean_bce(const Matcher& m, std::span<const TextPair> pairs);

MatchScore score_pair(const Matcher& m, std::string_view case_title, std::string_view excerpt);

// -- masked-LM pretraining ------------------------------------------------------

struct PretrainConfig {
  EncoderConfig encoder;
  double learning_rate = 1e-3;
  std::uint32_t epochs = 5;
  std::uint32_t batch_size = 16;
  double mask_prob = 0.15;
  std::size_t min_count = 1;
  std::uint64_t seed = 0;
  bool parallel = true;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_loss;
};

// BERT-style MLM: 15% of tokens selected; 80% -> [MASK], 10% -> random
// token, 10% unchanged. Long texts are cut into max_len - 2 token chunks.
PretrainResult pretrain_mlm(const std::vector<std::string>& texts, const PretrainConfig& config);

// -- embedding baseline -----------------------------------------------------------

class SentenceEmbedder {
 public:
  virtual ~SentenceEmbedder() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  virtual std::string id() const = 0;
};

// Signed feature hashing of lower-cased word unigrams.
class HashingEmbedder final : public SentenceEmbedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 256) : dim_(dim) {}
  std::vector<double> embed(std::string_view text) const override;
  std::string id() const override { return "hashing-" + std::to_string(dim_); }

 private:
  std::size_t dim_;
};

// Mean-pooled final hidden states of an encoder checkpoint.
class EncoderEmbedder final : public SentenceEmbedder {
 public:
  EncoderEmbedder(Vocabulary vocab, Encoder encoder, std::string id)
      : vocab_(std::move(vocab)), encoder_(std::move(encoder)), id_(std::move(id)) {}
  std::vector<double> embed(std::string_view text) const override;
  std::string id() const override { return id_; }

 private:
  Vocabulary vocab_;
  Encoder encoder_;
  std::string id_;
};

inline constexpr double kDefaultCosineThreshold = 0.25;

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// probability = (similarity + 1) / 2; match iff similarity >= threshold.
class CosineMatcher final : public Matcher {
 public:
  CosineMatcher(std::shared_ptr<const SentenceEmbedder> embedder,
                double similarity_threshold = kDefaultCosineThreshold);

  MatchScore score(std::string_view case_title, std::string_view excerpt) const override;
  bool predict(const MatchScore& s) const override;
  std::string id() const override { return "cosine/" + embedder_->id(); }

  double similarity_threshold() const { return similarity_threshold_; }
  void set_similarity_threshold(double t);

 private:
  std::shared_ptr<const SentenceEmbedder> embedder_;
  double similarity_threshold_;
};

std::shared_ptr<CosineMatcher> cosine_matcher(std::shared_ptr<const SentenceEmbedder> embedder,
                                              double threshold = kDefaultCosineThreshold);

struct ScoredLabel {
  double score = 0.0;
  int label = 0;
};

// Candidate thresholds are the observed scores; returns the one maximizing
// class-1 F1 (predict 1 iff score >= t), ties to the smallest threshold.
// All-negative input has no meaningful optimum and throws.
double calibrate_threshold(std::span<const ScoredLabel> scored);

// -- prompt-based baseline ---------------------------------------------------------

class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  // Throws Error(kTransport) on failures worth retrying.
  virtual std::string complete(const std::string& prompt, double temperature) = 0;
};

struct PromptTemplate {
  // Renders the instruction, optional two worked examples (shots == 2), and
  // the Title/Quote block for the pair.
  static std::string render(std::string_view title, std::string_view quote, int shots);
};

enum class ReplyKind { kMatch, kNoMatch, kMalformed };
ReplyKind parse_reply(std::string_view reply);

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_multiplier = 2.0;
};

class PromptMatcher final : public Matcher {
 public:
  PromptMatcher(std::shared_ptr<CompletionClient> client, int shots,
                std::size_t max_concurrency = 4, RetryPolicy retry = {});

  MatchScore score(std::string_view case_title, std::string_view excerpt) const override;
  std::string id() const override { return "prompt-" + std::to_string(shots_) + "shot"; }

  std::size_t abstentions() const;
  std::vector<std::string> malformed_replies() const;

 private:
  std::shared_ptr<CompletionClient> client_;
  int shots_;
  RetryPolicy retry_;
  mutable std::counting_semaphore<64> slots_;
  mutable std::mutex log_mu_;
  mutable std::vector<std::string> malformed_;
};

std::shared_ptr<PromptMatcher> prompt_matcher(std::shared_ptr<CompletionClient> client, int shots);

// Chat-completions client. Key from the environment variable named by
// `api_key_env` (default OPENAI_API_KEY); base URL from OPENAI_BASE_URL or
// https://api.openai.com.
class OpenAiClient final : public CompletionClient {
 public:
  struct Options {
    std::string base_url;
    std::string model = "gpt-4";
    std::string api_key_env = "OPENAI_API_KEY";
    std::chrono::seconds timeout{60};
  };
  explicit OpenAiClient(Options options);
  std::string complete(const std::string& prompt, double temperature) override;

 private:
  Options options_;
  std::string api_key_;
};

}  // namespace privlabel
