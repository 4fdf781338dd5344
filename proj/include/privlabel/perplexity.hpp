#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "privlabel/corpus.hpp"
#include "privlabel/encoder.hpp"
#include "privlabel/tokenizer.hpp"

namespace privlabel {

class MaskedLanguageModel {
 public:
  virtual ~MaskedLanguageModel() = default;
  virtual std::string id() const = 0;
  // Content tokens only; no [CLS]/[SEP].
  virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
  // For each position p (masked on its own, all others visible), the log
  // probability of window[p]. Extended precision so that exp(-log V) comes
  // back as exactly V for a uniform model.
  virtual std::vector<long double> masked_log_probs(std::span<const TokenId> window,
                                               std::span<const std::size_t> positions) const = 0;
  virtual bool thread_safe() const { return true; }
};

// Assigns 1/V to every token.
class UniformMLM final : public MaskedLanguageModel {
 public:
  explicit UniformMLM(std::size_t vocab_size);
  std::string id() const override { return "uniform-" + std::to_string(v_); }
  std::vector<TokenId> tokenize(std::string_view text) const override;
  std::vector<long double> masked_log_probs(std::span<const TokenId> window,
                                            std::span<const std::size_t> positions) const override;

 private:
  std::size_t v_;
};

// Multiplies every true-token probability of `base` by `factor`.
class ScaledMLM final : public MaskedLanguageModel {
 public:
  ScaledMLM(std::shared_ptr<const MaskedLanguageModel> base, double factor);
  std::string id() const override;
  std::vector<TokenId> tokenize(std::string_view text) const override { return base_->tokenize(text); }
  std::vector<long double> masked_log_probs(std::span<const TokenId> window,
                                            std::span<const std::size_t> positions) const override;
  bool thread_safe() const override { return base_->thread_safe(); }

 private:
  std::shared_ptr<const MaskedLanguageModel> base_;
  long double log_factor_;
};

// MLM head of an Encoder. Tokens are whole words, so masking one position
// masks one word.
class EncoderMLM final : public MaskedLanguageModel {
 public:
  EncoderMLM(std::string id, Vocabulary vocab, Encoder encoder);
  std::string id() const override { return id_; }
  std::vector<TokenId> tokenize(std::string_view text) const override;
  std::vector<long double> masked_log_probs(std::span<const TokenId> window,
                                            std::span<const std::size_t> positions) const override;

 private:
  std::string id_;
  Vocabulary vocab_;
  Encoder encoder_;
};

// Loads an MLM from a checkpoint directory, or "uniform:<V>".
std::shared_ptr<const MaskedLanguageModel> load_mlm(const std::string& spec);

struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Windows start at 0, stride, 2*stride, ... and stop after the first one that
// reaches the end. A last window under 2 tokens is merged into the previous.
std::vector<Window> perplexity_windows(std::size_t n_tokens, std::size_t window_size,
                                       std::size_t stride);

struct PerplexityResult {
  double pseudo_perplexity = 0.0;
  double mean_nll = 0.0;
  std::size_t window_count = 0;
  std::size_t positions = 0;
};

PerplexityResult pseudo_perplexity_detail(const MaskedLanguageModel& mlm, std::string_view text,
                                          std::size_t window_size = 8, std::size_t stride = 4);
double pseudo_perplexity(const MaskedLanguageModel& mlm, std::string_view text,
                         std::size_t window_size = 8, std::size_t stride = 4);

struct PerplexityRecord {
  std::string excerpt_id;
  std::string group;  // rating name, or "general" for comparison sentences
  std::string model_id;
  double pseudo_perplexity = 0.0;
  std::size_t window_count = 0;
};

struct DistributionStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Linear-interpolation quantile of sorted values, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);
DistributionStats describe(std::vector<double> values);

struct PerplexityReport {
  std::vector<PerplexityRecord> records;
  // model id -> group -> stats
  std::map<std::string, std::map<std::string, DistributionStats>> summary;

  std::string to_csv() const;
  nlohmann::json summary_json() const;
};

PerplexityReport summarize_perplexity(std::vector<PerplexityRecord> records);

struct ComparisonSentence {
  std::string id;
  std::string text;
};

// Scores each distinct (excerpt, rating) of approved annotations under every
// model, plus optional general-policy sentences. Every rating must have at
// least one excerpt.
PerplexityReport rating_perplexity_report(
    std::span<const std::shared_ptr<const MaskedLanguageModel>> models,
    const AnnotationSet& annotations, const CaseCatalog& catalog,
    std::span<const ComparisonSentence> comparison = {}, std::size_t window_size = 8,
    std::size_t stride = 4);

}  // namespace privlabel
