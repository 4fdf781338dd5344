#include "privlabel/matchers.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "privlabel/error.hpp"
#include "privlabel/rng.hpp"
#include "privlabel/text.hpp"

namespace privlabel {

void Matcher::check_inputs(std::string_view case_title, std::string_view excerpt) {
  if (text::is_blank(case_title)) throw Error(ErrorKind::kPrecondition, "empty case title");
  if (text::is_blank(excerpt)) throw Error(ErrorKind::kPrecondition, "empty excerpt text");
}

std::vector<TextPair> to_text_pairs(std::span<const LabeledPair> pairs, const CaseCatalog& catalog) {
  std::vector<TextPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back(TextPair{p.case_id, p.excerpt_id, catalog.at(p.case_id).title, p.excerpt_text,
                           p.label});
  }
  return out;
}

MatchScore score_pair(const Matcher& m, std::string_view case_title, std::string_view excerpt) {
  return m.score(case_title, excerpt);
}

// ---------------------------------------------------------------------------
// Loss

double bce_loss(int y, double p) {
  if (y != 0 && y != 1) throw Error(ErrorKind::kPrecondition, "bce_loss: label must be 0 or 1");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::kPrecondition, "bce_loss: p outside [0,1]");
  const double q = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
  return -(y * std::log(q) + (1 - y) * std::log(1.0 - q));
}

double bce_with_logit(int y, double logit) {
  // softplus(z) - y z
  const double softplus = logit > 0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
  return softplus - y * logit;
}

// ---------------------------------------------------------------------------
// Train config

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kValidation, "learning_rate must be > 0");
  if (epochs < 1) throw Error(ErrorKind::kValidation, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::kValidation, "batch_size must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::kValidation, "threshold must lie in [0, 1]");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"base_model_identifier", base_model_identifier},
          {"learning_rate", learning_rate},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"seed", seed},
          {"threshold", threshold},
          {"max_grad_norm", max_grad_norm},
          {"scratch_encoder", scratch_encoder.to_json()},
          {"scratch_min_count", scratch_min_count}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.base_model_identifier = j.value("base_model_identifier", c.base_model_identifier);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.threshold = j.value("threshold", c.threshold);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.scratch_min_count = j.value("scratch_min_count", c.scratch_min_count);
  if (j.contains("scratch_encoder")) {
    auto e = j["scratch_encoder"];
    if (!e.contains("vocab_size")) e["vocab_size"] = 0;
    c.scratch_encoder = EncoderConfig::from_json(e);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Cross-encoder

CrossEncoderMatcher::CrossEncoderMatcher(Vocabulary vocab, Encoder encoder, double threshold,
                                         std::string id)
    : Matcher(threshold), vocab_(std::move(vocab)), encoder_(std::move(encoder)), id_(std::move(id)) {}

std::shared_ptr<CrossEncoderMatcher> CrossEncoderMatcher::from_checkpoint(const Checkpoint& ck,
                                                                          std::string id) {
  return std::make_shared<CrossEncoderMatcher>(ck.vocab, ck.encoder, ck.threshold, std::move(id));
}

MatchScore CrossEncoderMatcher::score(std::string_view case_title, std::string_view excerpt) const {
  check_inputs(case_title, excerpt);
  const auto input = encode_pair(vocab_, case_title, excerpt, encoder_.config().max_len);
  Trace tr;
  const double logit = encoder_.classifier_logit(input, tr);
  return MatchScore{sigmoid(logit), logit, false, input.truncated};
}

BaseModel load_base_model(const TrainConfig& config, const std::vector<std::string>& texts) {
  BaseModel base;
  base.identifier = config.base_model_identifier;
  if (config.base_model_identifier == "scratch") {
    base.vocab = Vocabulary::build(texts, config.scratch_min_count);
    EncoderConfig ec = config.scratch_encoder;
    ec.vocab_size = base.vocab.size();
    base.encoder = Encoder(ec, config.seed ^ 0x5eedULL);
    return base;
  }
  auto ck = load_checkpoint(config.base_model_identifier);
  base.vocab = std::move(ck.vocab);
  base.encoder = std::move(ck.encoder);
  return base;
}

namespace {

struct PreparedPair {
  EncodedInput input;
  int label = 0;
};

std::vector<PreparedPair> prepare(std::span<const TextPair> pairs, const Vocabulary& vocab,
                                  std::size_t max_len) {
  std::vector<PreparedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.label != 0 && p.label != 1) throw Error(ErrorKind::kValidation, "label must be 0 or 1");
    out.push_back({encode_pair(vocab, p.case_title, p.excerpt, max_len), p.label});
  }
  return out;
}

double mean_loss(const Encoder& enc, const std::vector<PreparedPair>& pairs, bool parallel) {
  if (pairs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> losses(pairs.size());
  const auto n = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (std::int64_t i = 0; i < n; ++i) {
    Trace tr;
    losses[i] = bce_with_logit(pairs[i].label, enc.classifier_logit(pairs[i].input, tr));
  }
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

// One optimizer step over `batch`; per-sample gradients are written to
// separate buffers and reduced in index order, so the parallel and serial
// paths produce identical updates.
template <typename SampleGrad>
double batch_step(std::size_t batch, std::size_t n_params, bool parallel, std::vector<double>& bufs,
                  std::vector<double>& grad, Adam& adam, std::span<double> params,
                  SampleGrad&& sample_grad) {
  bufs.assign(batch * n_params, 0.0);
  std::vector<double> losses(batch);
  const auto b = static_cast<std::int64_t>(batch);
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::int64_t i = 0; i < b; ++i) {
    losses[i] = sample_grad(static_cast<std::size_t>(i),
                            std::span<double>(bufs.data() + i * n_params, n_params));
  }
  grad.resize(n_params);
  if (parallel) {
    kernels::omp::sum_buffers(bufs.data(), batch, n_params, grad.data());
  } else {
    kernels::serial::sum_buffers(bufs.data(), batch, n_params, grad.data());
  }
  const double total = std::accumulate(losses.begin(), losses.end(), 0.0);
  if (!std::isfinite(total)) throw Error(ErrorKind::kNumeric, "non-finite training loss");
  adam.step(params, grad);
  return total;
}

}  // namespace

TrainedMatcher train_cross_encoder(std::span<const TextPair> training,
                                   std::span<const TextPair> validation,
                                   const TrainConfig& config) {
  std::vector<std::string> texts;
  for (const auto& p : training) {
    texts.push_back(p.case_title);
    texts.push_back(p.excerpt);
  }
  return train_cross_encoder(training, validation, config, load_base_model(config, texts));
}

TrainedMatcher train_cross_encoder(std::span<const TextPair> training,
                                   std::span<const TextPair> validation, const TrainConfig& config,
                                   BaseModel base) {
  config.validate();
  if (training.empty()) throw Error(ErrorKind::kPrecondition, "empty training set");
  const bool has_pos = std::any_of(training.begin(), training.end(), [](auto& p) { return p.label == 1; });
  const bool has_neg = std::any_of(training.begin(), training.end(), [](auto& p) { return p.label == 0; });
  if (!has_pos || !has_neg) {
    throw Error(ErrorKind::kPrecondition, "training set must contain both labels");
  }
  Encoder enc = std::move(base.encoder);
  enc.reset_classifier_head(config.seed ^ 0xc1a55ULL);
  const std::size_t max_len = enc.config().max_len;
  const auto train = prepare(training, base.vocab, max_len);
  const auto valid = prepare(validation, base.vocab, max_len);

  const std::size_t n_params = enc.param_count();
  Adam adam(n_params, AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.max_grad_norm});
  std::vector<double> bufs, grad;
  std::vector<std::size_t> order(train.size());
  std::vector<EpochStats> history;

  for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::derived(config.seed, "epoch-" + std::to_string(epoch));
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t batch = std::min<std::size_t>(config.batch_size, order.size() - start);
      const double inv_b = 1.0 / static_cast<double>(batch);
      epoch_loss += batch_step(
          batch, n_params, config.parallel, bufs, grad, adam, enc.params(),
          [&](std::size_t i, std::span<double> g) {
            const auto& ex = train[order[start + i]];
            Trace tr;
            const double logit = enc.classifier_logit(ex.input, tr);
            enc.backward_classifier(tr, (sigmoid(logit) - ex.label) * inv_b, g);
            return bce_with_logit(ex.label, logit);
          });
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = epoch_loss / static_cast<double>(train.size());
    st.validation_loss = mean_loss(enc, valid, config.parallel);
    history.push_back(st);
  }

  TrainedMatcher out;
  out.history = history;
  out.checkpoint.kind = "cross_encoder";
  out.checkpoint.vocab = base.vocab;
  out.checkpoint.encoder = enc;
  out.checkpoint.base_model_identifier = base.identifier;
  out.checkpoint.threshold = config.threshold;
  out.checkpoint.train_config = config.to_json();
  for (const auto& h : history) {
    out.checkpoint.history.push_back(
        {{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"validation_loss", h.validation_loss}});
  }
  out.matcher = std::make_shared<CrossEncoderMatcher>(std::move(base.vocab), std::move(enc),
                                                      config.threshold,
                                                      "cross-encoder/" + base.identifier);
  return out;
}

double mean_bce(const Matcher& m, std::span<const TextPair> pairs) {
  if (pairs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& p : pairs) total += bce_loss(p.label, m.score(p.case_title, p.excerpt).probability);
  return total / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// MLM pretraining

PretrainResult pretrain_mlm(const std::vector<std::string>& texts, const PretrainConfig& config) {
  if (texts.empty()) throw Error(ErrorKind::kPrecondition, "pretraining corpus is empty");
  Vocabulary vocab = Vocabulary::build(texts, config.min_count);
  EncoderConfig ec = config.encoder;
  ec.vocab_size = vocab.size();
  Encoder enc(ec, config.seed);
  const std::size_t chunk = ec.max_len - 2;
  std::vector<std::vector<TokenId>> chunks;
  for (const auto& t : texts) {
    const auto ids = vocab.encode(t);
    for (std::size_t s = 0; s < ids.size(); s += chunk) {
      chunks.emplace_back(ids.begin() + s, ids.begin() + std::min(ids.size(), s + chunk));
    }
  }
  if (chunks.empty()) throw Error(ErrorKind::kPrecondition, "pretraining corpus has no tokens");

  const std::size_t n_params = enc.param_count();
  Adam adam(n_params, AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8, 1.0});
  std::vector<double> bufs, grad;
  std::vector<std::size_t> order(chunks.size());
  PretrainResult result;
  for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::derived(config.seed, "mlm-epoch-" + std::to_string(epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t batch = std::min<std::size_t>(config.batch_size, order.size() - start);
      const double inv_b = 1.0 / static_cast<double>(batch);
      epoch_loss += batch_step(
          batch, n_params, config.parallel, bufs, grad, adam, enc.params(),
          [&](std::size_t i, std::span<double> g) {
            const std::size_t ci = order[start + i];
            const auto& toks = chunks[ci];
            Rng rng = Rng::derived(config.seed, "mask-" + std::to_string(epoch) + "-" + std::to_string(ci));
            auto input = encode_single(toks, ec.max_len);
            std::vector<std::size_t> positions;
            std::vector<TokenId> targets;
            for (std::size_t t = 0; t < toks.size(); ++t) {
              if (rng.uniform() < config.mask_prob) positions.push_back(t + 1);
            }
            if (positions.empty()) positions.push_back(1 + rng.below(toks.size()));
            for (auto pos : positions) {
              targets.push_back(input.tokens[pos]);
              const double r = rng.uniform();
              if (r < 0.8) {
                input.tokens[pos] = Vocabulary::kMask;
              } else if (r < 0.9) {
                input.tokens[pos] = static_cast<TokenId>(
                    Vocabulary::kFirstRegular + rng.below(vocab.size() - Vocabulary::kFirstRegular));
              }
            }
            Trace tr;
            const auto logp = enc.mlm_log_probs(input, positions, targets, tr);
            const double w = inv_b / static_cast<double>(positions.size());
            std::vector<double> weights(positions.size(), w);
            enc.backward_mlm(tr, weights, g);
            double nll = 0.0;
            for (double lp : logp) nll -= lp;
            return nll / static_cast<double>(positions.size());
          });
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(chunks.size()));
  }
  result.checkpoint.kind = "mlm";
  result.checkpoint.vocab = std::move(vocab);
  result.checkpoint.encoder = std::move(enc);
  result.checkpoint.base_model_identifier = "scratch";
  result.checkpoint.train_config = {{"learning_rate", config.learning_rate},
                                    {"epochs", config.epochs},
                                    {"batch_size", config.batch_size},
                                    {"mask_prob", config.mask_prob},
                                    {"min_count", config.min_count},
                                    {"seed", config.seed}};
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    result.checkpoint.history.push_back({{"epoch", e + 1}, {"train_loss", result.epoch_loss[e]}});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Embedding baseline

std::vector<double> HashingEmbedder::embed(std::string_view text) const {
  std::vector<double> v(dim_, 0.0);
  for (const auto& w : Vocabulary::split_words(text)) {
    const std::uint64_t h = text::fnv1a64(w);
    v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
  }
  return v;
}

std::vector<double> EncoderEmbedder::embed(std::string_view text) const {
  const auto ids = vocab_.encode(text);
  return encoder_.mean_pooled(encode_single(ids, encoder_.config().max_len));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kPrecondition, "embedding dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::kNumeric, "zero-norm embedding");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

CosineMatcher::CosineMatcher(std::shared_ptr<const SentenceEmbedder> embedder,
                             double similarity_threshold)
    : Matcher((similarity_threshold + 1.0) / 2.0),
      embedder_(std::move(embedder)),
      similarity_threshold_(similarity_threshold) {}

void CosineMatcher::set_similarity_threshold(double t) {
  similarity_threshold_ = t;
  set_decision_threshold((t + 1.0) / 2.0);
}

MatchScore CosineMatcher::score(std::string_view case_title, std::string_view excerpt) const {
  check_inputs(case_title, excerpt);
  const double sim = cosine_similarity(embedder_->embed(case_title), embedder_->embed(excerpt));
  return MatchScore{std::clamp((sim + 1.0) / 2.0, 0.0, 1.0), sim, false, false};
}

bool CosineMatcher::predict(const MatchScore& s) const {
  return !s.abstained && s.raw >= similarity_threshold_;
}

std::shared_ptr<CosineMatcher> cosine_matcher(std::shared_ptr<const SentenceEmbedder> embedder,
                                              double threshold) {
  return std::make_shared<CosineMatcher>(std::move(embedder), threshold);
}

double calibrate_threshold(std::span<const ScoredLabel> scored) {
  if (scored.empty()) throw Error(ErrorKind::kPrecondition, "no validation scores");
  std::vector<ScoredLabel> sorted(scored.begin(), scored.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });
  const auto positives = static_cast<std::size_t>(
      std::count_if(sorted.begin(), sorted.end(), [](const auto& s) { return s.label == 1; }));
  if (positives == 0) {
    throw Error(ErrorKind::kPrecondition, "validation set has no positive pairs");
  }
  // Walk thresholds from high to low; at each distinct score t the predicted
  // set is everything with score >= t. F1 = 2tp / (2tp + fp + fn) is
  // compared exactly as a fraction, and `>=` keeps the lowest tied t.
  std::size_t tp = 0, fp = 0;
  std::size_t best_num = 0, best_den = 1;
  double best_t = sorted.front().score;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == t) {
      (sorted[i].label == 1 ? tp : fp) += 1;
      ++i;
    }
    const std::size_t num = 2 * tp;
    const std::size_t den = 2 * tp + fp + (positives - tp);
    if (num * best_den >= best_num * den) {
      best_num = num;
      best_den = den;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace privlabel
