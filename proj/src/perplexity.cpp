#include "privlabel/perplexity.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "privlabel/checkpoint.hpp"
#include "privlabel/error.hpp"
#include "privlabel/text.hpp"

namespace privlabel {

UniformMLM::UniformMLM(std::size_t vocab_size) : v_(vocab_size) {
  if (v_ < 2) throw Error(ErrorKind::kValidation, "uniform MLM needs a vocabulary of at least 2");
}

std::vector<TokenId> UniformMLM::tokenize(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& w : Vocabulary::split_words(text)) {
    out.push_back(static_cast<TokenId>(text::fnv1a64(w) % v_));
  }
  return out;
}

std::vector<long double> UniformMLM::masked_log_probs(std::span<const TokenId>,
                                                      std::span<const std::size_t> positions) const {
  return std::vector<long double>(positions.size(), -std::log(static_cast<long double>(v_)));
}

ScaledMLM::ScaledMLM(std::shared_ptr<const MaskedLanguageModel> base, double factor)
    : base_(std::move(base)) {
  if (!base_) throw Error(ErrorKind::kPrecondition, "scaled MLM needs a base model");
  if (!(factor > 0.0)) throw Error(ErrorKind::kValidation, "scale factor must be positive");
  log_factor_ = std::log(static_cast<long double>(factor));
}

std::string ScaledMLM::id() const {
  std::ostringstream s;
  s << base_->id() << "*" << static_cast<double>(std::exp(log_factor_));
  return s.str();
}

std::vector<long double> ScaledMLM::masked_log_probs(std::span<const TokenId> window,
                                                     std::span<const std::size_t> positions) const {
  auto lp = base_->masked_log_probs(window, positions);
  for (long double& x : lp) x += log_factor_;
  return lp;
}

EncoderMLM::EncoderMLM(std::string id, Vocabulary vocab, Encoder encoder)
    : id_(std::move(id)), vocab_(std::move(vocab)), encoder_(std::move(encoder)) {
  if (vocab_.size() != encoder_.config().vocab_size) {
    throw Error(ErrorKind::kValidation, "vocabulary and encoder sizes differ");
  }
  encoder_.set_exec(kernels::Exec::kSerial);
}

std::vector<TokenId> EncoderMLM::tokenize(std::string_view text) const {
  return vocab_.encode(text);
}

std::vector<long double> EncoderMLM::masked_log_probs(std::span<const TokenId> window,
                                                      std::span<const std::size_t> positions) const {
  if (window.size() + 2 > encoder_.config().max_len) {
    throw Error(ErrorKind::kPrecondition, "window longer than the encoder's max length");
  }
  const EncodedInput base = encode_single(window, encoder_.config().max_len);
  std::vector<long double> out(positions.size());
  const auto n = static_cast<std::int64_t>(positions.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    EncodedInput in = base;
    const std::size_t pos = positions[i] + 1;  // skip [CLS]
    const TokenId target = in.tokens.at(pos);
    in.tokens[pos] = Vocabulary::kMask;
    Trace tr;
    const std::size_t p[1] = {pos};
    const TokenId t[1] = {target};
    out[i] = encoder_.mlm_log_probs(in, p, t, tr)[0];
  }
  return out;
}

std::shared_ptr<const MaskedLanguageModel> load_mlm(const std::string& spec) {
  if (spec.rfind("uniform:", 0) == 0) {
    try {
      return std::make_shared<UniformMLM>(std::stoul(spec.substr(8)));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kValidation, "bad uniform model spec '" + spec + "'");
    }
  }
  if (!is_checkpoint_dir(spec)) {
    throw Error(ErrorKind::kNotFound, "no model checkpoint at '" + spec + "'");
  }
  Checkpoint ck = load_checkpoint(spec);
  const auto name = std::filesystem::path(spec).filename().string();
  return std::make_shared<EncoderMLM>(name, std::move(ck.vocab), std::move(ck.encoder));
}

std::vector<Window> perplexity_windows(std::size_t n, std::size_t window_size, std::size_t stride) {
  if (window_size == 0 || stride == 0) {
    throw Error(ErrorKind::kValidation, "window size and stride must be positive");
  }
  std::vector<Window> out;
  if (n == 0) return out;
  for (std::size_t start = 0;; start += stride) {
    const std::size_t end = std::min(start + window_size, n);
    out.push_back({start, end});
    if (end == n) break;
  }
  if (out.size() > 1 && out.back().end - out.back().begin < 2) {
    const std::size_t end = out.back().end;
    out.pop_back();
    out.back().end = end;
  }
  return out;
}

PerplexityResult pseudo_perplexity_detail(const MaskedLanguageModel& mlm, std::string_view text,
                                          std::size_t window_size, std::size_t stride) {
  const auto tokens = mlm.tokenize(text);
  if (tokens.empty()) throw Error(ErrorKind::kPrecondition, "text has no tokens");
  const auto windows = perplexity_windows(tokens.size(), window_size, stride);
  // Neumaier-compensated sum in extended precision.
  long double nll = 0.0L, carry = 0.0L;
  std::size_t count = 0;
  for (const auto& w : windows) {
    const std::span<const TokenId> win(tokens.data() + w.begin, w.end - w.begin);
    std::vector<std::size_t> positions(win.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    const auto lp = mlm.masked_log_probs(win, positions);
    for (long double x : lp) {
      if (!std::isfinite(x)) throw Error(ErrorKind::kNumeric, "non-finite log probability");
      const long double t = nll - x;
      carry += std::fabs(nll) >= std::fabs(x) ? (nll - t) - x : (-x - t) + nll;
      nll = t;
    }
    count += lp.size();
  }
  PerplexityResult r;
  const long double mean = (nll + carry) / static_cast<long double>(count);
  r.mean_nll = static_cast<double>(mean);
  r.pseudo_perplexity = static_cast<double>(std::exp(mean));
  r.window_count = windows.size();
  r.positions = count;
  return r;
}

double pseudo_perplexity(const MaskedLanguageModel& mlm, std::string_view text,
                         std::size_t window_size, std::size_t stride) {
  return pseudo_perplexity_detail(mlm, text, window_size, stride).pseudo_perplexity;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::kPrecondition, "quantile of an empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

DistributionStats describe(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::kPrecondition, "empty group");
  std::sort(values.begin(), values.end());
  DistributionStats s;
  s.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.median = quantile_sorted(values, 0.5);
  s.q1 = quantile_sorted(values, 0.25);
  s.q3 = quantile_sorted(values, 0.75);
  s.min = values.front();
  s.max = values.back();
  return s;
}

PerplexityReport summarize_perplexity(std::vector<PerplexityRecord> records) {
  PerplexityReport rep;
  std::map<std::string, std::map<std::string, std::vector<double>>> groups;
  for (const auto& r : records) groups[r.model_id][r.group].push_back(r.pseudo_perplexity);
  for (auto& [model, by_group] : groups) {
    for (auto& [group, values] : by_group) rep.summary[model][group] = describe(std::move(values));
  }
  rep.records = std::move(records);
  return rep;
}

std::string PerplexityReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "excerpt_id,rating,model_id,pseudo_perplexity\n";
  for (const auto& r : records) {
    out << r.excerpt_id << ',' << r.group << ',' << r.model_id << ',' << r.pseudo_perplexity
        << '\n';
  }
  return out.str();
}

nlohmann::json PerplexityReport::summary_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [model, by_group] : summary) {
    for (const auto& [group, s] : by_group) {
      out.push_back({{"model_id", model},
                     {"rating", group},
                     {"count", s.count},
                     {"mean", s.mean},
                     {"median", s.median},
                     {"q1", s.q1},
                     {"q3", s.q3},
                     {"min", s.min},
                     {"max", s.max}});
    }
  }
  return out;
}

PerplexityReport rating_perplexity_report(
    std::span<const std::shared_ptr<const MaskedLanguageModel>> models,
    const AnnotationSet& annotations, const CaseCatalog& catalog,
    std::span<const ComparisonSentence> comparison, std::size_t window_size, std::size_t stride) {
  if (models.empty()) throw Error(ErrorKind::kPrecondition, "no models given");
  struct Item {
    std::string id;
    std::string group;
    const std::string* text;
  };
  std::vector<Item> items;
  std::set<std::pair<std::string, Rating>> seen;
  std::map<Rating, std::size_t> per_rating;
  for (const auto& a : annotations.approved()) {
    const Rating r = catalog.at(a.case_id).rating;
    if (!seen.emplace(a.excerpt_id, r).second) continue;
    items.push_back({a.excerpt_id, std::string(to_string(r)), &annotations.excerpt(a.excerpt_id).text});
    ++per_rating[r];
  }
  for (Rating r : kAllRatings) {
    if (per_rating[r] == 0) {
      throw Error(ErrorKind::kPrecondition,
                  "rating group '" + std::string(to_string(r)) + "' has no excerpts");
    }
  }
  for (const auto& c : comparison) items.push_back({c.id, "general", &c.text});

  std::vector<PerplexityRecord> records(items.size() * models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& mlm = *models[m];
    const auto n = static_cast<std::int64_t>(items.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4) if (mlm.thread_safe())
    for (std::int64_t i = 0; i < n; ++i) {
      try {
        const auto res = pseudo_perplexity_detail(mlm, *items[i].text, window_size, stride);
        records[m * items.size() + i] = {items[i].id, items[i].group, mlm.id(),
                                         res.pseudo_perplexity, res.window_count};
      } catch (...) {
#pragma omp critical(privlabel_ppl_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  return summarize_perplexity(std::move(records));
}

}  // namespace privlabel
