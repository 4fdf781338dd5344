#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. They trade speed for obviousness and never call the
// library routine they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "privlabel/corpus.hpp"
#include "privlabel/encoder.hpp"
#include "privlabel/evaluation.hpp"
#include "privlabel/matchers.hpp"
#include "privlabel/perplexity.hpp"
#include "privlabel/sampling.hpp"

namespace oracle {

using namespace privlabel;

struct ClassTruth {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t support = 0;
};

// Per-class counts by direct enumeration of (gold, predicted) pairs.
inline ClassTruth class_truth(const std::vector<int>& gold, const std::vector<int>& pred, int cls) {
  ClassTruth t;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool g = gold[i] == cls;
    const bool p = pred[i] == cls;
    if (g && p) ++t.tp;
    if (!g && p) ++t.fp;
    if (g && !p) ++t.fn;
    if (g) ++t.support;
  }
  if (t.tp + t.fp > 0) t.precision = double(t.tp) / double(t.tp + t.fp);
  if (t.support > 0) t.recall = double(t.tp) / double(t.support);
  if (t.precision + t.recall > 0) {
    t.f1 = 2.0 * t.precision * t.recall / (t.precision + t.recall);
  }
  return t;
}

inline bool report_matches(const ClassReport& r, const std::vector<int>& gold,
                           const std::vector<int>& pred, std::string* why = nullptr) {
  for (int c = 0; c < 2; ++c) {
    const auto t = class_truth(gold, pred, c);
    const auto& m = r[c];
    if (m.precision != t.precision || m.recall != t.recall || m.f1 != t.f1 ||
        m.support != t.support) {
      if (why) {
        *why = "class " + std::to_string(c) + ": P " + std::to_string(m.precision) + " vs " +
               std::to_string(t.precision) + ", R " + std::to_string(m.recall) + " vs " +
               std::to_string(t.recall) + ", F1 " + std::to_string(m.f1) + " vs " +
               std::to_string(t.f1);
      }
      return false;
    }
  }
  const auto t1 = class_truth(gold, pred, 1);
  const auto t0 = class_truth(gold, pred, 0);
  return r.confusion.tp == t1.tp && r.confusion.fp == t1.fp && r.confusion.fn == t1.fn &&
         r.confusion.tn == t0.tp;
}

// Tries every observed score as the threshold; keeps the best class-1 F1 and
// the smallest threshold among ties.
inline double best_threshold(const std::vector<ScoredLabel>& scored) {
  std::set<double> candidates;
  for (const auto& s : scored) candidates.insert(s.score);
  double best_f1 = -1.0;
  double best_t = 0.0;
  for (double t : candidates) {  // ascending
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& s : scored) {
      const bool p = s.score >= t;
      if (p && s.label == 1) ++tp;
      if (p && s.label == 0) ++fp;
      if (!p && s.label == 1) ++fn;
    }
    const double f1 = double(2 * tp) / double(2 * tp + fp + fn);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

// Masks each position of each window with its own forward pass.
inline double naive_pseudo_perplexity(const Vocabulary& vocab, const Encoder& enc,
                                      const std::string& text, std::size_t window,
                                      std::size_t stride) {
  const auto tokens = vocab.encode(text);
  const std::size_t n = tokens.size();
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = std::min(start + window, n);
    spans.push_back({start, end});
    if (end == n) break;
    start += stride;
  }
  if (spans.size() > 1 && spans.back().second - spans.back().first < 2) {
    spans[spans.size() - 2].second = spans.back().second;
    spans.pop_back();
  }
  double nll = 0.0;
  std::size_t count = 0;
  for (const auto& [b, e] : spans) {
    for (std::size_t i = b; i < e; ++i) {
      EncodedInput in;
      in.tokens.push_back(Vocabulary::kCls);
      for (std::size_t k = b; k < e; ++k) in.tokens.push_back(k == i ? Vocabulary::kMask : tokens[k]);
      in.tokens.push_back(Vocabulary::kSep);
      in.segments.assign(in.tokens.size(), 0);
      Trace tr;
      const std::size_t pos[1] = {i - b + 1};
      const TokenId target[1] = {tokens[i]};
      nll -= enc.mlm_log_probs(in, pos, target, tr)[0];
      ++count;
    }
  }
  return std::exp(nll / double(count));
}

// Property check of one cluster-based sample against the partition it was
// drawn from. Returns an empty string when every property holds.
inline std::string check_cluster_sample(const std::vector<Annotation>& partition,
                                        const AnnotationSet& corpus, const ClusterSet& clusters,
                                        std::uint32_t ratio, const TrainingSet& set) {
  // Views into the partition, corpus and set, all of which outlive this call.
  std::map<std::string_view, std::size_t> positives;
  std::map<std::string_view, std::set<std::string_view>> cases_of;
  for (const auto& a : partition) {
    ++positives[a.case_id];
    cases_of[a.excerpt_id].insert(a.case_id);
  }
  using Key = std::pair<std::string_view, std::string_view>;
  std::set<Key> approved;
  for (const auto& a : corpus.approved()) approved.emplace(a.case_id, a.excerpt_id);
  const auto is_positive = [&](std::string_view c, std::string_view e) {
    return approved.count({c, e}) > 0;
  };
  std::map<std::string_view, std::vector<const LabeledPair*>> negatives;
  std::set<Key> keys;
  for (const auto& p : set.pairs) {
    if (!keys.emplace(p.case_id, p.excerpt_id).second) return "duplicate pair " + p.key();
    if (p.label == 0) negatives[p.case_id].push_back(&p);
  }
  std::set<std::string_view> warned;
  for (const auto& w : set.warnings) warned.insert(w.case_id);

  for (const auto& [case_view, n_pos] : positives) {
    const std::string case_id(case_view);
    const auto sib = clusters.siblings(case_id);
    const std::set<std::string_view> siblings(sib.begin(), sib.end());
    std::size_t sibling_pool = 0, pool = 0;
    for (const auto& [excerpt_id, cases] : cases_of) {
      if (is_positive(case_id, excerpt_id)) continue;
      ++pool;
      if (std::any_of(cases.begin(), cases.end(), [&](auto& c) { return siblings.count(c); })) {
        ++sibling_pool;
      }
    }
    const std::size_t need = ratio * n_pos;
    static const std::vector<const LabeledPair*> kNone;
    const auto found = negatives.find(case_id);
    const auto& negs = found == negatives.end() ? kNone : found->second;
    std::size_t within = 0;
    for (const auto* p : negs) {
      if (is_positive(case_id, p->excerpt_id)) return "negative collides with a positive";
      const auto& cs = cases_of.at(p->excerpt_id);
      const bool is_sib =
          std::any_of(cs.begin(), cs.end(), [&](auto& c) { return siblings.count(c); });
      if ((p->origin == PairOrigin::kWithinClusterNegative) != is_sib) {
        return "origin tag disagrees with sibling membership for " + case_id;
      }
      within += is_sib;
    }
    const std::size_t expected = std::min(need, pool);
    if (negs.size() != expected) {
      return "case " + case_id + ": " + std::to_string(negs.size()) + " negatives, expected " +
             std::to_string(expected);
    }
    if ((expected < need) != (warned.count(case_id) > 0)) return "warning mismatch for " + case_id;
    if (within != std::min(need, sibling_pool)) {
      return "case " + case_id + ": " + std::to_string(within) +
             " within-cluster negatives, expected " + std::to_string(std::min(need, sibling_pool));
    }
  }
  for (const auto& [case_id, _] : negatives) {
    if (!positives.count(case_id)) return "negatives for a case without positives";
  }
  return "";
}

}  // namespace oracle
