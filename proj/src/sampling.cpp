#include "privlabel/sampling.hpp"

#include <algorithm>
#include <set>

#include "privlabel/error.hpp"
#include "privlabel/rng.hpp"

namespace privlabel {

std::string_view to_string(Strategy s) { return s == Strategy::kRandom ? "rs" : "cbs"; }

Strategy parse_strategy(std::string_view name) {
  if (name == "rs" || name == "RS") return Strategy::kRandom;
  if (name == "cbs" || name == "CBS") return Strategy::kCluster;
  throw Error(ErrorKind::kValidation, "unknown sampling strategy '" + std::string(name) + "'");
}

std::string_view to_string(PairOrigin o) {
  switch (o) {
    case PairOrigin::kPositive: return "positive";
    case PairOrigin::kWithinClusterNegative: return "within_cluster_negative";
    case PairOrigin::kRandomNegative: return "random_negative";
  }
  return "random_negative";
}

PairOrigin parse_origin(std::string_view name) {
  for (auto o : {PairOrigin::kPositive, PairOrigin::kWithinClusterNegative,
                 PairOrigin::kRandomNegative}) {
    if (to_string(o) == name) return o;
  }
  throw Error(ErrorKind::kValidation, "unknown pair origin '" + std::string(name) + "'");
}

void SamplingConfig::validate() const {
  if (ratio < 1) {
    throw Error(ErrorKind::kValidation, "sampling ratio must be >= 1, got " + std::to_string(ratio));
  }
}

namespace {

struct PartitionIndex {
  // Positive counts per case, in case-id order.
  std::map<std::string, std::size_t> positives_per_case;
  // Distinct excerpts in the partition, sorted, with the cases they are
  // annotated to inside the partition.
  std::map<std::string, std::set<std::string>> cases_per_excerpt;
};

PartitionIndex index_partition(std::span<const Annotation> partition) {
  PartitionIndex idx;
  for (const auto& a : partition) {
    if (!a.approved) continue;
    ++idx.positives_per_case[a.case_id];
    idx.cases_per_excerpt[a.excerpt_id].insert(a.case_id);
  }
  return idx;
}

LabeledPair make_negative(const std::string& case_id, const std::string& excerpt_id,
                          const AnnotationSet& corpus, PairOrigin origin) {
  return LabeledPair{case_id, excerpt_id, corpus.excerpt(excerpt_id).text, 0, origin};
}

// Draws up to `need` excerpts from `pool` (already filtered) in a seeded
// uniform order. Seeding is skipped when there is nothing to permute.
using Pool = std::vector<const std::string*>;

Pool draw(Pool pool, std::size_t need, std::uint64_t seed, std::string_view label) {
  if (pool.size() > 1) Rng::derived(seed, label).shuffle(std::span<const std::string*>(pool));
  if (pool.size() > need) pool.resize(need);
  return pool;
}

// Excerpts in the partition annotated to some case other than `case_id` and
// never annotated (anywhere in the corpus) to `case_id`.
Pool other_case_pool(const PartitionIndex& idx, const std::string& case_id,
                     const AnnotationSet& corpus) {
  Pool pool;
  pool.reserve(idx.cases_per_excerpt.size());
  const auto* own = corpus.positive_excerpts(case_id);
  for (const auto& [excerpt_id, cases] : idx.cases_per_excerpt) {
    const bool has_other = cases.size() > 1 || !cases.count(case_id);
    if (has_other && !(own && own->count(excerpt_id))) pool.push_back(&excerpt_id);
  }
  return pool;
}

void sample_random_for_case(const PartitionIndex& idx, const std::string& case_id,
                            std::size_t need, const AnnotationSet& corpus, std::uint64_t seed,
                            NegativeSample& out) {
  auto chosen = draw(other_case_pool(idx, case_id, corpus), need, seed, case_id);
  for (const auto* e : chosen) {
    out.pairs.push_back(make_negative(case_id, *e, corpus, PairOrigin::kRandomNegative));
  }
  if (chosen.size() < need) out.warnings.push_back({case_id, need, chosen.size()});
}

}  // namespace

std::vector<LabeledPair> positive_pairs(std::span<const Annotation> partition,
                                        const AnnotationSet& corpus) {
  std::vector<LabeledPair> out;
  out.reserve(partition.size());
  for (const auto& a : partition) {
    if (!a.approved) continue;
    out.push_back(
        LabeledPair{a.case_id, a.excerpt_id, corpus.excerpt(a.excerpt_id).text, 1,
                    PairOrigin::kPositive});
  }
  return out;
}

NegativeSample sample_random_negatives(std::span<const Annotation> partition,
                                       const AnnotationSet& corpus, std::uint32_t ratio,
                                       std::uint64_t seed) {
  SamplingConfig{Strategy::kRandom, ratio, seed}.validate();
  if (partition.empty()) throw Error(ErrorKind::kPrecondition, "empty partition");
  const auto idx = index_partition(partition);
  NegativeSample out;
  for (const auto& [case_id, n_pos] : idx.positives_per_case) {
    sample_random_for_case(idx, case_id, ratio * n_pos, corpus, seed, out);
  }
  return out;
}

NegativeSample sample_cluster_negatives(std::span<const Annotation> partition,
                                        const AnnotationSet& corpus, const ClusterSet& clusters,
                                        std::uint32_t ratio, std::uint64_t seed, bool top_up) {
  SamplingConfig{Strategy::kCluster, ratio, seed}.validate();
  if (partition.empty()) throw Error(ErrorKind::kPrecondition, "empty partition");
  const auto idx = index_partition(partition);
  NegativeSample out;
  for (const auto& [case_id, n_pos] : idx.positives_per_case) {
    const std::size_t need = ratio * n_pos;
    const auto siblings_list = clusters.siblings(case_id);
    if (siblings_list.empty()) {
      sample_random_for_case(idx, case_id, need, corpus, seed, out);
      continue;
    }
    const std::set<std::string> siblings(siblings_list.begin(), siblings_list.end());
    Pool within;
    Pool outside;
    for (const auto* e : other_case_pool(idx, case_id, corpus)) {
      const auto& cases = idx.cases_per_excerpt.at(*e);
      const bool sibling_excerpt = std::any_of(cases.begin(), cases.end(),
                                               [&](const auto& c) { return siblings.count(c) > 0; });
      (sibling_excerpt ? within : outside).push_back(e);
    }
    auto chosen = draw(std::move(within), need, seed, case_id + "\x1f" "within");
    for (const auto* e : chosen) {
      out.pairs.push_back(make_negative(case_id, *e, corpus, PairOrigin::kWithinClusterNegative));
    }
    std::size_t produced = chosen.size();
    if (top_up && produced < need) {
      auto extra = draw(std::move(outside), need - produced, seed, case_id);
      for (const auto* e : extra) {
        out.pairs.push_back(make_negative(case_id, *e, corpus, PairOrigin::kRandomNegative));
      }
      produced += extra.size();
    }
    if (produced < need) out.warnings.push_back({case_id, need, produced});
  }
  return out;
}

std::size_t TrainingSet::positives() const {
  auto it = counts.find(PairOrigin::kPositive);
  return it == counts.end() ? 0 : it->second;
}

std::size_t TrainingSet::negatives() const { return pairs.size() - positives(); }

TrainingSet build_training_set(std::vector<LabeledPair> positives,
                               std::vector<LabeledPair> negatives, std::uint64_t seed) {
  TrainingSet set;
  set.seed = seed;
  // Views into set.pairs, which is reserved up front so they stay valid.
  std::set<std::pair<std::string_view, std::string_view>> keys;
  set.pairs.reserve(positives.size() + negatives.size());
  const auto add = [&](std::vector<LabeledPair>& src, bool positive) {
    for (auto& p : src) {
      if ((p.label == 1) != positive || (p.origin == PairOrigin::kPositive) != positive) {
        throw Error(ErrorKind::kValidation, "pair label/origin mismatch for case '" + p.case_id + "'");
      }
      ++set.counts[p.origin];
      const auto& kept = set.pairs.emplace_back(std::move(p));
      if (!keys.emplace(kept.case_id, kept.excerpt_id).second) {
        throw Error(ErrorKind::kDuplicate, "pair (" + kept.case_id + ", " + kept.excerpt_id +
                                               ") appears more than once");
      }
    }
  };
  add(positives, true);
  add(negatives, false);
  Rng rng(seed);
  rng.shuffle(std::span<LabeledPair>(set.pairs));
  return set;
}

TrainingSet sample_training_set(std::span<const Annotation> partition, const AnnotationSet& corpus,
                                const ClusterSet& clusters, const SamplingConfig& config) {
  config.validate();
  auto negatives = config.strategy == Strategy::kRandom
                       ? sample_random_negatives(partition, corpus, config.ratio, config.seed)
                       : sample_cluster_negatives(partition, corpus, clusters, config.ratio,
                                                  config.seed);
  auto set = build_training_set(positive_pairs(partition, corpus), std::move(negatives.pairs),
                                config.seed);
  set.warnings = std::move(negatives.warnings);
  return set;
}

TrainingSet build_eval_pairs(std::span<const Annotation> partition, const AnnotationSet& corpus,
                             const ClusterSet& clusters, std::uint64_t seed) {
  auto negatives = sample_cluster_negatives(partition, corpus, clusters, 1, seed, false);
  auto set = build_training_set(positive_pairs(partition, corpus), std::move(negatives.pairs), seed);
  set.warnings = std::move(negatives.warnings);
  return set;
}

std::string training_set_to_jsonl(const TrainingSet& set, const CaseCatalog& catalog) {
  std::string out;
  for (const auto& p : set.pairs) {
    json rec = {{"case_id", p.case_id},       {"case_title", catalog.at(p.case_id).title},
                {"excerpt_id", p.excerpt_id}, {"excerpt", p.excerpt_text},
                {"label", p.label},           {"origin", to_string(p.origin)}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<LabeledPair> training_set_from_jsonl(std::string_view body) {
  std::vector<LabeledPair> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    const auto line = body.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (text::is_blank(line)) continue;
    try {
      const auto rec = json::parse(line);
      LabeledPair p;
      p.case_id = rec.at("case_id").get<std::string>();
      p.excerpt_text = rec.at("excerpt").get<std::string>();
      p.excerpt_id = rec.value("excerpt_id", std::string());
      p.label = rec.at("label").get<int>();
      p.origin = parse_origin(rec.at("origin").get<std::string>());
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, "training set line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

json sampling_manifest(const TrainingSet& set, const SamplingConfig& config) {
  json counts = json::object();
  for (auto o : {PairOrigin::kPositive, PairOrigin::kWithinClusterNegative,
                 PairOrigin::kRandomNegative}) {
    auto it = set.counts.find(o);
    counts[std::string(to_string(o))] = it == set.counts.end() ? 0 : it->second;
  }
  json warnings = json::array();
  for (const auto& w : set.warnings) {
    warnings.push_back({{"case_id", w.case_id}, {"requested", w.requested}, {"produced", w.produced}});
  }
  return {{"strategy", to_string(config.strategy)},
          {"ratio", config.ratio},
          {"seed", config.seed},
          {"counts", counts},
          {"total", set.pairs.size()},
          {"warnings", warnings}};
}

}  // namespace privlabel
