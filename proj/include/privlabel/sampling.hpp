#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "privlabel/corpus.hpp"

namespace privlabel {

enum class Strategy { kRandom, kCluster };
enum class PairOrigin { kPositive, kWithinClusterNegative, kRandomNegative };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);  // "rs" | "cbs"
std::string_view to_string(PairOrigin o);
PairOrigin parse_origin(std::string_view name);

struct LabeledPair {
  std::string case_id;
  std::string excerpt_id;
  std::string excerpt_text;
  int label = 0;
  PairOrigin origin = PairOrigin::kRandomNegative;

  std::string key() const { return pair_id_for(case_id, excerpt_id); }
  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

inline constexpr std::uint32_t kSupportedRatios[] = {1, 2, 3, 5};

struct SamplingConfig {
  Strategy strategy = Strategy::kCluster;
  std::uint32_t ratio = 3;
  std::uint64_t seed = 0;

  // Throws Error(kValidation) when ratio < 1.
  void validate() const;
};

// Emitted when a case cannot get ratio x positives unique negatives.
struct SamplingWarning {
  std::string case_id;
  std::size_t requested = 0;
  std::size_t produced = 0;
};

struct NegativeSample {
  std::vector<LabeledPair> pairs;
  std::vector<SamplingWarning> warnings;
};

std::vector<LabeledPair> positive_pairs(std::span<const Annotation> partition,
                                        const AnnotationSet& corpus);

// Negatives for each case are drawn uniformly without replacement from the
// partition's excerpts annotated to other cases. Collisions are checked
// against every approved annotation in `corpus`, not only the partition.
NegativeSample sample_random_negatives(std::span<const Annotation> partition,
                                       const AnnotationSet& corpus, std::uint32_t ratio,
                                       std::uint64_t seed);

// Clustered cases draw from sibling cases' excerpts first and only top up
// from outside the cluster once siblings are exhausted. Standalone cases use
// the random strategy with the same per-case seed stream, so the two
// strategies agree on corpora without clusters. `top_up = false` stops at
// the sibling pool (used for frozen evaluation sets).
NegativeSample sample_cluster_negatives(std::span<const Annotation> partition,
                                        const AnnotationSet& corpus, const ClusterSet& clusters,
                                        std::uint32_t ratio, std::uint64_t seed,
                                        bool top_up = true);

struct TrainingSet {
  std::uint64_t seed = 0;
  std::vector<LabeledPair> pairs;
  std::map<PairOrigin, std::size_t> counts;
  std::vector<SamplingWarning> warnings;

  std::size_t positives() const;
  std::size_t negatives() const;
};

// Seeded shuffle of positives ++ negatives. Throws Error(kDuplicate) when a
// key appears in both inputs or twice within one.
TrainingSet build_training_set(std::vector<LabeledPair> positives,
                               std::vector<LabeledPair> negatives, std::uint64_t seed);

TrainingSet sample_training_set(std::span<const Annotation> partition, const AnnotationSet& corpus,
                                const ClusterSet& clusters, const SamplingConfig& config);

// Frozen 1:1 evaluation pairs: standalone cases get random negatives,
// clustered cases get within-cluster negatives only.
TrainingSet build_eval_pairs(std::span<const Annotation> partition, const AnnotationSet& corpus,
                             const ClusterSet& clusters, std::uint64_t seed);

std::string training_set_to_jsonl(const TrainingSet& set, const CaseCatalog& catalog);
std::vector<LabeledPair> training_set_from_jsonl(std::string_view body);
json sampling_manifest(const TrainingSet& set, const SamplingConfig& config);

}  // namespace privlabel
