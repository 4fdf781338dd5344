#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

namespace privlabel {

using json = nlohmann::json;

enum class Rating { kBlocker, kBad, kNeutral, kGood };

inline constexpr std::array<Rating, 4> kAllRatings = {Rating::kBlocker, Rating::kBad,
                                                      Rating::kNeutral, Rating::kGood};

std::string_view to_string(Rating r);
// Throws Error(kValidation) on anything outside the four rating names.
Rating parse_rating(std::string_view name);

struct Case {
  std::string id;
  std::string title;
  Rating rating = Rating::kNeutral;
  std::optional<std::string> cluster_id;

  bool contrasting() const { return cluster_id.has_value(); }
  friend bool operator==(const Case&, const Case&) = default;
};

class CaseCatalog {
 public:
  CaseCatalog() = default;

  // Validates and indexes; throws on duplicate id or empty title.
  explicit CaseCatalog(std::vector<Case> cases);

  static CaseCatalog from_json(const json& doc);
  json to_json() const;

  const Case* find(std::string_view id) const;
  const Case& at(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  std::size_t size() const { return cases_.size(); }
  const std::vector<Case>& cases() const { return cases_; }
  auto begin() const { return cases_.begin(); }
  auto end() const { return cases_.end(); }

  void assign_cluster(std::string_view case_id, std::string cluster_id);

  friend bool operator==(const CaseCatalog& a, const CaseCatalog& b) {
    return a.cases_ == b.cases_;
  }

 private:
  std::vector<Case> cases_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Excerpt {
  std::string id;
  std::string service_id;
  std::string text;
  std::size_t word_count = 0;
};

// Identity of an excerpt: hash of service id and whitespace-normalized text.
std::string excerpt_id_for(std::string_view service_id, std::string_view text);
// Identity of a (case, excerpt) pair.
std::string pair_id_for(std::string_view case_id, std::string_view excerpt_id);

struct Annotation {
  std::string id;  // pair id
  std::string case_id;
  std::string excerpt_id;
  bool approved = true;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AnnotationRecord {
  std::string case_id;
  std::string service_id;
  std::string excerpt;
  bool approved = true;
};

// Rejected records stay in storage (approved=false) but every accessor used
// downstream only exposes approved annotations.
class AnnotationSet {
 public:
  const std::vector<Annotation>& approved() const { return approved_; }
  const std::vector<Annotation>& all() const { return all_; }
  std::size_t size() const { return approved_.size(); }
  std::size_t rejected_count() const { return all_.size() - approved_.size(); }

  const Excerpt& excerpt(std::string_view excerpt_id) const;
  const Excerpt* find_excerpt(std::string_view excerpt_id) const;
  const std::vector<Excerpt>& excerpts() const { return excerpts_; }

  const Annotation* find(std::string_view pair_id) const;

  // True if (case_id, excerpt_id) is an approved annotation anywhere.
  bool is_positive(std::string_view case_id, std::string_view excerpt_id) const;

  // Excerpt ids approved for a case; nullptr if the case has none.
  const std::unordered_set<std::string>* positive_excerpts(const std::string& case_id) const;

  // Approved excerpts per case id, in ingestion order.
  std::map<std::string, std::vector<std::string>> excerpts_by_case() const;

  std::vector<std::string> to_jsonl_lines() const;

 private:
  friend AnnotationSet ingest_annotations(const std::vector<AnnotationRecord>&, const CaseCatalog&);

  std::vector<Excerpt> excerpts_;
  std::unordered_map<std::string, std::size_t> excerpt_index_;
  std::vector<Annotation> all_;
  std::vector<Annotation> approved_;
  std::unordered_map<std::string, std::size_t> approved_index_;
  std::unordered_map<std::string, std::unordered_set<std::string>> positives_by_case_;
};

struct Cluster {
  std::string id;
  std::vector<std::string> member_case_ids;
};

class ClusterSet {
 public:
  const std::vector<Cluster>& clusters() const { return clusters_; }
  std::size_t size() const { return clusters_.size(); }
  const Cluster* cluster_of(std::string_view case_id) const;
  // Other members of the case's cluster; empty for standalone cases.
  std::vector<std::string> siblings(std::string_view case_id) const;
  json to_json() const;

 private:
  friend ClusterSet load_clusters(const json&, CaseCatalog&);
  std::vector<Cluster> clusters_;
  std::unordered_map<std::string, std::size_t> by_case_;
};

inline constexpr std::size_t kMinClusterSize = 2;
inline constexpr std::size_t kMaxClusterSize = 6;

CaseCatalog ingest_cases(const json& doc);
CaseCatalog ingest_cases_file(const std::filesystem::path& path);

AnnotationSet ingest_annotations(const std::vector<AnnotationRecord>& records,
                                 const CaseCatalog& catalog);
// One JSON object per line; parse errors report the 1-based line number.
std::vector<AnnotationRecord> parse_annotations_jsonl(std::string_view body);
AnnotationSet ingest_annotations_file(const std::filesystem::path& path,
                                      const CaseCatalog& catalog);

// Marks member cases' cluster_id in `catalog`.
ClusterSet load_clusters(const json& doc, CaseCatalog& catalog);
ClusterSet load_clusters_file(const std::filesystem::path& path, CaseCatalog& catalog);

struct SplitRatios {
  std::uint32_t train = 3;
  std::uint32_t validation = 1;
  std::uint32_t test = 1;
};

enum class SplitGranularity { kAnnotation, kService };

struct DataSplit {
  std::uint64_t seed = 0;
  std::vector<Annotation> train;
  std::vector<Annotation> validation;
  std::vector<Annotation> test_standalone;
  std::vector<Annotation> test_contrasting;

  std::vector<Annotation> test() const;
  json to_json() const;
  static DataSplit from_json(const json& doc, const AnnotationSet& annotations);
};

// Partition sizes are the largest-remainder apportionment of n under the
// ratios, so each is within 1 of its exact share.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

DataSplit split_dataset(const std::vector<Annotation>& annotations, const CaseCatalog& catalog,
                        const SplitRatios& ratios, std::uint64_t seed,
                        SplitGranularity granularity = SplitGranularity::kAnnotation,
                        const AnnotationSet* excerpt_source = nullptr);

struct CorpusStats {
  std::size_t case_count = 0;
  std::map<Rating, std::size_t> rating_histogram;
  std::size_t cluster_count = 0;
  std::size_t standalone_count = 0;
  std::size_t annotation_count = 0;
  double mean_excerpt_words = 0.0;
  std::size_t min_excerpts_per_case = 0;
  std::size_t max_excerpts_per_case = 0;
  double mean_excerpts_per_case = 0.0;

  json to_json() const;
};

// Per-case excerpt counts are over cases with at least one approved
// annotation.
CorpusStats catalog_stats(const CaseCatalog& catalog, const AnnotationSet& annotations);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
json read_json_file(const std::filesystem::path& path);

}  // namespace privlabel
