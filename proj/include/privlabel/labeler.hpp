#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "privlabel/corpus.hpp"
#include "privlabel/evaluation.hpp"
#include "privlabel/kernels.hpp"
#include "privlabel/matchers.hpp"

namespace privlabel {

enum class SegmentKind { kParagraph, kTitle, kListItem, kUnknown };
std::string_view to_string(SegmentKind k);

struct Segment {
  std::size_t index = 0;
  std::string text;
  SegmentKind kind = SegmentKind::kParagraph;
};

// Lines shorter than this without terminal punctuation count as titles.
inline constexpr std::size_t kTitleMaxWords = 8;

// One segment per non-blank line.
std::vector<Segment> segment_policy(std::string_view text);
SegmentKind classify_segment(std::string_view line);

struct MatchResult {
  std::size_t segment_index = 0;
  std::string case_id;
  double probability = 0.0;
  bool predicted = false;
  std::string match_id;
};

std::string match_id_for(std::string_view service, std::size_t segment_index,
                         std::string_view case_id);

// Scores the full segments x catalog grid, ordered by (segment, catalog
// order). With a threshold, predicted = probability >= threshold; otherwise
// the matcher's own decision rule applies.
std::vector<MatchResult> scan_policy(const Matcher& matcher, std::span<const Segment> segments,
                                     const CaseCatalog& catalog, std::optional<double> threshold,
                                     std::string_view service,
                                     kernels::Exec exec = kernels::Exec::kParallel);

// Gold annotations for a policy: set of (segment index, case id) matches.
using GoldTags = std::set<std::pair<std::size_t, std::string>>;
GoldTags parse_gold_tags(const nlohmann::json& doc);

// Report over the whole grid; class 1 = "True" (match), class 0 = "False".
ClassReport evaluate_scan(std::span<const MatchResult> results, const GoldTags& gold,
                          std::size_t segment_count, const CaseCatalog& catalog);

enum class Grade { kA, kB, kC, kD, kE, kUngraded };
std::string_view to_string(Grade g);

// Severity-first bands on the bad fraction b = bad / identified:
// blocker -> E; b > 0.75 -> D; 0.5 < b <= 0.75 -> C; 0.25 <= b <= 0.5 -> B;
// b < 0.25 -> A; no identified cases -> Ungraded.
Grade grade_for_counts(std::size_t blockers, std::size_t bad, std::size_t identified);
Grade grade_for_fraction(double bad_fraction, bool has_blocker);
Grade assign_grade(std::span<const Case> identified_cases);

std::string_view rating_color(Rating r);

struct FeedbackCounts {
  std::size_t up = 0;
  std::size_t down = 0;
  friend bool operator==(const FeedbackCounts&, const FeedbackCounts&) = default;
};

struct Evidence {
  std::size_t segment_index = 0;
  std::string text;
  double probability = 0.0;
  std::string match_id;
  std::optional<FeedbackCounts> feedback;  // filled in when served
};

// Probability as a percentage rounded to one decimal.
double probability_percent(double p);

struct IdentifiedCase {
  std::string case_id;
  std::string title;
  Rating rating = Rating::kNeutral;
  std::vector<Evidence> evidence;  // probability descending
};

struct ServiceMeta {
  std::string service;
  std::string generated_at;  // ISO-8601 UTC
};

struct PrivacyLabel {
  ServiceMeta meta;
  Grade grade = Grade::kUngraded;
  std::size_t segment_count = 0;
  std::size_t scan_cells = 0;
  // Groups in severity order: blocker, bad, neutral, good.
  std::map<Rating, std::vector<IdentifiedCase>> groups;

  std::size_t identified_count() const;
  nlohmann::json to_json() const;
  static PrivacyLabel from_json(const nlohmann::json& doc);
};

PrivacyLabel build_label(const ServiceMeta& meta, std::span<const MatchResult> results,
                         std::span<const Segment> segments, const CaseCatalog& catalog);

std::string utc_now_iso8601();

}  // namespace privlabel
