#include "privlabel/labeler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>

#include "privlabel/error.hpp"
#include "privlabel/text.hpp"

namespace privlabel {

std::string_view to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::kParagraph: return "paragraph";
    case SegmentKind::kTitle: return "title";
    case SegmentKind::kListItem: return "list_item";
    case SegmentKind::kUnknown: return "unknown";
  }
  return "unknown";
}

namespace {

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool has_list_marker(std::string_view s) {
  if (s.empty()) return false;
  // "-", "*", "+", "•" (U+2022), "·" (U+00B7) followed by a space.
  if ((s[0] == '-' || s[0] == '*' || s[0] == '+') && s.size() > 1 && s[1] == ' ') return true;
  if (s.substr(0, 3) == "\xe2\x80\xa2" || s.substr(0, 2) == "\xc2\xb7") return true;
  // "1." "2)" "a)" "(iv)" style enumerators followed by a space.
  std::size_t i = 0;
  if (s[0] == '(') ++i;
  const std::size_t start = i;
  while (i < s.size() && (is_digit(s[i]) || (is_ascii_alpha(s[i]) && i - start < 4))) ++i;
  if (i == start || i >= s.size()) return false;
  const bool all_digits = std::all_of(s.begin() + start, s.begin() + i, is_digit);
  const bool roman_or_letter =
      i - start <= 4 && std::all_of(s.begin() + start, s.begin() + i, [](char c) {
        return std::string_view("ivxlcdmIVXLCDM").find(c) != std::string_view::npos;
      });
  const bool single_letter = i - start == 1 && is_ascii_alpha(s[start]);
  if (!all_digits && !roman_or_letter && !single_letter) return false;
  if (s[i] != '.' && s[i] != ')') return false;
  return i + 1 < s.size() && s[i + 1] == ' ';
}

}  // namespace

SegmentKind classify_segment(std::string_view line) {
  const auto t = text::trim(line);
  if (std::none_of(t.begin(), t.end(), [](char c) {
        return is_ascii_alpha(c) || static_cast<unsigned char>(c) >= 0x80;
      })) {
    return SegmentKind::kUnknown;
  }
  if (has_list_marker(t)) return SegmentKind::kListItem;
  const char last = t.back();
  const bool terminal = last == '.' || last == '?' || last == '!' || last == ':' || last == ';';
  if (text::word_count(t) < kTitleMaxWords && !terminal) return SegmentKind::kTitle;
  return SegmentKind::kParagraph;
}

std::vector<Segment> segment_policy(std::string_view body) {
  std::vector<Segment> out;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    std::size_t nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    const auto line = text::trim(body.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    out.push_back(Segment{out.size(), std::string(line), classify_segment(line)});
  }
  return out;
}

std::string match_id_for(std::string_view service, std::size_t segment_index,
                         std::string_view case_id) {
  return "m" + text::stable_id({service, std::to_string(segment_index), case_id});
}

std::vector<MatchResult> scan_policy(const Matcher& matcher, std::span<const Segment> segments,
                                     const CaseCatalog& catalog, std::optional<double> threshold,
                                     std::string_view service, kernels::Exec exec) {
  const std::size_t n_cases = catalog.size();
  std::vector<MatchResult> results(segments.size() * n_cases);
  const auto n_seg = static_cast<std::int64_t>(segments.size());
  std::exception_ptr failure;
  // Each segment owns a contiguous slice of `results`, so the merged order
  // is (segment, catalog order) regardless of scheduling.
#pragma omp parallel for schedule(dynamic, 1) if (exec == kernels::Exec::kParallel)
  for (std::int64_t s = 0; s < n_seg; ++s) {
    try {
      const auto& seg = segments[s];
      for (std::size_t c = 0; c < n_cases; ++c) {
        const auto& kase = catalog.cases()[c];
        const MatchScore score = matcher.score(kase.title, seg.text);
        auto& r = results[s * n_cases + c];
        r.segment_index = seg.index;
        r.case_id = kase.id;
        r.probability = score.probability;
        r.predicted = threshold ? (!score.abstained && score.probability >= *threshold)
                                : matcher.predict(score);
        r.match_id = match_id_for(service, seg.index, kase.id);
      }
    } catch (...) {
#pragma omp critical(privlabel_scan_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

GoldTags parse_gold_tags(const nlohmann::json& doc) {
  GoldTags gold;
  const auto& tags = doc.is_object() ? doc.at("tags") : doc;
  for (const auto& t : tags) {
    const auto idx = t.at("segment_index").get<std::size_t>();
    for (const auto& c : t.at("case_ids")) gold.emplace(idx, c.get<std::string>());
  }
  return gold;
}

ClassReport evaluate_scan(std::span<const MatchResult> results, const GoldTags& gold,
                          std::size_t segment_count, const CaseCatalog& catalog) {
  for (const auto& [seg, case_id] : gold) {
    if (seg >= segment_count) {
      throw Error(ErrorKind::kValidation,
                  "gold tag references unknown segment " + std::to_string(seg));
    }
    if (!catalog.contains(case_id)) {
      throw Error(ErrorKind::kValidation, "gold tag references unknown case '" + case_id + "'");
    }
  }
  if (results.size() != segment_count * catalog.size()) {
    throw Error(ErrorKind::kPrecondition, "scan results do not cover the segment x case grid");
  }
  Confusion c;
  for (const auto& r : results) {
    const bool g = gold.count({r.segment_index, r.case_id}) > 0;
    if (g) {
      (r.predicted ? c.tp : c.fn) += 1;
    } else {
      (r.predicted ? c.fp : c.tn) += 1;
    }
  }
  ClassReport rep = report_from_confusion(c);
  rep.set_name = "case_study";
  return rep;
}

// ---------------------------------------------------------------------------
// Grading

std::string_view to_string(Grade g) {
  switch (g) {
    case Grade::kA: return "A";
    case Grade::kB: return "B";
    case Grade::kC: return "C";
    case Grade::kD: return "D";
    case Grade::kE: return "E";
    case Grade::kUngraded: return "Ungraded";
  }
  return "Ungraded";
}

Grade grade_for_counts(std::size_t blockers, std::size_t bad, std::size_t identified) {
  if (identified == 0) return Grade::kUngraded;
  if (blockers > 0) return Grade::kE;
  // Integer comparisons of bad/identified against 3/4, 1/2, 1/4.
  const std::size_t b4 = 4 * bad;
  if (b4 > 3 * identified) return Grade::kD;
  if (2 * bad > identified) return Grade::kC;
  if (b4 >= identified) return Grade::kB;
  return Grade::kA;
}

Grade grade_for_fraction(double b, bool has_blocker) {
  if (has_blocker) return Grade::kE;
  if (b > 0.75) return Grade::kD;
  if (b > 0.5) return Grade::kC;
  if (b >= 0.25) return Grade::kB;
  return Grade::kA;
}

Grade assign_grade(std::span<const Case> identified) {
  std::size_t blockers = 0, bad = 0;
  for (const auto& c : identified) {
    if (c.rating == Rating::kBlocker) ++blockers;
    if (c.rating == Rating::kBad) ++bad;
  }
  return grade_for_counts(blockers, bad, identified.size());
}

std::string_view rating_color(Rating r) {
  switch (r) {
    case Rating::kBlocker: return "red";
    case Rating::kBad: return "yellow";
    case Rating::kNeutral: return "grey";
    case Rating::kGood: return "green";
  }
  return "grey";
}

// ---------------------------------------------------------------------------
// Label assembly

std::size_t PrivacyLabel::identified_count() const {
  std::size_t n = 0;
  for (const auto& [_, g] : groups) n += g.size();
  return n;
}

nlohmann::json PrivacyLabel::to_json() const {
  nlohmann::json groups_json = nlohmann::json::object();
  for (Rating r : kAllRatings) {
    nlohmann::json arr = nlohmann::json::array();
    auto it = groups.find(r);
    if (it != groups.end()) {
      for (const auto& c : it->second) {
        nlohmann::json ev = nlohmann::json::array();
        for (const auto& e : c.evidence) {
          nlohmann::json item = {{"segment_index", e.segment_index},
                                 {"text", e.text},
                                 {"probability", e.probability},
                                 {"percent", probability_percent(e.probability)},
                                 {"match_id", e.match_id}};
          if (e.feedback) item["feedback"] = {{"up", e.feedback->up}, {"down", e.feedback->down}};
          ev.push_back(std::move(item));
        }
        arr.push_back({{"case_id", c.case_id},
                       {"title", c.title},
                       {"rating", to_string(c.rating)},
                       {"color", rating_color(c.rating)},
                       {"evidence", ev}});
      }
    }
    groups_json[std::string(to_string(r))] = arr;
  }
  return {{"service", meta.service},
          {"grade", to_string(grade)},
          {"generated_at", meta.generated_at},
          {"segment_count", segment_count},
          {"scan_cells", scan_cells},
          {"groups", groups_json}};
}

PrivacyLabel PrivacyLabel::from_json(const nlohmann::json& doc) {
  PrivacyLabel l;
  l.meta.service = doc.at("service").get<std::string>();
  l.meta.generated_at = doc.value("generated_at", std::string());
  l.segment_count = doc.value("segment_count", std::size_t{0});
  l.scan_cells = doc.value("scan_cells", std::size_t{0});
  const auto g = doc.at("grade").get<std::string>();
  l.grade = Grade::kUngraded;
  for (Grade cand : {Grade::kA, Grade::kB, Grade::kC, Grade::kD, Grade::kE, Grade::kUngraded}) {
    if (to_string(cand) == g) l.grade = cand;
  }
  for (Rating r : kAllRatings) {
    auto& group = l.groups[r];
    const auto key = std::string(to_string(r));
    if (!doc.at("groups").contains(key)) continue;
    for (const auto& c : doc["groups"][key]) {
      IdentifiedCase ic;
      ic.case_id = c.at("case_id").get<std::string>();
      ic.title = c.at("title").get<std::string>();
      ic.rating = parse_rating(c.at("rating").get<std::string>());
      for (const auto& e : c.at("evidence")) {
        Evidence ev{e.at("segment_index").get<std::size_t>(), e.at("text").get<std::string>(),
                    e.at("probability").get<double>(), e.at("match_id").get<std::string>(),
                    std::nullopt};
        if (e.contains("feedback")) {
          ev.feedback = FeedbackCounts{e["feedback"].at("up").get<std::size_t>(),
                                       e["feedback"].at("down").get<std::size_t>()};
        }
        ic.evidence.push_back(std::move(ev));
      }
      group.push_back(std::move(ic));
    }
  }
  return l;
}

PrivacyLabel build_label(const ServiceMeta& meta, std::span<const MatchResult> results,
                         std::span<const Segment> segments, const CaseCatalog& catalog) {
  std::map<std::size_t, const Segment*> seg_by_index;
  for (const auto& s : segments) seg_by_index[s.index] = &s;

  std::map<std::string, IdentifiedCase> found;
  for (const auto& r : results) {
    if (!r.predicted) continue;
    const Case& c = catalog.at(r.case_id);
    auto [it, inserted] = found.try_emplace(c.id);
    if (inserted) {
      it->second.case_id = c.id;
      it->second.title = c.title;
      it->second.rating = c.rating;
    }
    auto sit = seg_by_index.find(r.segment_index);
    if (sit == seg_by_index.end()) {
      throw Error(ErrorKind::kValidation,
                  "scan result references unknown segment " + std::to_string(r.segment_index));
    }
    it->second.evidence.push_back(
        Evidence{r.segment_index, sit->second->text, r.probability, r.match_id, std::nullopt});
  }

  PrivacyLabel label;
  label.meta = meta;
  label.segment_count = segments.size();
  label.scan_cells = results.size();
  for (Rating r : kAllRatings) label.groups[r];
  std::vector<Case> identified;
  // Catalog order inside each group.
  for (const auto& c : catalog) {
    auto it = found.find(c.id);
    if (it == found.end()) continue;
    auto& ev = it->second.evidence;
    std::stable_sort(ev.begin(), ev.end(), [](const Evidence& a, const Evidence& b) {
      return a.probability > b.probability;
    });
    identified.push_back(c);
    label.groups[c.rating].push_back(std::move(it->second));
  }
  label.grade = assign_grade(identified);
  return label;
}

double probability_percent(double p) { return std::round(p * 1000.0) / 10.0; }

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

}  // namespace privlabel
