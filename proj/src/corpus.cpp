#include "privlabel/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "privlabel/error.hpp"
#include "privlabel/rng.hpp"
#include "privlabel/text.hpp"

namespace privlabel {

std::string_view to_string(Rating r) {
  switch (r) {
    case Rating::kBlocker: return "blocker";
    case Rating::kBad: return "bad";
    case Rating::kNeutral: return "neutral";
    case Rating::kGood: return "good";
  }
  return "neutral";
}

Rating parse_rating(std::string_view name) {
  for (Rating r : kAllRatings) {
    if (to_string(r) == name) return r;
  }
  throw Error(ErrorKind::kValidation, "unknown rating value: '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Catalog

CaseCatalog::CaseCatalog(std::vector<Case> cases) : cases_(std::move(cases)) {
  for (std::size_t i = 0; i < cases_.size(); ++i) {
    const auto& c = cases_[i];
    if (c.id.empty()) throw Error(ErrorKind::kValidation, "case with empty id");
    if (text::is_blank(c.title)) {
      throw Error(ErrorKind::kValidation, "case '" + c.id + "' has an empty title");
    }
    if (!index_.emplace(c.id, i).second) {
      throw Error(ErrorKind::kDuplicate, "duplicate case id '" + c.id + "'");
    }
  }
}

CaseCatalog CaseCatalog::from_json(const json& doc) {
  if (!doc.is_array()) throw Error(ErrorKind::kParse, "case catalog must be a JSON array");
  std::vector<Case> cases;
  cases.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    const auto field = [&](const char* key) -> std::string {
      if (!rec.is_object() || !rec.contains(key) || !rec[key].is_string()) {
        throw Error(ErrorKind::kValidation,
                    "case record " + std::to_string(i) + " is missing string field '" + key + "'");
      }
      return rec[key].get<std::string>();
    };
    Case c;
    c.id = field("id");
    c.title = field("title");
    c.rating = parse_rating(field("rating"));
    if (rec.contains("cluster_id") && rec["cluster_id"].is_string()) {
      c.cluster_id = rec["cluster_id"].get<std::string>();
    }
    cases.push_back(std::move(c));
  }
  return CaseCatalog(std::move(cases));
}

json CaseCatalog::to_json() const {
  json out = json::array();
  for (const auto& c : cases_) {
    json rec = {{"id", c.id}, {"title", c.title}, {"rating", to_string(c.rating)}};
    if (c.cluster_id) rec["cluster_id"] = *c.cluster_id;
    out.push_back(std::move(rec));
  }
  return out;
}

const Case* CaseCatalog::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &cases_[it->second];
}

const Case& CaseCatalog::at(std::string_view id) const {
  const Case* c = find(id);
  if (!c) throw Error(ErrorKind::kNotFound, "unknown case id '" + std::string(id) + "'");
  return *c;
}

void CaseCatalog::assign_cluster(std::string_view case_id, std::string cluster_id) {
  auto it = index_.find(std::string(case_id));
  if (it == index_.end()) {
    throw Error(ErrorKind::kDanglingReference, "unknown case id '" + std::string(case_id) + "'");
  }
  cases_[it->second].cluster_id = std::move(cluster_id);
}

CaseCatalog ingest_cases(const json& doc) { return CaseCatalog::from_json(doc); }

CaseCatalog ingest_cases_file(const std::filesystem::path& path) {
  return ingest_cases(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Annotations

std::string excerpt_id_for(std::string_view service_id, std::string_view text) {
  return "x" + text::stable_id({service_id, text::normalize_space(text)});
}

std::string pair_id_for(std::string_view case_id, std::string_view excerpt_id) {
  return "p" + text::stable_id({case_id, excerpt_id});
}

const Excerpt* AnnotationSet::find_excerpt(std::string_view excerpt_id) const {
  auto it = excerpt_index_.find(std::string(excerpt_id));
  return it == excerpt_index_.end() ? nullptr : &excerpts_[it->second];
}

const Excerpt& AnnotationSet::excerpt(std::string_view excerpt_id) const {
  const Excerpt* e = find_excerpt(excerpt_id);
  if (!e) throw Error(ErrorKind::kNotFound, "unknown excerpt id '" + std::string(excerpt_id) + "'");
  return *e;
}

const Annotation* AnnotationSet::find(std::string_view pair_id) const {
  auto it = approved_index_.find(std::string(pair_id));
  return it == approved_index_.end() ? nullptr : &approved_[it->second];
}

bool AnnotationSet::is_positive(std::string_view case_id, std::string_view excerpt_id) const {
  return find(pair_id_for(case_id, excerpt_id)) != nullptr;
}

const std::unordered_set<std::string>* AnnotationSet::positive_excerpts(
    const std::string& case_id) const {
  auto it = positives_by_case_.find(case_id);
  return it == positives_by_case_.end() ? nullptr : &it->second;
}

std::map<std::string, std::vector<std::string>> AnnotationSet::excerpts_by_case() const {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& a : approved_) out[a.case_id].push_back(a.excerpt_id);
  return out;
}

std::vector<std::string> AnnotationSet::to_jsonl_lines() const {
  std::vector<std::string> lines;
  lines.reserve(all_.size());
  for (const auto& a : all_) {
    const auto& e = excerpt(a.excerpt_id);
    json rec = {{"case_id", a.case_id},
                {"service_id", e.service_id},
                {"excerpt", e.text},
                {"approved", a.approved}};
    lines.push_back(rec.dump());
  }
  return lines;
}

AnnotationSet ingest_annotations(const std::vector<AnnotationRecord>& records,
                                 const CaseCatalog& catalog) {
  AnnotationSet set;
  std::unordered_map<std::string, std::size_t> all_index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!catalog.contains(r.case_id)) {
      throw Error(ErrorKind::kDanglingReference, "annotation " + std::to_string(i) +
                                                     " references unknown case '" + r.case_id +
                                                     "'");
    }
    if (text::is_blank(r.excerpt)) {
      throw Error(ErrorKind::kValidation,
                  "annotation " + std::to_string(i) + " has empty excerpt text");
    }
    const std::string eid = excerpt_id_for(r.service_id, r.excerpt);
    if (!set.excerpt_index_.count(eid)) {
      Excerpt e;
      e.id = eid;
      e.service_id = r.service_id;
      e.text = std::string(text::trim(r.excerpt));
      e.word_count = text::word_count(e.text);
      set.excerpt_index_.emplace(eid, set.excerpts_.size());
      set.excerpts_.push_back(std::move(e));
    }
    Annotation a{pair_id_for(r.case_id, eid), r.case_id, eid, r.approved};
    auto it = all_index.find(a.id);
    if (it != all_index.end()) {
      // Same pair seen twice: any approval wins.
      set.all_[it->second].approved = set.all_[it->second].approved || a.approved;
      continue;
    }
    all_index.emplace(a.id, set.all_.size());
    set.all_.push_back(std::move(a));
  }
  for (const auto& a : set.all_) {
    if (!a.approved) continue;
    set.approved_index_.emplace(a.id, set.approved_.size());
    set.positives_by_case_[a.case_id].insert(a.excerpt_id);
    set.approved_.push_back(a);
  }
  return set;
}

std::vector<AnnotationRecord> parse_annotations_jsonl(std::string_view body) {
  std::vector<AnnotationRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    const std::size_t nl = body.find('\n', pos);
    const std::string_view line =
        body.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? body.size() + 1 : nl + 1;
    if (text::is_blank(line)) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kParse,
                  "annotations line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto str = [&](const char* key) -> std::string {
      if (!rec.is_object() || !rec.contains(key) || !rec[key].is_string()) {
        throw Error(ErrorKind::kValidation, "annotations line " + std::to_string(line_no) +
                                                ": missing string field '" + key + "'");
      }
      return rec[key].get<std::string>();
    };
    AnnotationRecord r;
    r.case_id = str("case_id");
    r.service_id = str("service_id");
    r.excerpt = str("excerpt");
    r.approved = rec.value("approved", true);
    out.push_back(std::move(r));
  }
  return out;
}

AnnotationSet ingest_annotations_file(const std::filesystem::path& path,
                                      const CaseCatalog& catalog) {
  return ingest_annotations(parse_annotations_jsonl(read_file(path)), catalog);
}

// ---------------------------------------------------------------------------
// Clusters

const Cluster* ClusterSet::cluster_of(std::string_view case_id) const {
  auto it = by_case_.find(std::string(case_id));
  return it == by_case_.end() ? nullptr : &clusters_[it->second];
}

std::vector<std::string> ClusterSet::siblings(std::string_view case_id) const {
  std::vector<std::string> out;
  if (const Cluster* c = cluster_of(case_id)) {
    for (const auto& m : c->member_case_ids) {
      if (m != case_id) out.push_back(m);
    }
  }
  return out;
}

json ClusterSet::to_json() const {
  json out = json::array();
  for (const auto& c : clusters_) {
    out.push_back({{"cluster_id", c.id}, {"case_ids", c.member_case_ids}});
  }
  return out;
}

ClusterSet load_clusters(const json& doc, CaseCatalog& catalog) {
  if (!doc.is_array()) throw Error(ErrorKind::kParse, "cluster file must be a JSON array");
  ClusterSet set;
  std::set<std::string> cluster_ids;
  for (const auto& rec : doc) {
    if (!rec.is_object() || !rec.contains("cluster_id") || !rec.contains("case_ids") ||
        !rec["case_ids"].is_array()) {
      throw Error(ErrorKind::kValidation, "cluster record needs 'cluster_id' and 'case_ids'");
    }
    Cluster c;
    c.id = rec["cluster_id"].is_string() ? rec["cluster_id"].get<std::string>()
                                         : rec["cluster_id"].dump();
    if (!cluster_ids.insert(c.id).second) {
      throw Error(ErrorKind::kDuplicate, "duplicate cluster id '" + c.id + "'");
    }
    for (const auto& m : rec["case_ids"]) c.member_case_ids.push_back(m.get<std::string>());
    std::set<std::string> unique(c.member_case_ids.begin(), c.member_case_ids.end());
    if (unique.size() != c.member_case_ids.size()) {
      throw Error(ErrorKind::kDuplicate, "cluster '" + c.id + "' lists a case twice");
    }
    if (c.member_case_ids.size() < kMinClusterSize || c.member_case_ids.size() > kMaxClusterSize) {
      throw Error(ErrorKind::kValidation,
                  "cluster '" + c.id + "' has " + std::to_string(c.member_case_ids.size()) +
                      " members; expected " + std::to_string(kMinClusterSize) + ".." +
                      std::to_string(kMaxClusterSize));
    }
    for (const auto& m : c.member_case_ids) {
      if (!catalog.contains(m)) {
        throw Error(ErrorKind::kDanglingReference,
                    "cluster '" + c.id + "' references unknown case '" + m + "'");
      }
      if (!set.by_case_.emplace(m, set.clusters_.size()).second) {
        throw Error(ErrorKind::kValidation,
                    "case '" + m + "' appears in more than one cluster (clusters must be disjoint)");
      }
    }
    set.clusters_.push_back(std::move(c));
  }
  // Clear stale membership, then annotate.
  std::vector<Case> cases = catalog.cases();
  for (auto& c : cases) c.cluster_id.reset();
  catalog = CaseCatalog(std::move(cases));
  for (const auto& c : set.clusters_) {
    for (const auto& m : c.member_case_ids) catalog.assign_cluster(m, c.id);
  }
  return set;
}

ClusterSet load_clusters_file(const std::filesystem::path& path, CaseCatalog& catalog) {
  return load_clusters(read_json_file(path), catalog);
}

// ---------------------------------------------------------------------------
// Splits

std::vector<Annotation> DataSplit::test() const {
  std::vector<Annotation> out = test_standalone;
  out.insert(out.end(), test_contrasting.begin(), test_contrasting.end());
  return out;
}

json DataSplit::to_json() const {
  const auto ids = [](const std::vector<Annotation>& v) {
    json arr = json::array();
    for (const auto& a : v) arr.push_back(a.id);
    return arr;
  };
  return {{"seed", seed},
          {"train", ids(train)},
          {"validation", ids(validation)},
          {"test", {{"standalone", ids(test_standalone)}, {"contrasting", ids(test_contrasting)}}}};
}

DataSplit DataSplit::from_json(const json& doc, const AnnotationSet& annotations) {
  const auto load = [&](const json& arr) {
    std::vector<Annotation> out;
    for (const auto& id : arr) {
      const Annotation* a = annotations.find(id.get<std::string>());
      if (!a) {
        throw Error(ErrorKind::kDanglingReference,
                    "split references unknown pair '" + id.get<std::string>() + "'");
      }
      out.push_back(*a);
    }
    return out;
  };
  DataSplit s;
  s.seed = doc.at("seed").get<std::uint64_t>();
  s.train = load(doc.at("train"));
  s.validation = load(doc.at("validation"));
  s.test_standalone = load(doc.at("test").at("standalone"));
  s.test_contrasting = load(doc.at("test").at("contrasting"));
  return s;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  const std::array<std::uint64_t, 3> w = {ratios.train, ratios.validation, ratios.test};
  const std::uint64_t total = w[0] + w[1] + w[2];
  if (total == 0) throw Error(ErrorKind::kValidation, "split ratios sum to zero");
  std::array<std::size_t, 3> sizes{};
  std::array<std::uint64_t, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = static_cast<std::size_t>(n * w[i] / total);
    rem[i] = n * w[i] % total;
    assigned += sizes[i];
  }
  // Largest remainder; ties go to the earlier partition.
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (rem[i] > rem[best]) best = i;
    }
    ++sizes[best];
    rem[best] = 0;
    ++assigned;
  }
  return sizes;
}

DataSplit split_dataset(const std::vector<Annotation>& annotations, const CaseCatalog& catalog,
                        const SplitRatios& ratios, std::uint64_t seed,
                        SplitGranularity granularity, const AnnotationSet* excerpt_source) {
  if (annotations.size() < 5) {
    throw Error(ErrorKind::kPrecondition,
                "split_dataset needs at least 5 annotations, got " +
                    std::to_string(annotations.size()));
  }
  for (const auto& a : annotations) {
    if (!a.approved) {
      throw Error(ErrorKind::kPrecondition, "split_dataset received a rejected annotation");
    }
    if (!catalog.contains(a.case_id)) {
      throw Error(ErrorKind::kDanglingReference, "unknown case '" + a.case_id + "'");
    }
  }
  // Canonical order first so the result does not depend on input order.
  std::vector<Annotation> items = annotations;
  std::sort(items.begin(), items.end(),
            [](const Annotation& x, const Annotation& y) { return x.id < y.id; });

  Rng rng(seed);
  DataSplit split;
  split.seed = seed;
  const auto sizes = split_sizes(items.size(), ratios);
  std::vector<Annotation> test;

  if (granularity == SplitGranularity::kAnnotation) {
    rng.shuffle(std::span<Annotation>(items));
    split.train.assign(items.begin(), items.begin() + sizes[0]);
    split.validation.assign(items.begin() + sizes[0], items.begin() + sizes[0] + sizes[1]);
    test.assign(items.begin() + sizes[0] + sizes[1], items.end());
  } else {
    if (!excerpt_source) {
      throw Error(ErrorKind::kPrecondition, "service-level split needs the annotation set");
    }
    std::map<std::string, std::vector<Annotation>> by_service;
    for (const auto& a : items) by_service[excerpt_source->excerpt(a.excerpt_id).service_id].push_back(a);
    std::vector<std::string> services;
    for (const auto& [s, _] : by_service) services.push_back(s);
    rng.shuffle(std::span<std::string>(services));
    // Fill partitions in order, moving on once a partition reaches its target.
    std::array<std::vector<Annotation>*, 3> parts = {&split.train, &split.validation, &test};
    std::size_t p = 0;
    for (const auto& s : services) {
      while (p < 2 && parts[p]->size() >= sizes[p]) ++p;
      auto& group = by_service[s];
      parts[p]->insert(parts[p]->end(), group.begin(), group.end());
    }
  }
  for (auto& a : test) {
    (catalog.at(a.case_id).contrasting() ? split.test_contrasting : split.test_standalone)
        .push_back(std::move(a));
  }
  return split;
}

// ---------------------------------------------------------------------------
// Stats

json CorpusStats::to_json() const {
  json hist = json::object();
  for (Rating r : kAllRatings) {
    auto it = rating_histogram.find(r);
    hist[std::string(to_string(r))] = it == rating_histogram.end() ? 0 : it->second;
  }
  return {{"case_count", case_count},
          {"rating_histogram", hist},
          {"cluster_count", cluster_count},
          {"standalone_count", standalone_count},
          {"annotation_count", annotation_count},
          {"mean_excerpt_words", mean_excerpt_words},
          {"min_excerpts_per_case", min_excerpts_per_case},
          {"max_excerpts_per_case", max_excerpts_per_case},
          {"mean_excerpts_per_case", mean_excerpts_per_case}};
}

CorpusStats catalog_stats(const CaseCatalog& catalog, const AnnotationSet& annotations) {
  CorpusStats s;
  s.case_count = catalog.size();
  for (Rating r : kAllRatings) s.rating_histogram[r] = 0;
  std::set<std::string> clusters;
  for (const auto& c : catalog) {
    ++s.rating_histogram[c.rating];
    if (c.cluster_id) {
      clusters.insert(*c.cluster_id);
    } else {
      ++s.standalone_count;
    }
  }
  s.cluster_count = clusters.size();
  s.annotation_count = annotations.size();

  std::set<std::string> used_excerpts;
  for (const auto& a : annotations.approved()) used_excerpts.insert(a.excerpt_id);
  std::size_t words = 0;
  for (const auto& id : used_excerpts) words += annotations.excerpt(id).word_count;
  s.mean_excerpt_words =
      used_excerpts.empty() ? 0.0 : static_cast<double>(words) / used_excerpts.size();

  const auto per_case = annotations.excerpts_by_case();
  if (!per_case.empty()) {
    s.min_excerpts_per_case = std::numeric_limits<std::size_t>::max();
    std::size_t total = 0;
    for (const auto& [_, ex] : per_case) {
      s.min_excerpts_per_case = std::min(s.min_excerpts_per_case, ex.size());
      s.max_excerpts_per_case = std::max(s.max_excerpts_per_case, ex.size());
      total += ex.size();
    }
    s.mean_excerpts_per_case = static_cast<double>(total) / per_case.size();
  }
  return s;
}

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

json read_json_file(const std::filesystem::path& path) {
  const std::string body = read_file(path);
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; convert to a line number.
    const std::size_t offset = std::min<std::size_t>(e.byte, body.size());
    const auto line = 1 + std::count(body.begin(), body.begin() + offset, '\n');
    throw Error(ErrorKind::kParse,
                path.string() + ": JSON parse error at line " + std::to_string(line) + ": " + e.what());
  }
}

}  // namespace privlabel
