#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "privlabel/corpus.hpp"
#include "privlabel/matchers.hpp"
#include "privlabel/rng.hpp"

namespace testsupport {

using namespace privlabel;

inline std::filesystem::path data_dir() { return PRIVLABEL_DATA_DIR; }
inline std::filesystem::path schema_dir() { return PRIVLABEL_SCHEMA_DIR; }
inline std::filesystem::path fixture_dir() { return PRIVLABEL_TEST_FIXTURES; }

struct SmallCorpus {
  CaseCatalog catalog;
  AnnotationSet annotations;
  ClusterSet clusters;
};

// Cases c0..c{n-1}; case i gets excerpts[i] distinct excerpts. `groups`
// lists clusters as vectors of case indices (size >= 2).
inline SmallCorpus make_corpus(const std::vector<std::size_t>& excerpts,
                               const std::vector<std::vector<std::size_t>>& groups = {}) {
  SmallCorpus c;
  std::vector<Case> cases;
  for (std::size_t i = 0; i < excerpts.size(); ++i) {
    cases.push_back(Case{"c" + std::to_string(i), "case title " + std::to_string(i),
                         kAllRatings[i % 4], std::nullopt});
  }
  c.catalog = CaseCatalog(cases);
  std::vector<AnnotationRecord> records;
  for (std::size_t i = 0; i < excerpts.size(); ++i) {
    for (std::size_t k = 0; k < excerpts[i]; ++k) {
      records.push_back({"c" + std::to_string(i), "svc" + std::to_string(k % 3),
                         "excerpt " + std::to_string(k) + " of case " + std::to_string(i), true});
    }
  }
  c.annotations = ingest_annotations(records, c.catalog);
  nlohmann::json cl = nlohmann::json::array();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    nlohmann::json ids = nlohmann::json::array();
    for (auto i : groups[g]) ids.push_back("c" + std::to_string(i));
    cl.push_back({{"cluster_id", "k" + std::to_string(g)}, {"case_ids", ids}});
  }
  c.clusters = load_clusters(cl, c.catalog);
  return c;
}

// Topic-keyword pairs: a positive excerpt contains its case's keyword, a
// negative excerpt contains another case's keyword. Filler words carry no
// signal.
struct SeparableCorpus {
  std::vector<TextPair> train;
  std::vector<TextPair> test;
  std::vector<std::string> unlabeled;  // pretraining text
};

inline SeparableCorpus make_separable_corpus(std::uint64_t seed, std::size_t n_train = 400,
                                             std::size_t n_test = 100,
                                             std::size_t n_unlabeled = 4000) {
  static const char* topics[] = {"location",  "cookies",  "email",    "payment", "children",
                                 "camera",    "contacts", "deletion", "encryption", "advertising"};
  static const char* filler[] = {"we",   "may",  "use",  "your", "the",         "service", "data",
                                 "and",  "to",   "for",  "our",  "information", "collect", "share",
                                 "with"};
  Rng rng(seed);
  const auto excerpt = [&](std::size_t topic) {
    const std::size_t n = 6 + rng.below(6);
    const std::size_t at = rng.below(n);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) s += ' ';
      s += i == at ? topics[topic] : filler[rng.below(15)];
    }
    return s;
  };
  const auto title = [](std::size_t c) { return std::string("case about ") + topics[c]; };
  const auto make = [&](std::size_t n) {
    std::vector<TextPair> out;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = rng.below(10);
      const int label = static_cast<int>(i % 2);
      const std::size_t t = label ? c : (c + 1 + rng.below(9)) % 10;
      out.push_back({"c" + std::to_string(c), "x" + std::to_string(i), title(c), excerpt(t), label});
    }
    return out;
  };
  SeparableCorpus s;
  s.train = make(n_train);
  s.test = make(n_test);
  for (std::size_t i = 0; i < n_unlabeled; ++i) {
    const std::size_t c = rng.below(10);
    s.unlabeled.push_back(title(c) + " " + excerpt(c));
  }
  return s;
}

// Matcher with fixed probabilities per (title, excerpt); unknown pairs get
// `fallback`.
class TableMatcher final : public Matcher {
 public:
  explicit TableMatcher(double threshold = 0.5, double fallback = 0.0)
      : Matcher(threshold), fallback_(fallback) {}
  void set(const std::string& title, const std::string& excerpt, double p) {
    table_[title + '\x1f' + excerpt] = p;
  }
  MatchScore score(std::string_view title, std::string_view excerpt) const override {
    auto it = table_.find(std::string(title) + '\x1f' + std::string(excerpt));
    const double p = it == table_.end() ? fallback_ : it->second;
    return MatchScore{p, p, false, false};
  }
  std::string id() const override { return "table"; }

 private:
  std::map<std::string, double> table_;
  double fallback_;
};

// Probability from word overlap between title and excerpt.
class OverlapMatcher final : public Matcher {
 public:
  OverlapMatcher() : Matcher(0.5) {}
  MatchScore score(std::string_view title, std::string_view excerpt) const override;
  std::string id() const override { return "overlap"; }
};

inline MatchScore OverlapMatcher::score(std::string_view title, std::string_view excerpt) const {
  const auto a = privlabel::Vocabulary::split_words(title);
  const auto b = privlabel::Vocabulary::split_words(excerpt);
  std::size_t hits = 0;
  for (const auto& w : a) {
    if (w.size() > 3 && std::find(b.begin(), b.end(), w) != b.end()) ++hits;
  }
  const double p = a.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(a.size());
  return MatchScore{p, p, false, false};
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("privlabel-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testsupport
