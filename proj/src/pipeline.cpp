#include "privlabel/pipeline.hpp"

#include <algorithm>
#include <set>

#include "privlabel/error.hpp"
#include "privlabel/rng.hpp"
#include "privlabel/text.hpp"

namespace privlabel {

Corpus load_corpus(const std::filesystem::path& dir) {
  for (const char* name : {"cases.json", "annotations.jsonl", "clusters.json"}) {
    if (!std::filesystem::exists(dir / name)) {
      throw Error(ErrorKind::kNotFound, "missing corpus file " + (dir / name).string());
    }
  }
  Corpus c;
  c.catalog = ingest_cases_file(dir / "cases.json");
  c.clusters = load_clusters_file(dir / "clusters.json", c.catalog);
  c.annotations = ingest_annotations_file(dir / "annotations.jsonl", c.catalog);
  return c;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "cases.json", corpus.catalog.to_json().dump(2) + "\n");
  write_file(dir / "clusters.json", corpus.clusters.to_json().dump(2) + "\n");
  std::string body;
  for (const auto& line : corpus.annotations.to_jsonl_lines()) body += line + "\n";
  write_file(dir / "annotations.jsonl", body);
}

std::vector<std::string> corpus_texts(const Corpus& corpus) {
  std::vector<std::string> texts;
  std::set<std::string> seen;
  for (const auto& a : corpus.annotations.approved()) {
    if (seen.insert(a.excerpt_id).second) {
      texts.push_back(corpus.annotations.excerpt(a.excerpt_id).text);
    }
  }
  for (const auto& c : corpus.catalog) texts.push_back(c.title);
  return texts;
}

std::string file_hash(const std::filesystem::path& path) {
  return text::hex64(text::fnv1a64(read_file(path)));
}

RunManifest::RunManifest(std::string command)
    : command_(std::move(command)), last_(std::chrono::steady_clock::now()) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  if (std::filesystem::is_regular_file(path)) {
    inputs_[path.string()] = file_hash(path);
  } else if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = text::fnv1a64("");
    for (const auto& f : files) {
      h = text::fnv1a64(std::filesystem::relative(f, path).string() + file_hash(f), h);
    }
    inputs_[path.string()] = text::hex64(h);
  } else {
    inputs_[path.string()] = "";
  }
}

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }

void RunManifest::mark(const std::string& phase) {
  const auto now = std::chrono::steady_clock::now();
  timings_.emplace_back(phase, std::chrono::duration<double>(now - last_).count());
  last_ = now;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json timings = nlohmann::json::object();
  for (const auto& [k, v] : timings_) timings[k] = v;
  nlohmann::json out = {{"command", command_}, {"config", config_},   {"seed", seed_},
                        {"inputs", inputs_},   {"outputs", outputs_}, {"timings_s", timings}};
  for (const auto& [k, v] : extra_.items()) out[k] = v;
  return out;
}

std::filesystem::path RunManifest::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  const auto path = dir / ("manifest-" + command_ + ".json");
  write_file(path, to_json().dump(2) + "\n");
  return path;
}

// ---------------------------------------------------------------------------

CellData prepare_cell(const Corpus& corpus, const DataSplit& split, const SamplingConfig& sampling) {
  CellData d;
  d.training_set = sample_training_set(split.train, corpus.annotations, corpus.clusters, sampling);
  d.train = to_text_pairs(d.training_set.pairs, corpus.catalog);
  // Validation and test pairs depend on the split seed only, so every cell
  // of a sweep is scored on the same frozen pairs.
  const auto frozen = [&](const std::vector<Annotation>& part, const char* tag) {
    if (part.empty()) return std::vector<TextPair>{};
    const auto set = build_eval_pairs(part, corpus.annotations, corpus.clusters,
                                      Rng::derived(split.seed, tag).below(1ULL << 62));
    return to_text_pairs(set.pairs, corpus.catalog);
  };
  d.validation = frozen(split.validation, "validation");
  d.standalone = frozen(split.test_standalone, "standalone");
  d.contrasting = frozen(split.test_contrasting, "contrasting");
  return d;
}

PartitionedReport run_cell(const Corpus& corpus, const DataSplit& split, Strategy strategy,
                           std::uint32_t ratio, std::uint64_t seed, const TrainConfig& train,
                           const BaseModel* base) {
  const CellData d = prepare_cell(corpus, split, SamplingConfig{strategy, ratio, seed});
  TrainConfig cfg = train;
  cfg.seed = seed;
  TrainedMatcher tm = base ? train_cross_encoder(d.train, d.validation, cfg, *base)
                           : train_cross_encoder(d.train, d.validation, cfg);
  PartitionedReport rep = evaluate_partitioned(*tm.matcher, d.standalone, d.contrasting);
  const nlohmann::json sampling = {{"strategy", to_string(strategy)}, {"ratio", ratio},
                                   {"seed", seed}};
  rep.standalone.sampling = sampling;
  rep.contrasting.sampling = sampling;
  return rep;
}

}  // namespace privlabel
