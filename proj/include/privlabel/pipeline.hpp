#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "privlabel/corpus.hpp"
#include "privlabel/evaluation.hpp"
#include "privlabel/matchers.hpp"
#include "privlabel/sampling.hpp"

namespace privlabel {

struct Corpus {
  CaseCatalog catalog;
  AnnotationSet annotations;
  ClusterSet clusters;
};

// Reads cases.json, annotations.jsonl and clusters.json from `dir`.
Corpus load_corpus(const std::filesystem::path& dir);
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

// Distinct approved excerpts plus case titles.
std::vector<std::string> corpus_texts(const Corpus& corpus);

std::string file_hash(const std::filesystem::path& path);

class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void add(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
  // Records the time since the previous mark (or construction) under `phase`.
  void mark(const std::string& phase);

  nlohmann::json to_json() const;
  // Writes <dir>/manifest-<command>.json and returns its path.
  std::filesystem::path write(const std::filesystem::path& dir) const;

 private:
  std::string command_;
  nlohmann::json config_ = nlohmann::json::object();
  std::uint64_t seed_ = 0;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  nlohmann::json extra_ = nlohmann::json::object();
  std::vector<std::pair<std::string, double>> timings_;
  std::chrono::steady_clock::time_point last_;
};

struct CellData {
  std::vector<TextPair> train;
  std::vector<TextPair> validation;
  std::vector<TextPair> standalone;
  std::vector<TextPair> contrasting;
  TrainingSet training_set;
};

// Training pairs for one (strategy, ratio, seed) on a fixed split, plus the
// frozen 1:1 validation and test pairs.
CellData prepare_cell(const Corpus& corpus, const DataSplit& split, const SamplingConfig& sampling);

// Trains one cross-encoder and evaluates it on both test partitions.
PartitionedReport run_cell(const Corpus& corpus, const DataSplit& split, Strategy strategy,
                           std::uint32_t ratio, std::uint64_t seed, const TrainConfig& train,
                           const BaseModel* base = nullptr);

}  // namespace privlabel
