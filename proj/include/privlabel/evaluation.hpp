#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "privlabel/kernels.hpp"
#include "privlabel/matchers.hpp"
#include "privlabel/sampling.hpp"

namespace privlabel {

// Class 0 = disparate pair, class 1 = matching pair.
struct Confusion {
  std::size_t tp = 0;  // gold 1, predicted 1
  std::size_t fp = 0;  // gold 0, predicted 1
  std::size_t fn = 0;  // gold 1, predicted 0
  std::size_t tn = 0;  // gold 0, predicted 0
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  // Set when the metric was 0/0 and reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct ClassReport {
  std::string set_name;
  std::string model_id;
  nlohmann::json sampling = nlohmann::json::object();
  std::array<ClassMetrics, 2> classes;
  Confusion confusion;
  std::size_t abstained = 0;

  const ClassMetrics& operator[](int c) const { return classes.at(static_cast<std::size_t>(c)); }
  nlohmann::json to_json() const;
};

ClassMetrics metrics_from_counts(std::size_t true_pos, std::size_t false_pos,
                                 std::size_t false_neg);
ClassReport report_from_confusion(const Confusion& c);
// gold/predicted values are 0 or 1.
ClassReport report_from_predictions(std::span<const int> gold, std::span<const int> predicted);

// Scores every pair, predicts at the matcher's threshold, and reports both
// classes. Abstained pairs are excluded and counted.
ClassReport evaluate(const Matcher& matcher, std::span<const TextPair> pairs,
                     std::string set_name = "test",
                     kernels::Exec exec = kernels::Exec::kParallel);

struct PartitionedReport {
  ClassReport standalone;
  ClassReport contrasting;
};

PartitionedReport evaluate_partitioned(const Matcher& matcher, std::span<const TextPair> standalone,
                                       std::span<const TextPair> contrasting,
                                       kernels::Exec exec = kernels::Exec::kParallel);

struct MetricStat {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1)
};

struct ClassStats {
  MetricStat precision, recall, f1, support;
};

struct MeanReport {
  std::string set_name;
  std::size_t runs = 0;
  std::array<ClassStats, 2> classes;

  nlohmann::json to_json() const;
};

// Element-wise mean and sample standard deviation. Needs >= 2 reports, all
// for the same test set.
MeanReport aggregate_runs(std::span<const ClassReport> reports);

struct SweepCell {
  Strategy strategy = Strategy::kCluster;
  std::uint32_t ratio = 1;
  MeanReport standalone;
  MeanReport contrasting;
};

// Trains and evaluates one (strategy, ratio, run) cell.
using RunEvaluator = std::function<PartitionedReport(Strategy, std::uint32_t ratio, int run)>;

std::vector<SweepCell> sweep_ratios(std::span<const Strategy> strategies,
                                    std::span<const std::uint32_t> ratios, int runs,
                                    const RunEvaluator& evaluate_run);

// One row per (ratio, strategy, class, set) with mean and std columns.
std::string sweep_to_csv(std::span<const SweepCell> cells);
nlohmann::json sweep_to_json(std::span<const SweepCell> cells, const nlohmann::json& provenance);

}  // namespace privlabel
