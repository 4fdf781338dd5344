#include "privlabel/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "privlabel/error.hpp"

namespace privlabel {

ClassMetrics metrics_from_counts(std::size_t true_pos, std::size_t false_pos,
                                 std::size_t false_neg) {
  ClassMetrics m;
  m.support = true_pos + false_neg;
  const std::size_t predicted = true_pos + false_pos;
  if (predicted == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(true_pos) / static_cast<double>(predicted);
  }
  if (m.support == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = static_cast<double>(true_pos) / static_cast<double>(m.support);
  }
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
  return m;
}

ClassReport report_from_confusion(const Confusion& c) {
  ClassReport r;
  r.confusion = c;
  r.classes[1] = metrics_from_counts(c.tp, c.fp, c.fn);
  // For class 0 the roles flip: a true negative is its true positive.
  r.classes[0] = metrics_from_counts(c.tn, c.fn, c.fp);
  return r;
}

ClassReport report_from_predictions(std::span<const int> gold, std::span<const int> predicted) {
  if (gold.size() != predicted.size()) {
    throw Error(ErrorKind::kPrecondition, "gold and predicted lengths differ");
  }
  Confusion c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if ((gold[i] != 0 && gold[i] != 1) || (predicted[i] != 0 && predicted[i] != 1)) {
      throw Error(ErrorKind::kPrecondition, "labels must be 0 or 1");
    }
    if (gold[i] == 1) {
      (predicted[i] == 1 ? c.tp : c.fn) += 1;
    } else {
      (predicted[i] == 1 ? c.fp : c.tn) += 1;
    }
  }
  return report_from_confusion(c);
}

nlohmann::json ClassReport::to_json() const {
  nlohmann::json cls = nlohmann::json::array();
  for (int c = 0; c < 2; ++c) {
    const auto& m = classes[c];
    cls.push_back({{"class", c},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"f1", m.f1},
                   {"support", m.support},
                   {"precision_undefined", m.precision_undefined},
                   {"recall_undefined", m.recall_undefined}});
  }
  return {{"set", set_name},
          {"model_id", model_id},
          {"sampling", sampling},
          {"classes", cls},
          {"confusion",
           {{"tp", confusion.tp}, {"fp", confusion.fp}, {"fn", confusion.fn}, {"tn", confusion.tn}}},
          {"abstained", abstained}};
}

ClassReport evaluate(const Matcher& matcher, std::span<const TextPair> pairs, std::string set_name,
                     kernels::Exec exec) {
  if (pairs.empty()) throw Error(ErrorKind::kPrecondition, "cannot evaluate an empty pair set");
  // -1 marks an abstention.
  std::vector<int> predicted(pairs.size());
  const auto n = static_cast<std::int64_t>(pairs.size());
  const bool parallel = exec == kernels::Exec::kParallel;
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const auto s = matcher.score(pairs[i].case_title, pairs[i].excerpt);
      predicted[i] = s.abstained ? -1 : (matcher.predict(s) ? 1 : 0);
    } catch (...) {
#pragma omp critical(privlabel_eval_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<int> gold_kept, pred_kept;
  std::size_t abstained = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (predicted[i] < 0) {
      ++abstained;
      continue;
    }
    gold_kept.push_back(pairs[i].label);
    pred_kept.push_back(predicted[i]);
  }
  ClassReport r = report_from_predictions(gold_kept, pred_kept);
  r.set_name = std::move(set_name);
  r.model_id = matcher.id();
  r.abstained = abstained;
  return r;
}

PartitionedReport evaluate_partitioned(const Matcher& matcher, std::span<const TextPair> standalone,
                                       std::span<const TextPair> contrasting,
                                       kernels::Exec exec) {
  if (standalone.empty() || contrasting.empty()) {
    throw Error(ErrorKind::kPrecondition, "both standalone and contrasting sets must be non-empty");
  }
  return {evaluate(matcher, standalone, "standalone", exec),
          evaluate(matcher, contrasting, "contrasting", exec)};
}

// ---------------------------------------------------------------------------

namespace {

MetricStat stat_of(const std::vector<double>& xs) {
  MetricStat s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.stddev = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
  return s;
}

nlohmann::json stat_json(const MetricStat& s) { return {{"mean", s.mean}, {"std", s.stddev}}; }

}  // namespace

MeanReport aggregate_runs(std::span<const ClassReport> reports) {
  if (reports.size() < 2) {
    throw Error(ErrorKind::kPrecondition, "aggregate_runs needs at least 2 reports");
  }
  MeanReport out;
  out.set_name = reports.front().set_name;
  out.runs = reports.size();
  for (const auto& r : reports) {
    if (r.set_name != out.set_name) {
      throw Error(ErrorKind::kValidation, "aggregate_runs: mismatched test sets '" + out.set_name +
                                              "' and '" + r.set_name + "'");
    }
  }
  // Sort each metric's values first so the result does not depend on the
  // order of `reports` (floating-point sums are order-sensitive).
  const auto collect = [&](int c, auto getter) {
    std::vector<double> xs;
    for (const auto& r : reports) xs.push_back(getter(r.classes[c]));
    std::sort(xs.begin(), xs.end());
    return stat_of(xs);
  };
  for (int c = 0; c < 2; ++c) {
    out.classes[c].precision = collect(c, [](const ClassMetrics& m) { return m.precision; });
    out.classes[c].recall = collect(c, [](const ClassMetrics& m) { return m.recall; });
    out.classes[c].f1 = collect(c, [](const ClassMetrics& m) { return m.f1; });
    out.classes[c].support =
        collect(c, [](const ClassMetrics& m) { return static_cast<double>(m.support); });
  }
  return out;
}

nlohmann::json MeanReport::to_json() const {
  nlohmann::json cls = nlohmann::json::array();
  for (int c = 0; c < 2; ++c) {
    cls.push_back({{"class", c},
                   {"precision", stat_json(classes[c].precision)},
                   {"recall", stat_json(classes[c].recall)},
                   {"f1", stat_json(classes[c].f1)},
                   {"support", stat_json(classes[c].support)}});
  }
  return {{"set", set_name}, {"runs", runs}, {"classes", cls}};
}

std::vector<SweepCell> sweep_ratios(std::span<const Strategy> strategies,
                                    std::span<const std::uint32_t> ratios, int runs,
                                    const RunEvaluator& evaluate_run) {
  if (runs < 2) throw Error(ErrorKind::kPrecondition, "sweep needs at least 2 runs per cell");
  std::vector<SweepCell> cells;
  for (std::uint32_t ratio : ratios) {
    for (Strategy s : strategies) {
      std::vector<ClassReport> standalone, contrasting;
      for (int run = 0; run < runs; ++run) {
        auto rep = evaluate_run(s, ratio, run);
        standalone.push_back(std::move(rep.standalone));
        contrasting.push_back(std::move(rep.contrasting));
      }
      cells.push_back({s, ratio, aggregate_runs(standalone), aggregate_runs(contrasting)});
    }
  }
  return cells;
}

std::string sweep_to_csv(std::span<const SweepCell> cells) {
  std::ostringstream out;
  out.precision(6);
  out << "ratio,strategy,class,set,precision_mean,precision_std,recall_mean,recall_std,"
         "f1_mean,f1_std,support_mean,support_std,runs\n";
  for (const auto& cell : cells) {
    for (int c = 0; c < 2; ++c) {
      for (const MeanReport* m : {&cell.standalone, &cell.contrasting}) {
        const auto& s = m->classes[c];
        out << "1:" << cell.ratio << ',' << (cell.strategy == Strategy::kRandom ? "RS" : "CBS")
            << ',' << c << ',' << m->set_name << ',' << s.precision.mean << ','
            << s.precision.stddev << ',' << s.recall.mean << ',' << s.recall.stddev << ','
            << s.f1.mean << ',' << s.f1.stddev << ',' << s.support.mean << ','
            << s.support.stddev << ',' << m->runs << '\n';
      }
    }
  }
  return out.str();
}

nlohmann::json sweep_to_json(std::span<const SweepCell> cells, const nlohmann::json& provenance) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& cell : cells) {
    rows.push_back({{"strategy", cell.strategy == Strategy::kRandom ? "RS" : "CBS"},
                    {"ratio", cell.ratio},
                    {"standalone", cell.standalone.to_json()},
                    {"contrasting", cell.contrasting.to_json()}});
  }
  return {{"provenance", provenance}, {"cells", rows}};
}

}  // namespace privlabel
