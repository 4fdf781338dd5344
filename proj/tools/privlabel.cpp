// Command-line driver: ingest, pretrain, sample, train, eval, sweep,
// analyze, serve, perplexity.

#include <httplib.h>

#include <CLI11.hpp>
#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "privlabel/checkpoint.hpp"
#include "privlabel/error.hpp"
#include "privlabel/evaluation.hpp"
#include "privlabel/labeler.hpp"
#include "privlabel/perplexity.hpp"
#include "privlabel/pipeline.hpp"
#include "privlabel/rng.hpp"
#include "privlabel/service.hpp"
#include "privlabel/text.hpp"

namespace fs = std::filesystem;
using namespace privlabel;
using json = nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  fs::path out_dir = "out";
};

fs::path corpus_dir(const Globals& g, const std::string& flag) {
  return flag.empty() ? g.out_dir / "corpus" : fs::path(flag);
}

Corpus require_corpus(const fs::path& dir) {
  if (!fs::exists(dir / "cases.json")) {
    throw Error(ErrorKind::kNotFound,
                "no corpus at " + dir.string() + "; run 'privlabel ingest' first");
  }
  return load_corpus(dir);
}

fs::path resolve_checkpoint(const Globals& g, const std::string& flag) {
  if (!flag.empty()) return flag;
  const auto pointer = g.out_dir / "train" / "checkpoint.txt";
  if (!fs::exists(pointer)) {
    throw Error(ErrorKind::kNotFound, "no checkpoint given and " + pointer.string() + " is missing");
  }
  return text::trim(read_file(pointer));
}

std::shared_ptr<Matcher> load_matcher(const fs::path& dir) {
  if (!is_checkpoint_dir(dir)) {
    throw Error(ErrorKind::kNotFound, "no checkpoint at " + dir.string());
  }
  return CrossEncoderMatcher::from_checkpoint(load_checkpoint(dir), dir.filename().string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto t = text::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

DataSplit load_or_make_split(const Globals& g, const Corpus& corpus, const std::string& flag) {
  const fs::path path = flag.empty() ? g.out_dir / "sample" / "splits.json" : fs::path(flag);
  if (fs::exists(path)) return DataSplit::from_json(read_json_file(path), corpus.annotations);
  if (!flag.empty()) throw Error(ErrorKind::kNotFound, "missing split file " + path.string());
  return split_dataset(corpus.annotations.approved(), corpus.catalog, SplitRatios{}, g.seed,
                       SplitGranularity::kAnnotation, &corpus.annotations);
}

void print_report(const ClassReport& r) {
  for (int c = 0; c < 2; ++c) {
    std::printf("  %-12s class %d  P=%.4f R=%.4f F1=%.4f support=%zu\n", r.set_name.c_str(), c,
                r[c].precision, r[c].recall, r[c].f1, r[c].support);
  }
}

std::string reports_csv(const std::vector<ClassReport>& reports) {
  std::ostringstream out;
  out << "set,class,precision,recall,f1,support,model_id\n";
  for (const auto& r : reports) {
    for (int c = 0; c < 2; ++c) {
      out << r.set_name << ',' << c << ',' << r[c].precision << ',' << r[c].recall << ','
          << r[c].f1 << ',' << r[c].support << ',' << r.model_id << '\n';
    }
  }
  return out.str();
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-policy case matching and labeling pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI config; [section] names match subcommands");
  Globals g;
  std::string out_dir = "out";
  app.add_option("--seed", g.seed, "Seed for splits, sampling and training")->capture_default_str();
  app.add_option("--out-dir", out_dir, "Directory for artifacts")->capture_default_str();

  // ingest -----------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and store it under OUT/corpus");
  std::string in_dir, in_cases, in_annotations, in_clusters;
  ingest->add_option("dir", in_dir, "Directory holding the three files below")
      ->check(CLI::ExistingDirectory);
  ingest->add_option("--cases", in_cases, "cases.json (default DIR/cases.json)");
  ingest->add_option("--annotations", in_annotations, "annotations.jsonl (default DIR/...)");
  ingest->add_option("--clusters", in_clusters, "clusters.json (default DIR/...)");

  // pretrain ---------------------------------------------------------------
  auto* pretrain = app.add_subcommand("pretrain", "Masked-LM pretraining of the encoder");
  std::string corpus_flag;
  PretrainConfig pre;
  std::vector<std::string> extra_text;
  pretrain->add_option("--corpus", corpus_flag, "Corpus directory (default OUT/corpus)");
  pretrain->add_option("--epochs", pre.epochs)->capture_default_str();
  pretrain->add_option("--lr", pre.learning_rate)->capture_default_str();
  pretrain->add_option("--batch-size", pre.batch_size)->capture_default_str();
  pretrain->add_option("--mask-prob", pre.mask_prob)->capture_default_str();
  pretrain->add_option("--d-model", pre.encoder.d_model)->capture_default_str();
  pretrain->add_option("--heads", pre.encoder.heads)->capture_default_str();
  pretrain->add_option("--layers", pre.encoder.layers)->capture_default_str();
  pretrain->add_option("--ffn", pre.encoder.ffn)->capture_default_str();
  pretrain->add_option("--max-len", pre.encoder.max_len)->capture_default_str();
  pretrain->add_option("--text", extra_text, "Extra plain-text files (one text per line)")
      ->check(CLI::ExistingFile);

  // sample -----------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "Split the corpus and build a training set");
  std::string strategy_name = "cbs";
  std::uint32_t ratio = 3;
  sample->add_option("--corpus", corpus_flag, "Corpus directory (default OUT/corpus)");
  sample->add_option("--strategy", strategy_name, "rs or cbs")
      ->check(CLI::IsMember({"rs", "cbs"}))
      ->capture_default_str();
  sample->add_option("--ratio", ratio, "Negatives per positive")->capture_default_str();

  // train ------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Fine-tune the cross-encoder");
  TrainConfig tc;
  std::string training_set_flag, splits_flag;
  bool calibrate = false;
  const auto add_train_flags = [&](CLI::App* sub) {
    sub->add_option("--base", tc.base_model_identifier, "MLM checkpoint directory or 'scratch'")
        ->capture_default_str();
    sub->add_option("--lr", tc.learning_rate)->capture_default_str();
    sub->add_option("--epochs", tc.epochs)->capture_default_str();
    sub->add_option("--batch-size", tc.batch_size)->capture_default_str();
    sub->add_option("--threshold", tc.threshold)->capture_default_str();
    sub->add_option("--max-grad-norm", tc.max_grad_norm)->capture_default_str();
  };
  train->add_option("--corpus", corpus_flag, "Corpus directory (default OUT/corpus)");
  train->add_option("--training-set", training_set_flag, "default OUT/sample/training_set.jsonl");
  train->add_option("--splits", splits_flag, "default OUT/sample/splits.json");
  train->add_flag("--calibrate", calibrate, "Pick the threshold maximizing validation F1");
  add_train_flags(train);

  // eval -------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Evaluate a matcher on the frozen test partitions");
  std::string checkpoint_flag, matcher_kind = "cross";
  double cosine_threshold = kDefaultCosineThreshold;
  eval->add_option("--corpus", corpus_flag, "Corpus directory (default OUT/corpus)");
  eval->add_option("--splits", splits_flag, "default OUT/sample/splits.json");
  eval->add_option("--checkpoint", checkpoint_flag, "default: last trained checkpoint");
  eval->add_option("--matcher", matcher_kind, "cross, cosine, prompt0 or prompt2")
      ->check(CLI::IsMember({"cross", "cosine", "prompt0", "prompt2"}))
      ->capture_default_str();
  eval->add_option("--cosine-threshold", cosine_threshold)->capture_default_str();

  // sweep ------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Strategy x ratio grid with repeated runs");
  std::string ratios_flag = "1,2,3,5", strategies_flag = "rs,cbs";
  int runs = 3;
  sweep->add_option("--corpus", corpus_flag, "Corpus directory (default OUT/corpus)");
  sweep->add_option("--ratios", ratios_flag)->capture_default_str();
  sweep->add_option("--strategies", strategies_flag)->capture_default_str();
  sweep->add_option("--runs", runs)->capture_default_str();
  add_train_flags(sweep);

  // analyze ----------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "Label a privacy policy");
  std::string policy_path, service_name, gold_path;
  std::optional<double> threshold_override;
  analyze->add_option("policy", policy_path, "Policy text file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--checkpoint", checkpoint_flag, "default: last trained checkpoint");
  analyze->add_option("--corpus", corpus_flag, "Corpus directory (default OUT/corpus)");
  analyze->add_option("--threshold", threshold_override, "Override the decision threshold");
  analyze->add_option("--service", service_name, "Service id (default: file stem)");
  analyze->add_option("--gold", gold_path, "Gold tags for a scan report")->check(CLI::ExistingFile);

  // serve ------------------------------------------------------------------
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  int port = 8080;
  std::string host = "127.0.0.1", store_flag;
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--checkpoint", checkpoint_flag, "default: last trained checkpoint");
  serve->add_option("--corpus", corpus_flag, "Corpus directory (default OUT/corpus)");
  serve->add_option("--store", store_flag, "Label and feedback store (default OUT/store)");

  // perplexity -------------------------------------------------------------
  auto* ppl = app.add_subcommand("perplexity", "Pseudo-perplexity per rating");
  std::string models_flag;
  std::size_t window = 8, stride = 4;
  std::string general_path;
  ppl->add_option("--models", models_flag, "Comma-separated checkpoints or uniform:<V>")->required();
  ppl->add_option("--corpus", corpus_flag, "Corpus directory (default OUT/corpus)");
  ppl->add_option("--window", window)->capture_default_str();
  ppl->add_option("--stride", stride)->capture_default_str();
  ppl->add_option("--general", general_path, "Comparison sentences, one per line")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  g.out_dir = out_dir;

  try {
    if (*ingest) {
      RunManifest m("ingest");
      for (auto [path, name] : {std::pair{&in_cases, "cases.json"},
                                {&in_annotations, "annotations.jsonl"},
                                {&in_clusters, "clusters.json"}}) {
        if (path->empty() && !in_dir.empty()) *path = (fs::path(in_dir) / name).string();
        if (path->empty() || !fs::is_regular_file(*path)) {
          std::cerr << "usage error: " << name << " not found"
                    << (path->empty() ? std::string() : " at " + *path) << "\n"
                    << ingest->help();
          return 2;
        }
      }
      Corpus c;
      c.catalog = ingest_cases_file(in_cases);
      c.clusters = load_clusters_file(in_clusters, c.catalog);
      c.annotations = ingest_annotations_file(in_annotations, c.catalog);
      const auto dir = g.out_dir / "corpus";
      save_corpus(c, dir);
      const auto stats = catalog_stats(c.catalog, c.annotations);
      std::cout << stats.to_json().dump(2) << "\n";
      for (const auto& p : {in_cases, in_annotations, in_clusters}) m.add_input(p);
      m.add_output(dir);
      m.add("stats", stats.to_json());
      m.mark("ingest");
      m.write(g.out_dir);
    } else if (*pretrain) {
      RunManifest m("pretrain");
      const auto dir = corpus_dir(g, corpus_flag);
      const Corpus c = require_corpus(dir);
      auto texts = corpus_texts(c);
      for (const auto& f : extra_text) {
        std::istringstream in(read_file(f));
        for (std::string line; std::getline(in, line);) {
          if (!text::is_blank(line)) texts.push_back(line);
        }
        m.add_input(f);
      }
      pre.seed = g.seed;
      const auto res = pretrain_mlm(texts, pre);
      const auto path = save_checkpoint(res.checkpoint, g.out_dir / "models");
      std::cout << "mlm loss " << res.epoch_loss.front() << " -> " << res.epoch_loss.back()
                << "\ncheckpoint " << path.string() << "\n";
      m.set_seed(g.seed);
      m.set_config(res.checkpoint.train_config);
      m.add_input(dir);
      m.add_output(path);
      m.mark("pretrain");
      m.write(g.out_dir);
    } else if (*sample) {
      RunManifest m("sample");
      const auto dir = corpus_dir(g, corpus_flag);
      const Corpus c = require_corpus(dir);
      SamplingConfig sc{parse_strategy(strategy_name), ratio, g.seed};
      sc.validate();
      const DataSplit split = split_dataset(c.annotations.approved(), c.catalog, SplitRatios{},
                                            g.seed, SplitGranularity::kAnnotation, &c.annotations);
      const TrainingSet ts = sample_training_set(split.train, c.annotations, c.clusters, sc);
      for (const auto& w : ts.warnings) {
        std::cerr << "warning: case " << w.case_id << " got " << w.produced << " of "
                  << w.requested << " negatives\n";
      }
      const auto out = g.out_dir / "sample";
      fs::create_directories(out);
      write_file(out / "training_set.jsonl", training_set_to_jsonl(ts, c.catalog));
      write_file(out / "splits.json", split.to_json().dump(2) + "\n");
      std::cout << "pairs " << ts.pairs.size() << " (positives " << ts.positives()
                << ", negatives " << ts.negatives() << ")\n";
      m.set_seed(g.seed);
      m.set_config(sampling_manifest(ts, sc));
      m.add_input(dir);
      m.add_output(out / "training_set.jsonl");
      m.add_output(out / "splits.json");
      m.mark("sample");
      m.write(g.out_dir);
    } else if (*train) {
      RunManifest m("train");
      const auto dir = corpus_dir(g, corpus_flag);
      const Corpus c = require_corpus(dir);
      const fs::path ts_path = training_set_flag.empty() ? g.out_dir / "sample" / "training_set.jsonl"
                                                         : fs::path(training_set_flag);
      if (!fs::exists(ts_path)) {
        throw Error(ErrorKind::kNotFound, "missing training set " + ts_path.string());
      }
      const auto pairs = training_set_from_jsonl(read_file(ts_path));
      const auto train_pairs = to_text_pairs(pairs, c.catalog);
      const DataSplit split = load_or_make_split(g, c, splits_flag);
      const auto valid_set = build_eval_pairs(split.validation, c.annotations, c.clusters,
                                              Rng::derived(split.seed, "validation").below(1ULL << 62));
      const auto valid = to_text_pairs(valid_set.pairs, c.catalog);
      tc.seed = g.seed;
      TrainedMatcher tm = train_cross_encoder(train_pairs, valid, tc);
      for (const auto& e : tm.history) {
        std::printf("epoch %u  train %.5f  validation %.5f\n", e.epoch, e.train_loss,
                    e.validation_loss);
      }
      if (calibrate && !valid.empty()) {
        std::vector<ScoredLabel> scored;
        for (const auto& p : valid) {
          scored.push_back(ScoredLabel{tm.matcher->score(p.case_title, p.excerpt).probability, p.label});
        }
        tm.checkpoint.threshold = calibrate_threshold(scored);
        std::cout << "calibrated threshold " << tm.checkpoint.threshold << "\n";
      }
      tm.checkpoint.data_manifest = {{"training_set", file_hash(ts_path)},
                                     {"corpus", dir.string()}};
      const auto path = save_checkpoint(tm.checkpoint, g.out_dir / "models");
      fs::create_directories(g.out_dir / "train");
      write_file(g.out_dir / "train" / "checkpoint.txt", path.string() + "\n");
      std::cout << "checkpoint " << path.string() << "\n";
      m.set_seed(g.seed);
      m.set_config(tc.to_json());
      m.add_input(dir);
      m.add_input(ts_path);
      m.add_output(path);
      m.mark("train");
      m.write(g.out_dir);
    } else if (*eval) {
      RunManifest m("eval");
      const auto dir = corpus_dir(g, corpus_flag);
      const Corpus c = require_corpus(dir);
      const DataSplit split = load_or_make_split(g, c, splits_flag);
      const CellData d = prepare_cell(c, split, SamplingConfig{Strategy::kCluster, 1, g.seed});
      std::shared_ptr<Matcher> matcher;
      if (matcher_kind == "cross") {
        const auto ck = resolve_checkpoint(g, checkpoint_flag);
        matcher = load_matcher(ck);
        m.add_input(ck);
      } else if (matcher_kind == "cosine") {
        matcher = cosine_matcher(std::make_shared<HashingEmbedder>(), cosine_threshold);
      } else {
        matcher = prompt_matcher(std::make_shared<OpenAiClient>(OpenAiClient::Options{}),
                                 matcher_kind == "prompt2" ? 2 : 0);
      }
      const auto rep = evaluate_partitioned(*matcher, d.standalone, d.contrasting);
      print_report(rep.standalone);
      print_report(rep.contrasting);
      const auto out = g.out_dir / "eval";
      fs::create_directories(out);
      write_file(out / "results.json",
                 json{{"standalone", rep.standalone.to_json()},
                      {"contrasting", rep.contrasting.to_json()}}
                         .dump(2) +
                     "\n");
      write_file(out / "results.csv", reports_csv({rep.standalone, rep.contrasting}));
      m.set_seed(g.seed);
      m.set_config({{"matcher", matcher_kind}, {"model_id", matcher->id()}});
      m.add_input(dir);
      m.add_output(out / "results.json");
      m.add_output(out / "results.csv");
      m.mark("eval");
      m.write(g.out_dir);
    } else if (*sweep) {
      RunManifest m("sweep");
      const auto dir = corpus_dir(g, corpus_flag);
      const Corpus c = require_corpus(dir);
      std::vector<Strategy> strategies;
      for (const auto& s : split_list(strategies_flag)) strategies.push_back(parse_strategy(s));
      std::vector<std::uint32_t> ratios;
      for (const auto& r : split_list(ratios_flag)) {
        const long v = std::stol(r);
        if (v < 1) throw Error(ErrorKind::kValidation, "ratios must be >= 1");
        ratios.push_back(static_cast<std::uint32_t>(v));
      }
      const DataSplit split = split_dataset(c.annotations.approved(), c.catalog, SplitRatios{},
                                            g.seed, SplitGranularity::kAnnotation, &c.annotations);
      const auto cells = sweep_ratios(strategies, ratios, runs, [&](Strategy s, std::uint32_t r, int run) {
        const std::uint64_t seed = Rng::derived(g.seed, "run-" + std::to_string(run)).below(1ULL << 62);
        std::cerr << "cell " << to_string(s) << " 1:" << r << " run " << run << "\n";
        return run_cell(c, split, s, r, seed, tc);
      });
      const auto out = g.out_dir / "sweep";
      fs::create_directories(out);
      write_file(out / "results.csv", sweep_to_csv(cells));
      const json provenance = {{"seed", g.seed}, {"runs", runs}, {"train", tc.to_json()}};
      write_file(out / "results.json", sweep_to_json(cells, provenance).dump(2) + "\n");
      std::cout << sweep_to_csv(cells);
      m.set_seed(g.seed);
      m.set_config(provenance);
      m.add_input(dir);
      m.add_output(out / "results.csv");
      m.add_output(out / "results.json");
      m.mark("sweep");
      m.write(g.out_dir);
    } else if (*analyze) {
      RunManifest m("analyze");
      const auto dir = corpus_dir(g, corpus_flag);
      const Corpus c = require_corpus(dir);
      const auto ck = resolve_checkpoint(g, checkpoint_flag);
      const auto matcher = load_matcher(ck);
      const std::string body = read_file(policy_path);
      const auto segments = segment_policy(body);
      if (segments.empty()) throw Error(ErrorKind::kValidation, "policy file has no text");
      const std::string service =
          service_name.empty() ? fs::path(policy_path).stem().string() : service_name;
      const auto results = scan_policy(*matcher, segments, c.catalog, threshold_override, service);
      const auto label =
          build_label(ServiceMeta{service, utc_now_iso8601()}, results, segments, c.catalog);
      const auto out = g.out_dir / "analyze";
      fs::create_directories(out);
      write_file(out / "label.json", label.to_json().dump(2) + "\n");
      std::size_t matches = 0;
      for (const auto& r : results) matches += r.predicted;
      std::cout << "segments " << segments.size() << "\ncells " << results.size() << "\nmatches "
                << matches << "\ngrade " << to_string(label.grade) << "\n";
      for (Rating r : kAllRatings) {
        std::cout << "  " << to_string(r) << ": " << label.groups.at(r).size() << " cases\n";
      }
      json extra = {{"segments", segments.size()}, {"matches", matches},
                    {"grade", to_string(label.grade)}};
      if (!gold_path.empty()) {
        const auto gold = parse_gold_tags(read_json_file(gold_path));
        auto rep = evaluate_scan(results, gold, segments.size(), c.catalog);
        rep.model_id = matcher->id();
        std::cout << "scan report (class 1 = True, class 0 = False)\n";
        print_report(rep);
        write_file(out / "scan_report.json", rep.to_json().dump(2) + "\n");
        extra["scan_report"] = rep.to_json();
        m.add_input(gold_path);
      }
      m.set_config({{"threshold", threshold_override ? json(*threshold_override) : json(nullptr)},
                    {"service", service}});
      m.add("result", extra);
      m.add_input(policy_path);
      m.add_input(ck);
      m.add_output(out / "label.json");
      m.mark("analyze");
      m.write(g.out_dir);
    } else if (*serve) {
      const auto dir = corpus_dir(g, corpus_flag);
      const Corpus c = require_corpus(dir);
      const auto matcher = load_matcher(resolve_checkpoint(g, checkpoint_flag));
      const fs::path store = store_flag.empty() ? g.out_dir / "store" : fs::path(store_flag);
      auto labels = std::make_shared<LabelStore>(store / "labels");
      auto feedback = std::make_shared<FeedbackStore>(store / "feedback");
      LabelService service(c.catalog, matcher, labels, feedback);
      httplib::Server server;
      service.mount(server);
      if (!server.bind_to_port(host, port)) {
        throw Error(ErrorKind::kUnavailable,
                    "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
      }
      std::signal(SIGTERM, on_signal);
      std::signal(SIGINT, on_signal);
      std::thread watcher([&] {
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
      });
      std::cout << "listening on " << host << ":" << port << std::endl;
      server.listen_after_bind();
      g_stop = true;
      watcher.join();
      service.wait_for_jobs();
      feedback->flush();
      feedback->write_index();
      std::cout << "stopped; " << feedback->event_count() << " feedback events on disk" << std::endl;
    } else if (*ppl) {
      RunManifest m("perplexity");
      const auto dir = corpus_dir(g, corpus_flag);
      const Corpus c = require_corpus(dir);
      std::vector<std::shared_ptr<const MaskedLanguageModel>> models;
      for (const auto& spec : split_list(models_flag)) {
        models.push_back(load_mlm(spec));
        if (fs::exists(spec)) m.add_input(spec);
      }
      std::vector<ComparisonSentence> general;
      if (!general_path.empty()) {
        std::istringstream in(read_file(general_path));
        std::size_t i = 0;
        for (std::string line; std::getline(in, line);) {
          if (!text::is_blank(line)) general.push_back({"g" + std::to_string(i++), line});
        }
        m.add_input(general_path);
      }
      const auto rep =
          rating_perplexity_report(models, c.annotations, c.catalog, general, window, stride);
      const auto out = g.out_dir / "perplexity";
      fs::create_directories(out);
      write_file(out / "perplexity.csv", rep.to_csv());
      write_file(out / "summary.json", rep.summary_json().dump(2) + "\n");
      for (const auto& [model, groups] : rep.summary) {
        for (const auto& [group, s] : groups) {
          std::printf("%-24s %-8s n=%-4zu mean=%.4f median=%.4f\n", model.c_str(), group.c_str(),
                      s.count, s.mean, s.median);
        }
      }
      m.set_config({{"models", models_flag}, {"window", window}, {"stride", stride}});
      m.add_input(dir);
      m.add_output(out / "perplexity.csv");
      m.add_output(out / "summary.json");
      m.mark("perplexity");
      m.write(g.out_dir);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
