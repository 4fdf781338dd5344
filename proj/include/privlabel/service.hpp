#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "privlabel/corpus.hpp"
#include "privlabel/labeler.hpp"
#include "privlabel/matchers.hpp"

namespace httplib {
class Server;
}

namespace privlabel {

enum class Vote { kUp, kDown };
std::string_view to_string(Vote v);
Vote parse_vote(std::string_view s);

struct FeedbackEvent {
  std::string match_id;
  Vote vote = Vote::kUp;
  std::string client_id;
  std::string timestamp;

  friend bool operator==(const FeedbackEvent&, const FeedbackEvent&) = default;
  nlohmann::json to_json() const;
  static FeedbackEvent from_json(const nlohmann::json& j);
};

using TimestampClock = std::function<std::string()>;

// Append-only event log (feedback.jsonl) with an in-memory latest-wins view
// per (client, match). feedback.index.json caches the aggregates and is
// rebuilt from the log on open. An empty directory path keeps everything in
// memory.
class FeedbackStore {
 public:
  explicit FeedbackStore(std::filesystem::path dir = {}, TimestampClock clock = utc_now_iso8601);

  FeedbackEvent record(std::string match_id, Vote vote, std::string client_id);
  void append(const FeedbackEvent& e);

  FeedbackCounts counts(const std::string& match_id) const;
  std::map<std::string, FeedbackCounts> aggregates() const;
  // Latest event per (client, match), in arrival order of those events.
  std::vector<FeedbackEvent> retained() const;
  std::vector<FeedbackEvent> log() const;
  std::size_t event_count() const;

  void flush();
  void write_index() const;
  const std::filesystem::path& dir() const { return dir_; }

  // Brute-force replay used to cross-check the incremental aggregates.
  static std::map<std::string, FeedbackCounts> recount(std::span<const FeedbackEvent> log);

 private:
  void apply(const FeedbackEvent& e);

  std::filesystem::path dir_;
  TimestampClock clock_;
  mutable std::mutex mu_;
  std::ofstream out_;
  std::vector<FeedbackEvent> log_;
  // (client, match) -> index into log_
  std::map<std::pair<std::string, std::string>, std::size_t> latest_;
  std::map<std::string, FeedbackCounts> agg_;
};

struct MatchRef {
  std::string service;
  std::size_t segment_index = 0;
  std::string case_id;
  std::string excerpt;
  double probability = 0.0;
};

// Labels keyed by service id, mirrored to <dir>/<service>.json when a
// directory is given. Evidence matches are indexed by match id.
class LabelStore {
 public:
  explicit LabelStore(std::filesystem::path dir = {});

  void put(const PrivacyLabel& label);
  std::optional<PrivacyLabel> get(const std::string& service) const;
  std::optional<MatchRef> match(const std::string& match_id) const;
  std::size_t size() const;

 private:
  void index(const PrivacyLabel& label);

  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, PrivacyLabel> labels_;
  std::map<std::string, MatchRef> matches_;
};

struct ExportedFeedback {
  std::string match_id;
  Vote vote = Vote::kUp;
  std::string client_id;
  std::string timestamp;
  std::string service;
  std::size_t segment_index = 0;
  std::string case_id;
  std::string excerpt;
  double probability = 0.0;

  friend bool operator==(const ExportedFeedback&, const ExportedFeedback&) = default;
  nlohmann::json to_json() const;
  static ExportedFeedback from_json(const nlohmann::json& j);
};

std::vector<ExportedFeedback> parse_feedback_export(std::string_view jsonl);

struct ApiResponse {
  int status = 200;
  nlohmann::json body = nlohmann::json::object();
  // Set for non-JSON payloads (JSONL export).
  std::optional<std::string> text;
  std::string content_type = "application/json";

  std::string payload() const { return text ? *text : body.dump(); }
};

ApiResponse error_response(int status, std::string_view code, std::string detail);

struct ServiceOptions {
  // Policies with more segments than this are analyzed as background jobs.
  std::size_t async_segment_threshold = 300;
  std::optional<double> threshold;
};

class LabelService {
 public:
  LabelService(CaseCatalog catalog, std::shared_ptr<const Matcher> matcher,
               std::shared_ptr<LabelStore> labels, std::shared_ptr<FeedbackStore> feedback,
               ServiceOptions options = {});
  ~LabelService();
  LabelService(const LabelService&) = delete;
  LabelService& operator=(const LabelService&) = delete;

  ApiResponse get_label(const std::string& service_id) const;
  ApiResponse analyze(const nlohmann::json& body);
  ApiResponse get_job(const std::string& job_id) const;
  ApiResponse submit_feedback(const nlohmann::json& body);
  ApiResponse export_feedback(const std::string& since) const;
  std::vector<ExportedFeedback> export_records(const std::string& since) const;
  ApiResponse cases() const;
  ApiResponse health() const;

  // Label document with feedback counts attached to every evidence item.
  nlohmann::json render_label(const PrivacyLabel& label) const;
  // Runs the full segment -> scan -> label pipeline synchronously.
  PrivacyLabel analyze_now(const std::string& service, std::string_view text) const;

  void wait_for_jobs();
  void mount(httplib::Server& server);

 private:
  struct Job {
    std::string id;
    std::string service;
    std::size_t segment_count = 0;
    std::string status = "pending";
    std::string error;
  };

  ApiResponse guarded(const std::function<ApiResponse()>& fn) const;
  nlohmann::json job_json(const Job& job) const;

  CaseCatalog catalog_;
  std::shared_ptr<const Matcher> matcher_;
  std::shared_ptr<LabelStore> labels_;
  std::shared_ptr<FeedbackStore> feedback_;
  ServiceOptions options_;

  mutable std::mutex jobs_mu_;
  std::map<std::string, Job> jobs_;
  std::map<std::string, std::string> content_cache_;  // content key -> service id
  std::vector<std::thread> workers_;
};

}  // namespace privlabel
