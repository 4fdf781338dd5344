#include "privlabel/service.hpp"

#include <httplib.h>

#include <iostream>
#include <sstream>

#include "privlabel/error.hpp"
#include "privlabel/text.hpp"

namespace privlabel {

using json = nlohmann::json;

std::string_view to_string(Vote v) { return v == Vote::kUp ? "up" : "down"; }

Vote parse_vote(std::string_view s) {
  if (s == "up") return Vote::kUp;
  if (s == "down") return Vote::kDown;
  throw Error(ErrorKind::kValidation, "vote must be 'up' or 'down', got '" + std::string(s) + "'");
}

json FeedbackEvent::to_json() const {
  return {{"match_id", match_id},
          {"vote", to_string(vote)},
          {"client_id", client_id},
          {"timestamp", timestamp}};
}

FeedbackEvent FeedbackEvent::from_json(const json& j) {
  return {j.at("match_id").get<std::string>(), parse_vote(j.at("vote").get<std::string>()),
          j.at("client_id").get<std::string>(), j.at("timestamp").get<std::string>()};
}

// ---------------------------------------------------------------------------
// FeedbackStore

FeedbackStore::FeedbackStore(std::filesystem::path dir, TimestampClock clock)
    : dir_(std::move(dir)), clock_(std::move(clock)) {
  if (dir_.empty()) return;
  std::filesystem::create_directories(dir_);
  const auto log_path = dir_ / "feedback.jsonl";
  if (std::filesystem::exists(log_path)) {
    std::istringstream in(read_file(log_path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::is_blank(line)) continue;
      try {
        apply(FeedbackEvent::from_json(json::parse(line)));
      } catch (const std::exception& e) {
        throw Error(ErrorKind::kParse, log_path.string() + ":" + std::to_string(line_no) + ": " +
                                           e.what());
      }
    }
  }
  out_.open(log_path, std::ios::app | std::ios::binary);
  if (!out_) throw Error(ErrorKind::kIo, "cannot open " + log_path.string() + " for append");
  write_index();
}

void FeedbackStore::apply(const FeedbackEvent& e) {
  auto key = std::make_pair(e.client_id, e.match_id);
  auto it = latest_.find(key);
  if (it != latest_.end()) {
    auto& c = agg_[e.match_id];
    (log_[it->second].vote == Vote::kUp ? c.up : c.down) -= 1;
  }
  log_.push_back(e);
  latest_[key] = log_.size() - 1;
  auto& c = agg_[e.match_id];
  (e.vote == Vote::kUp ? c.up : c.down) += 1;
}

FeedbackEvent FeedbackStore::record(std::string match_id, Vote vote, std::string client_id) {
  FeedbackEvent e{std::move(match_id), vote, std::move(client_id), clock_()};
  append(e);
  return e;
}

void FeedbackStore::append(const FeedbackEvent& e) {
  if (e.match_id.empty() || e.client_id.empty()) {
    throw Error(ErrorKind::kValidation, "feedback needs a match_id and a client_id");
  }
  std::lock_guard lock(mu_);
  if (out_.is_open()) {
    out_ << e.to_json().dump() << '\n';
    out_.flush();
    if (!out_) throw Error(ErrorKind::kIo, "failed to append to the feedback log");
  }
  apply(e);
}

FeedbackCounts FeedbackStore::counts(const std::string& match_id) const {
  std::lock_guard lock(mu_);
  auto it = agg_.find(match_id);
  return it == agg_.end() ? FeedbackCounts{} : it->second;
}

std::map<std::string, FeedbackCounts> FeedbackStore::aggregates() const {
  std::lock_guard lock(mu_);
  std::map<std::string, FeedbackCounts> out;
  for (const auto& [k, v] : agg_) {
    if (v.up + v.down > 0) out[k] = v;
  }
  return out;
}

std::vector<FeedbackEvent> FeedbackStore::retained() const {
  std::lock_guard lock(mu_);
  std::vector<std::size_t> idx;
  for (const auto& [_, i] : latest_) idx.push_back(i);
  std::sort(idx.begin(), idx.end());
  std::vector<FeedbackEvent> out;
  for (auto i : idx) out.push_back(log_[i]);
  return out;
}

std::vector<FeedbackEvent> FeedbackStore::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t FeedbackStore::event_count() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

void FeedbackStore::flush() {
  std::lock_guard lock(mu_);
  if (out_.is_open()) out_.flush();
}

void FeedbackStore::write_index() const {
  if (dir_.empty()) return;
  json agg = json::object();
  std::size_t events = 0;
  {
    std::lock_guard lock(mu_);
    events = log_.size();
    for (const auto& [k, v] : agg_) {
      if (v.up + v.down > 0) agg[k] = {{"up", v.up}, {"down", v.down}};
    }
  }
  write_file(dir_ / "feedback.index.json", json{{"events", events}, {"aggregates", agg}}.dump(2));
}

std::map<std::string, FeedbackCounts> FeedbackStore::recount(std::span<const FeedbackEvent> log) {
  std::map<std::pair<std::string, std::string>, Vote> last;
  for (const auto& e : log) last[{e.client_id, e.match_id}] = e.vote;
  std::map<std::string, FeedbackCounts> out;
  for (const auto& [key, vote] : last) {
    auto& c = out[key.second];
    (vote == Vote::kUp ? c.up : c.down) += 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// LabelStore

LabelStore::LabelStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) return;
  std::filesystem::create_directories(dir_);
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto label = PrivacyLabel::from_json(read_json_file(f));
    index(label);
    labels_[label.meta.service] = std::move(label);
  }
}

void LabelStore::index(const PrivacyLabel& label) {
  for (const auto& [_, group] : label.groups) {
    for (const auto& c : group) {
      for (const auto& e : c.evidence) {
        matches_[e.match_id] =
            MatchRef{label.meta.service, e.segment_index, c.case_id, e.text, e.probability};
      }
    }
  }
}

void LabelStore::put(const PrivacyLabel& label) {
  if (label.meta.service.empty()) throw Error(ErrorKind::kValidation, "label has no service id");
  std::unique_lock lock(mu_);
  if (!dir_.empty()) {
    const auto name = text::hex64(text::fnv1a64(label.meta.service));
    write_file(dir_ / (name + ".json"), label.to_json().dump(2));
  }
  index(label);
  labels_[label.meta.service] = label;
}

std::optional<PrivacyLabel> LabelStore::get(const std::string& service) const {
  std::shared_lock lock(mu_);
  auto it = labels_.find(service);
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

std::optional<MatchRef> LabelStore::match(const std::string& match_id) const {
  std::shared_lock lock(mu_);
  auto it = matches_.find(match_id);
  if (it == matches_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelStore::size() const {
  std::shared_lock lock(mu_);
  return labels_.size();
}

// ---------------------------------------------------------------------------
// Export

json ExportedFeedback::to_json() const {
  return {{"match_id", match_id},   {"vote", to_string(vote)},
          {"client_id", client_id}, {"timestamp", timestamp},
          {"service", service},     {"segment_index", segment_index},
          {"case_id", case_id},     {"excerpt", excerpt},
          {"probability", probability}};
}

ExportedFeedback ExportedFeedback::from_json(const json& j) {
  ExportedFeedback f;
  f.match_id = j.at("match_id").get<std::string>();
  f.vote = parse_vote(j.at("vote").get<std::string>());
  f.client_id = j.at("client_id").get<std::string>();
  f.timestamp = j.at("timestamp").get<std::string>();
  f.service = j.at("service").get<std::string>();
  f.segment_index = j.at("segment_index").get<std::size_t>();
  f.case_id = j.at("case_id").get<std::string>();
  f.excerpt = j.at("excerpt").get<std::string>();
  f.probability = j.at("probability").get<double>();
  return f;
}

std::vector<ExportedFeedback> parse_feedback_export(std::string_view jsonl) {
  std::vector<ExportedFeedback> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < jsonl.size()) {
    std::size_t nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    const auto line = jsonl.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (text::is_blank(line)) continue;
    try {
      out.push_back(ExportedFeedback::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, "export line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// LabelService

ApiResponse error_response(int status, std::string_view code, std::string detail) {
  ApiResponse r;
  r.status = status;
  r.body = {{"error", code}, {"detail", std::move(detail)}};
  return r;
}

LabelService::LabelService(CaseCatalog catalog, std::shared_ptr<const Matcher> matcher,
                           std::shared_ptr<LabelStore> labels,
                           std::shared_ptr<FeedbackStore> feedback, ServiceOptions options)
    : catalog_(std::move(catalog)),
      matcher_(std::move(matcher)),
      labels_(std::move(labels)),
      feedback_(std::move(feedback)),
      options_(options) {
  if (!labels_) labels_ = std::make_shared<LabelStore>();
  if (!feedback_) feedback_ = std::make_shared<FeedbackStore>();
}

LabelService::~LabelService() { wait_for_jobs(); }

void LabelService::wait_for_jobs() {
  std::vector<std::thread> pending;
  {
    std::lock_guard lock(jobs_mu_);
    pending.swap(workers_);
  }
  for (auto& t : pending) {
    if (t.joinable()) t.join();
  }
}

ApiResponse LabelService::guarded(const std::function<ApiResponse()>& fn) const {
  try {
    return fn();
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::kNotFound: return error_response(404, "not_found", e.what());
      case ErrorKind::kParse:
      case ErrorKind::kValidation:
      case ErrorKind::kPrecondition: return error_response(400, "validation", e.what());
      case ErrorKind::kDuplicate: return error_response(409, "conflict", e.what());
      case ErrorKind::kUnavailable:
      case ErrorKind::kTransport: return error_response(503, "unavailable", e.what());
      default: return error_response(500, "internal", e.what());
    }
  } catch (const json::exception& e) {
    return error_response(400, "validation", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

json LabelService::render_label(const PrivacyLabel& label) const {
  PrivacyLabel copy = label;
  for (auto& [_, group] : copy.groups) {
    for (auto& c : group) {
      for (auto& e : c.evidence) e.feedback = feedback_->counts(e.match_id);
    }
  }
  return copy.to_json();
}

ApiResponse LabelService::get_label(const std::string& service_id) const {
  return guarded([&] {
    auto label = labels_->get(service_id);
    if (!label) return error_response(404, "not_found", "no label for service '" + service_id + "'");
    ApiResponse r;
    r.body = render_label(*label);
    return r;
  });
}

PrivacyLabel LabelService::analyze_now(const std::string& service, std::string_view text) const {
  if (!matcher_) throw Error(ErrorKind::kUnavailable, "no matcher loaded");
  const auto segments = segment_policy(text);
  if (segments.empty()) throw Error(ErrorKind::kValidation, "policy text has no segments");
  const auto results = scan_policy(*matcher_, segments, catalog_, options_.threshold, service);
  return build_label(ServiceMeta{service, utc_now_iso8601()}, results, segments, catalog_);
}

json LabelService::job_json(const Job& job) const {
  json j = {{"job_id", job.id},
            {"status", job.status},
            {"service", job.service},
            {"segment_count", job.segment_count}};
  if (!job.error.empty()) j["error"] = job.error;
  if (job.status == "done") {
    if (auto label = labels_->get(job.service)) j["label"] = render_label(*label);
  }
  return j;
}

ApiResponse LabelService::analyze(const json& body) {
  return guarded([&] {
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
      return error_response(400, "validation", "body must be an object with a string 'text'");
    }
    const auto& text_body = body["text"].get_ref<const std::string&>();
    if (text::is_blank(text_body)) return error_response(400, "validation", "policy text is empty");
    if (!matcher_) return error_response(503, "unavailable", "no matcher loaded");
    const std::string threshold =
        options_.threshold ? std::to_string(*options_.threshold) : std::string("default");
    const std::string content = text::stable_id({matcher_->id(), threshold, text_body});
    const std::string service =
        body.contains("service") && body["service"].is_string() && !body["service"].get<std::string>().empty()
            ? body["service"].get<std::string>()
            : "policy-" + content;
    const std::string key = text::stable_id({content, service});

    std::unique_lock lock(jobs_mu_);
    if (auto it = content_cache_.find(key); it != content_cache_.end()) {
      const std::string job_id = "j" + key;
      if (auto job = jobs_.find(job_id); job != jobs_.end() && job->second.status != "done") {
        ApiResponse r;
        r.status = job->second.status == "failed" ? 500 : 202;
        r.body = job_json(job->second);
        return r;
      }
      if (auto label = labels_->get(it->second)) {
        ApiResponse r;
        r.body = render_label(*label);
        return r;
      }
    }
    const auto segments = segment_policy(text_body);
    if (segments.size() <= options_.async_segment_threshold) {
      lock.unlock();
      PrivacyLabel label = analyze_now(service, text_body);
      labels_->put(label);
      {
        std::lock_guard relock(jobs_mu_);
        content_cache_[key] = service;
      }
      ApiResponse r;
      r.body = render_label(label);
      return r;
    }
    Job job;
    job.id = "j" + key;
    job.service = service;
    job.segment_count = segments.size();
    jobs_[job.id] = job;
    content_cache_[key] = service;
    workers_.emplace_back([this, id = job.id, service, text_copy = text_body] {
      {
        std::lock_guard l(jobs_mu_);
        jobs_[id].status = "running";
      }
      try {
        labels_->put(analyze_now(service, text_copy));
        std::lock_guard l(jobs_mu_);
        jobs_[id].status = "done";
      } catch (const std::exception& e) {
        std::lock_guard l(jobs_mu_);
        jobs_[id].status = "failed";
        jobs_[id].error = e.what();
      }
    });
    ApiResponse r;
    r.status = 202;
    r.body = job_json(job);
    return r;
  });
}

ApiResponse LabelService::get_job(const std::string& job_id) const {
  return guarded([&] {
    std::lock_guard lock(jobs_mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return error_response(404, "not_found", "unknown job '" + job_id + "'");
    ApiResponse r;
    r.body = job_json(it->second);
    return r;
  });
}

ApiResponse LabelService::submit_feedback(const json& body) {
  return guarded([&] {
    if (!body.is_object()) return error_response(400, "validation", "body must be a JSON object");
    for (const char* key : {"match_id", "vote", "client_id"}) {
      if (!body.contains(key) || !body[key].is_string() || body[key].get<std::string>().empty()) {
        return error_response(400, "validation", std::string("missing string field '") + key + "'");
      }
    }
    const Vote vote = parse_vote(body["vote"].get<std::string>());
    const auto match_id = body["match_id"].get<std::string>();
    if (!labels_->match(match_id)) {
      return error_response(404, "not_found", "unknown match '" + match_id + "'");
    }
    feedback_->record(match_id, vote, body["client_id"].get<std::string>());
    const auto c = feedback_->counts(match_id);
    ApiResponse r;
    r.body = {{"ok", true},
              {"match_id", match_id},
              {"vote", to_string(vote)},
              {"counts", {{"up", c.up}, {"down", c.down}}}};
    return r;
  });
}

std::vector<ExportedFeedback> LabelService::export_records(const std::string& since) const {
  std::vector<ExportedFeedback> out;
  for (const auto& e : feedback_->retained()) {
    if (!since.empty() && e.timestamp < since) continue;
    auto ref = labels_->match(e.match_id);
    if (!ref) continue;
    out.push_back({e.match_id, e.vote, e.client_id, e.timestamp, ref->service, ref->segment_index,
                   ref->case_id, ref->excerpt, ref->probability});
  }
  return out;
}

ApiResponse LabelService::export_feedback(const std::string& since) const {
  return guarded([&] {
    std::string body;
    for (const auto& rec : export_records(since)) body += rec.to_json().dump() + "\n";
    ApiResponse r;
    r.text = std::move(body);
    r.content_type = "application/x-ndjson";
    return r;
  });
}

ApiResponse LabelService::cases() const {
  ApiResponse r;
  r.body = {{"cases", catalog_.to_json()}};
  return r;
}

ApiResponse LabelService::health() const {
  ApiResponse r;
  r.body = {{"status", "ok"},
            {"model_id", matcher_ ? matcher_->id() : std::string()},
            {"cases", catalog_.size()},
            {"labels", labels_->size()}};
  return r;
}

void LabelService::mount(httplib::Server& server) {
  const auto send = [](httplib::Response& res, const ApiResponse& api) {
    res.status = api.status;
    res.set_content(api.payload(), api.content_type);
  };
  const auto parse_body = [](const httplib::Request& req) -> std::optional<json> {
    try {
      return json::parse(req.body);
    } catch (const json::exception&) {
      return std::nullopt;
    }
  };
  server.Get(R"(/api/services/([^/]+)/label)",
             [this, send](const httplib::Request& req, httplib::Response& res) {
               send(res, get_label(req.matches[1]));
             });
  server.Post("/api/analyze", [this, send, parse_body](const httplib::Request& req,
                                                        httplib::Response& res) {
    auto body = parse_body(req);
    send(res, body ? analyze(*body) : error_response(400, "validation", "body is not valid JSON"));
  });
  server.Get(R"(/api/jobs/([^/]+))", [this, send](const httplib::Request& req,
                                                  httplib::Response& res) {
    send(res, get_job(req.matches[1]));
  });
  server.Post("/api/feedback", [this, send, parse_body](const httplib::Request& req,
                                                         httplib::Response& res) {
    auto body = parse_body(req);
    send(res, body ? submit_feedback(*body)
                   : error_response(400, "validation", "body is not valid JSON"));
  });
  server.Get("/api/feedback/export", [this, send](const httplib::Request& req,
                                                  httplib::Response& res) {
    send(res, export_feedback(req.has_param("since") ? req.get_param_value("since") : ""));
  });
  server.Get("/api/cases", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, cases());
  });
  server.Get("/health", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, health());
  });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const auto err = error_response(res.status, res.status == 404 ? "not_found" : "internal",
                                      "no route for this request");
      res.set_content(err.body.dump(), "application/json");
    }
  });
}

}  // namespace privlabel
