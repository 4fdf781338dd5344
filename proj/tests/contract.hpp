#pragma once

// End-to-end check of the HTTP API: every endpoint response is validated
// against its schema, then randomized feedback traffic is replayed and the
// served counts are compared with a from-scratch recount.

#include <map>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "privlabel/rng.hpp"
#include "privlabel/schema.hpp"
#include "privlabel/service.hpp"
#include "support.hpp"

namespace contract {

using namespace privlabel;
using nlohmann::json;

inline CaseCatalog demo_catalog() {
  return CaseCatalog({{"c1", "Your data is sold to third parties", Rating::kBlocker, {}},
                      {"c2", "Tracking across other websites", Rating::kBad, {}},
                      {"c3", "Cookies are used for analytics", Rating::kNeutral, {}},
                      {"c4", "You can delete your account and data", Rating::kGood, {}}});
}

inline std::string demo_policy(std::size_t lines) {
  static const char* pool[] = {
      "We may sell your personal data to third parties.",
      "Our partners track your activity across other websites.",
      "We use cookies to understand how the service is used.",
      "You can delete your account and all associated data at any time.",
      "Contact Us",
      "This section explains how we store information for a while."};
  std::string out;
  for (std::size_t i = 0; i < lines; ++i) {
    out += pool[i % 6];
    if (i >= 6) out.insert(out.size() - 1, " (" + std::to_string(i) + ")");
    out += "\n";
  }
  return out;
}

struct Outcome {
  std::vector<std::string> failures;
  std::size_t schema_checks = 0;
  std::size_t events = 0;
  bool ok() const { return failures.empty(); }
};

class Harness {
 public:
  Harness(std::filesystem::path dir, std::size_t async_threshold)
      : dir_(std::move(dir)),
        labels_(std::make_shared<LabelStore>(dir_ / "labels")),
        feedback_(std::make_shared<FeedbackStore>(dir_ / "feedback")) {
    ServiceOptions opt;
    opt.async_segment_threshold = async_threshold;
    service_ = std::make_unique<LabelService>(demo_catalog(),
                                              std::make_shared<testsupport::OverlapMatcher>(),
                                              labels_, feedback_, opt);
    service_->mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~Harness() {
    server_.stop();
    thread_.join();
    service_->wait_for_jobs();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(std::chrono::seconds(30));
    return c;
  }
  LabelService& service() { return *service_; }
  FeedbackStore& feedback() { return *feedback_; }
  LabelStore& labels() { return *labels_; }

 private:
  std::filesystem::path dir_;
  std::shared_ptr<LabelStore> labels_;
  std::shared_ptr<FeedbackStore> feedback_;
  std::unique_ptr<LabelService> service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

inline Outcome run(const std::filesystem::path& schema_dir, const std::filesystem::path& work,
                   std::size_t n_events = 1000, std::uint64_t seed = 1) {
  Outcome out;
  std::map<std::string, JsonSchema> schemas;
  for (const char* name : {"label", "error", "job", "feedback_ack", "feedback_export", "cases",
                           "health"}) {
    schemas.emplace(name, JsonSchema::load(schema_dir / (std::string(name) + ".schema.json")));
  }
  const auto fail = [&](const std::string& what) { out.failures.push_back(what); };
  const auto check = [&](const std::string& schema, const std::string& what, int status,
                         int expect_status, const std::string& body) -> json {
    ++out.schema_checks;
    if (status != expect_status) {
      fail(what + ": status " + std::to_string(status) + ", expected " +
           std::to_string(expect_status));
    }
    json doc;
    try {
      doc = json::parse(body);
    } catch (const json::exception&) {
      fail(what + ": body is not JSON");
      return doc;
    }
    for (const auto& e : schemas.at(schema).validate(doc)) fail(what + ": " + e);
    return doc;
  };

  std::filesystem::remove_all(work);
  Harness h(work, 40);
  auto cli = h.client();

  auto r = cli.Get("/health");
  if (!r) return fail("health: no response"), out;
  check("health", "GET /health", r->status, 200, r->body);

  r = cli.Get("/api/cases");
  check("cases", "GET /api/cases", r->status, 200, r->body);

  // Synchronous analysis.
  const json req = {{"text", demo_policy(12)}, {"service", "demo"}};
  r = cli.Post("/api/analyze", req.dump(), "application/json");
  const json label = check("label", "POST /api/analyze", r->status, 200, r->body);
  r = cli.Post("/api/analyze", req.dump(), "application/json");
  const json again = check("label", "POST /api/analyze (repeat)", r->status, 200, r->body);
  if (again.value("generated_at", "") != label.value("generated_at", "")) {
    fail("repeat analysis was not served from the cache");
  }

  r = cli.Get("/api/services/demo/label");
  check("label", "GET label", r->status, 200, r->body);

  // Asynchronous analysis: more segments than the threshold.
  const json big = {{"text", demo_policy(60)}, {"service", "demo-large"}};
  r = cli.Post("/api/analyze", big.dump(), "application/json");
  const json job = check("job", "POST /api/analyze (async)", r->status, 202, r->body);
  h.service().wait_for_jobs();
  r = cli.Get(("/api/jobs/" + job.value("job_id", std::string("x"))).c_str());
  const json done = check("job", "GET job", r->status, 200, r->body);
  if (done.value("status", "") != "done") fail("async job did not finish: " + done.dump());
  r = cli.Get("/api/services/demo-large/label");
  check("label", "GET async label", r->status, 200, r->body);

  // Error responses.
  r = cli.Get("/api/services/nope/label");
  check("error", "GET unknown label", r->status, 404, r->body);
  r = cli.Get("/api/jobs/nope");
  check("error", "GET unknown job", r->status, 404, r->body);
  r = cli.Post("/api/analyze", "{not json", "application/json");
  check("error", "POST analyze bad json", r->status, 400, r->body);
  r = cli.Post("/api/analyze", json{{"text", "   "}}.dump(), "application/json");
  check("error", "POST analyze blank", r->status, 400, r->body);
  r = cli.Post("/api/feedback", json{{"match_id", "m0"}, {"vote", "up"}}.dump(),
               "application/json");
  check("error", "POST feedback missing client", r->status, 400, r->body);
  r = cli.Post("/api/feedback",
               json{{"match_id", "mnope"}, {"vote", "up"}, {"client_id", "u"}}.dump(),
               "application/json");
  check("error", "POST feedback unknown match", r->status, 404, r->body);
  r = cli.Get("/no/such/route");
  check("error", "GET unknown route", r->status, 404, r->body);

  // Randomized feedback traffic against the evidence of both labels.
  std::vector<std::string> match_ids;
  for (const auto* svc : {"demo", "demo-large"}) {
    const auto l = h.labels().get(svc);
    for (const auto& [_, group] : l->groups) {
      for (const auto& c : group) {
        for (const auto& e : c.evidence) match_ids.push_back(e.match_id);
      }
    }
  }
  if (match_ids.empty()) return fail("labels have no evidence to vote on"), out;

  Rng rng(seed);
  std::map<std::pair<std::string, std::string>, std::string> latest;  // (client, match) -> vote
  for (std::size_t i = 0; i < n_events; ++i) {
    const std::string client = "client-" + std::to_string(rng.below(25));
    const std::string match = match_ids[rng.below(match_ids.size())];
    const std::string vote = rng.below(2) ? "up" : "down";
    const json body = {{"match_id", match}, {"vote", vote}, {"client_id", client}};
    ApiResponse resp;
    std::string payload;
    int status = 0;
    // Every tenth event goes over the wire, the rest call the handler.
    if (i % 10 == 0) {
      auto res = cli.Post("/api/feedback", body.dump(), "application/json");
      status = res ? res->status : 0;
      payload = res ? res->body : "";
    } else {
      resp = h.service().submit_feedback(body);
      status = resp.status;
      payload = resp.payload();
    }
    const json ack = check("feedback_ack", "POST feedback #" + std::to_string(i), status, 200,
                           payload);
    latest[{client, match}] = vote;
    std::size_t up = 0, down = 0;
    for (const auto& [k, v] : latest) {
      if (k.second == match) (v == "up" ? up : down) += 1;
    }
    if (ack.contains("counts") &&
        (ack["counts"].value("up", 0u) != up || ack["counts"].value("down", 0u) != down)) {
      fail("ack counts disagree with replay at event " + std::to_string(i));
    }
    ++out.events;
  }

  // Aggregates vs brute-force recount vs the test's own latest-wins replay.
  const auto aggregates = h.feedback().aggregates();
  const auto log = h.feedback().log();
  const auto recount = FeedbackStore::recount(log);
  std::map<std::string, FeedbackCounts> replay;
  for (const auto& [k, v] : latest) (v == "up" ? replay[k.second].up : replay[k.second].down) += 1;
  if (aggregates != recount) fail("aggregates differ from FeedbackStore::recount");
  if (aggregates != replay) fail("aggregates differ from independent replay");
  if (log.size() != n_events) fail("event log lost entries");

  // Served label carries the same counts.
  r = cli.Get("/api/services/demo/label");
  const json served = check("label", "GET label after feedback", r->status, 200, r->body);
  for (const auto& [_, group] : served["groups"].items()) {
    for (const auto& c : group) {
      for (const auto& e : c["evidence"]) {
        const auto id = e["match_id"].get<std::string>();
        const auto want = replay.count(id) ? replay[id] : FeedbackCounts{};
        if (e["feedback"]["up"] != want.up || e["feedback"]["down"] != want.down) {
          fail("served counts wrong for " + id);
        }
      }
    }
  }

  // Export: one line per retained vote, each schema-valid.
  r = cli.Get("/api/feedback/export");
  if (!r || r->status != 200) {
    fail("export failed");
  } else {
    const auto rows = parse_feedback_export(r->body);
    if (rows.size() != latest.size()) {
      fail("export has " + std::to_string(rows.size()) + " rows, expected " +
           std::to_string(latest.size()));
    }
    std::size_t line_start = 0;
    std::size_t n = 0;
    while (line_start < r->body.size() && n < 50) {
      const auto nl = r->body.find('\n', line_start);
      check("feedback_export", "export line", 200, 200, r->body.substr(line_start, nl - line_start));
      line_start = nl + 1;
      ++n;
    }
    const auto far_future = cli.Get("/api/feedback/export?since=9999");
    if (!far_future || !far_future->body.empty()) fail("since filter did not exclude old events");
  }

  // Reopening the store replays the log to the same aggregates.
  h.feedback().flush();
  FeedbackStore reopened(work / "feedback");
  if (reopened.aggregates() != aggregates) fail("reopened store disagrees with live aggregates");
  return out;
}

}  // namespace contract
