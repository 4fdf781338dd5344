#include <gtest/gtest.h>

#include "contract.hpp"
#include "privlabel/error.hpp"
#include "privlabel/schema.hpp"
#include "privlabel/service.hpp"

using namespace privlabel;
using nlohmann::json;

namespace {

// Deterministic clock so timestamps order by call.
TimestampClock counter_clock() {
  auto n = std::make_shared<int>(0);
  return [n] {
    char buf[32];
    std::snprintf(buf, sizeof buf, "2024-01-01T00:00:%02d.000Z", (*n)++ % 60);
    return std::string(buf);
  };
}

JsonSchema schema(const std::string& name) {
  return JsonSchema::load(testsupport::schema_dir() / (name + ".schema.json"));
}

struct Fixture {
  std::shared_ptr<LabelStore> labels = std::make_shared<LabelStore>();
  std::shared_ptr<FeedbackStore> feedback = std::make_shared<FeedbackStore>();
  std::unique_ptr<LabelService> service;

  explicit Fixture(std::size_t async_threshold = 300,
                   std::shared_ptr<const Matcher> m = std::make_shared<testsupport::OverlapMatcher>()) {
    ServiceOptions opt;
    opt.async_segment_threshold = async_threshold;
    service = std::make_unique<LabelService>(contract::demo_catalog(), std::move(m), labels,
                                             feedback, opt);
  }

  std::string first_match(const std::string& svc) const {
    const auto l = labels->get(svc);
    for (const auto& [_, g] : l->groups) {
      if (!g.empty()) return g[0].evidence.at(0).match_id;
    }
    return {};
  }
};

}  // namespace

TEST(Service, ContractHoldsOverHttp) {
  const auto dir = testsupport::temp_dir("contract");
  const auto out = contract::run(testsupport::schema_dir(), dir, 300, 3);
  for (const auto& f : out.failures) ADD_FAILURE() << f;
  EXPECT_EQ(out.events, 300u);
  EXPECT_GT(out.schema_checks, 300u);
  std::filesystem::remove_all(dir);
}

TEST(Service, AnalyzeReturnsSchemaValidLabelAndCaches) {
  Fixture f;
  const json req = {{"text", contract::demo_policy(8)}, {"service", "acme"}};
  const auto first = f.service->analyze(req);
  ASSERT_EQ(first.status, 200) << first.payload();
  EXPECT_EQ(schema("label").validate(first.body), std::vector<std::string>{});
  EXPECT_EQ(first.body["service"], "acme");
  const auto second = f.service->analyze(req);
  EXPECT_EQ(second.body, first.body);
  EXPECT_EQ(f.labels->size(), 1u);
  EXPECT_EQ(f.service->get_label("acme").body, first.body);
}

TEST(Service, AnalyzeWithoutServiceUsesContentId) {
  Fixture f;
  const auto a = f.service->analyze(json{{"text", "We may sell your data to third parties."}});
  ASSERT_EQ(a.status, 200);
  const std::string id = a.body["service"];
  EXPECT_EQ(id.rfind("policy-", 0), 0u);
  const auto b = f.service->analyze(json{{"text", "We may sell your data to third parties."}});
  EXPECT_EQ(b.body["service"], id);
}

TEST(Service, AnalyzeValidation) {
  Fixture f;
  EXPECT_EQ(f.service->analyze(json{{"text", "  \n "}}).status, 400);
  EXPECT_EQ(f.service->analyze(json{{"text", 5}}).status, 400);
  EXPECT_EQ(f.service->analyze(json::array()).status, 400);
  Fixture none(300, nullptr);
  const auto r = none.service->analyze(json{{"text", "hello there"}});
  EXPECT_EQ(r.status, 503);
  EXPECT_EQ(schema("error").validate(r.body), std::vector<std::string>{});
}

TEST(Service, LargePoliciesRunAsJobs) {
  Fixture f(5);
  const auto r = f.service->analyze(json{{"text", contract::demo_policy(20)}, {"service", "big"}});
  ASSERT_EQ(r.status, 202);
  EXPECT_EQ(schema("job").validate(r.body), std::vector<std::string>{});
  EXPECT_EQ(r.body["segment_count"], 20);
  f.service->wait_for_jobs();
  const auto job = f.service->get_job(r.body["job_id"]);
  EXPECT_EQ(job.status, 200);
  EXPECT_EQ(job.body["status"], "done");
  EXPECT_EQ(schema("job").validate(job.body), std::vector<std::string>{});
  EXPECT_EQ(schema("label").validate(job.body["label"]), std::vector<std::string>{});
  EXPECT_EQ(f.service->get_label("big").status, 200);
  // Resubmission after completion serves the stored label.
  const auto again = f.service->analyze(json{{"text", contract::demo_policy(20)}, {"service", "big"}});
  EXPECT_EQ(again.status, 200);
}

TEST(Service, NotFoundResponses) {
  Fixture f;
  for (const auto& r : {f.service->get_label("ghost"), f.service->get_job("j0"),
                        f.service->submit_feedback(
                            json{{"match_id", "m1"}, {"vote", "up"}, {"client_id", "c"}})}) {
    EXPECT_EQ(r.status, 404);
    EXPECT_EQ(r.body["error"], "not_found");
    EXPECT_EQ(schema("error").validate(r.body), std::vector<std::string>{});
  }
}

TEST(Service, FeedbackValidation) {
  Fixture f;
  f.service->analyze(json{{"text", contract::demo_policy(4)}, {"service", "s"}});
  const auto match = f.first_match("s");
  ASSERT_FALSE(match.empty());
  EXPECT_EQ(f.service->submit_feedback(json{{"match_id", match}, {"vote", "up"}}).status, 400);
  EXPECT_EQ(f.service->submit_feedback(json{{"match_id", match}, {"vote", "sideways"},
                                            {"client_id", "c"}})
                .status,
            400);
  EXPECT_EQ(f.service->submit_feedback(json{{"match_id", match}, {"vote", "up"},
                                            {"client_id", ""}})
                .status,
            400);
  EXPECT_EQ(f.feedback->event_count(), 0u);
}

TEST(Service, FeedbackIsLatestWinsPerClient) {
  Fixture f;
  f.service->analyze(json{{"text", contract::demo_policy(4)}, {"service", "s"}});
  const auto match = f.first_match("s");
  const auto vote = [&](const char* client, const char* v) {
    return f.service->submit_feedback(json{{"match_id", match}, {"vote", v}, {"client_id", client}});
  };
  EXPECT_EQ(vote("a", "up").body["counts"], (json{{"up", 1}, {"down", 0}}));
  EXPECT_EQ(vote("a", "up").body["counts"], (json{{"up", 1}, {"down", 0}}));
  EXPECT_EQ(vote("b", "down").body["counts"], (json{{"up", 1}, {"down", 1}}));
  const auto flip = vote("a", "down");
  EXPECT_EQ(flip.body["counts"], (json{{"up", 0}, {"down", 2}}));
  EXPECT_EQ(schema("feedback_ack").validate(flip.body), std::vector<std::string>{});
  EXPECT_EQ(f.feedback->event_count(), 4u);
  EXPECT_EQ(f.feedback->retained().size(), 2u);
  const auto label = f.service->get_label("s").body;
  bool seen = false;
  for (const auto& [_, g] : label["groups"].items()) {
    for (const auto& c : g) {
      for (const auto& e : c["evidence"]) {
        if (e["match_id"] == match) {
          seen = true;
          EXPECT_EQ(e["feedback"], (json{{"up", 0}, {"down", 2}}));
        }
      }
    }
  }
  EXPECT_TRUE(seen);
}

TEST(FeedbackStore, RandomTrafficMatchesRecount) {
  FeedbackStore store({}, counter_clock());
  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    store.record("m" + std::to_string(rng.below(15)), rng.below(2) ? Vote::kUp : Vote::kDown,
                 "c" + std::to_string(rng.below(12)));
    if (i % 97 == 0) {
      const auto log = store.log();
      ASSERT_EQ(store.aggregates(), FeedbackStore::recount(log)) << "after " << i;
    }
  }
  const auto log = store.log();
  EXPECT_EQ(store.aggregates(), FeedbackStore::recount(log));
  // Every retained event is the last one for its pair.
  for (const auto& kept : store.retained()) {
    const auto last = std::find_if(log.rbegin(), log.rend(), [&](const FeedbackEvent& e) {
      return e.client_id == kept.client_id && e.match_id == kept.match_id;
    });
    EXPECT_EQ(*last, kept);
  }
}

TEST(FeedbackStore, ReplaysFromDisk) {
  const auto dir = testsupport::temp_dir("feedback");
  std::map<std::string, FeedbackCounts> before;
  {
    FeedbackStore s(dir, counter_clock());
    s.record("m1", Vote::kUp, "a");
    s.record("m1", Vote::kDown, "b");
    s.record("m2", Vote::kUp, "a");
    s.record("m1", Vote::kUp, "b");
    s.write_index();
    before = s.aggregates();
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "feedback.index.json"));
  FeedbackStore back(dir);
  EXPECT_EQ(back.aggregates(), before);
  EXPECT_EQ(back.counts("m1"), (FeedbackCounts{2, 0}));
  EXPECT_EQ(back.event_count(), 4u);
  // A stale index does not override the log.
  write_file(dir / "feedback.index.json", R"({"events":0,"aggregates":{}})");
  EXPECT_EQ(FeedbackStore(dir).aggregates(), before);
  std::filesystem::remove_all(dir);
}

TEST(FeedbackStore, RejectsIncompleteEvents) {
  FeedbackStore s;
  EXPECT_THROW(s.record("", Vote::kUp, "a"), Error);
  EXPECT_THROW(s.record("m", Vote::kUp, ""), Error);
  EXPECT_THROW(parse_vote("maybe"), Error);
}

TEST(Service, ExportRoundTripAndSinceFilter) {
  ServiceOptions opt;
  auto labels = std::make_shared<LabelStore>();
  auto feedback = std::make_shared<FeedbackStore>(std::filesystem::path{}, counter_clock());
  LabelService svc(contract::demo_catalog(), std::make_shared<testsupport::OverlapMatcher>(),
                   labels, feedback, opt);
  svc.analyze(json{{"text", contract::demo_policy(6)}, {"service", "s"}});
  std::vector<std::string> matches;
  const auto label = labels->get("s");
  for (const auto& [_, g] : label->groups) {
    for (const auto& c : g) {
      for (const auto& e : c.evidence) matches.push_back(e.match_id);
    }
  }
  ASSERT_GE(matches.size(), 2u);
  svc.submit_feedback(json{{"match_id", matches[0]}, {"vote", "up"}, {"client_id", "a"}});    // :00
  svc.submit_feedback(json{{"match_id", matches[1]}, {"vote", "down"}, {"client_id", "a"}});  // :01
  svc.submit_feedback(json{{"match_id", matches[0]}, {"vote", "down"}, {"client_id", "a"}});  // :02

  const auto r = svc.export_feedback("");
  EXPECT_EQ(r.content_type, "application/x-ndjson");
  const auto rows = parse_feedback_export(r.payload());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].match_id, matches[1]);
  EXPECT_EQ(rows[1].match_id, matches[0]);
  EXPECT_EQ(rows[1].vote, Vote::kDown);
  EXPECT_EQ(rows[1].service, "s");
  EXPECT_EQ(rows, svc.export_records(""));
  const auto line_schema = schema("feedback_export");
  for (const auto& row : rows) {
    EXPECT_EQ(line_schema.validate(row.to_json()), std::vector<std::string>{});
    EXPECT_EQ(ExportedFeedback::from_json(row.to_json()), row);
  }
  EXPECT_EQ(svc.export_records("2024-01-01T00:00:02.000Z").size(), 1u);
  EXPECT_TRUE(svc.export_records("2025").empty());
  EXPECT_THROW(parse_feedback_export("{\"match_id\":1}\n"), Error);
}

TEST(Service, CasesAndHealth) {
  Fixture f;
  const auto cases = f.service->cases();
  EXPECT_EQ(schema("cases").validate(cases.body), std::vector<std::string>{});
  EXPECT_EQ(cases.body["cases"].size(), 4u);
  const auto h = f.service->health();
  EXPECT_EQ(schema("health").validate(h.body), std::vector<std::string>{});
  EXPECT_EQ(h.body["model_id"], "overlap");
  EXPECT_EQ(h.body["labels"], 0);
}

TEST(LabelStore, PersistsAndIndexesMatches) {
  const auto dir = testsupport::temp_dir("labels");
  std::string match;
  {
    Fixture f;
    f.labels = std::make_shared<LabelStore>(dir);
    LabelService svc(contract::demo_catalog(), std::make_shared<testsupport::OverlapMatcher>(),
                     f.labels, f.feedback);
    svc.analyze(json{{"text", contract::demo_policy(4)}, {"service", "kept"}});
    match = f.first_match("kept");
  }
  LabelStore back(dir);
  EXPECT_EQ(back.size(), 1u);
  ASSERT_TRUE(back.match(match).has_value());
  EXPECT_EQ(back.match(match)->service, "kept");
  PrivacyLabel nameless;
  EXPECT_THROW(back.put(nameless), Error);
  std::filesystem::remove_all(dir);
}
