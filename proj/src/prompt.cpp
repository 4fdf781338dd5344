#include <cstdlib>
#include <iostream>
#include <thread>

#include <httplib.h>

#include "privlabel/error.hpp"
#include "privlabel/matchers.hpp"
#include "privlabel/text.hpp"

namespace privlabel {

namespace {

constexpr std::string_view kInstruction =
    "You are a privacy policy expert. Given a title and quote, your task is to evaluate whether "
    "the title represents the data practice described in the quote. Your output should only be "
    "either 0 (indicating the title does not represent the quote) or 1 (indicating the title "
    "represents the quote).";

constexpr std::string_view kExamples =
    "Example 1\n"
    "Title: Third parties are involved in operating the service.\n"
    "Quote: Note that we don't use any 3rd party website statistics tools like Google Analytics "
    "or similar.\n"
    "Output: 1\n"
    "\n"
    "Example 2\n"
    "Title: You can opt out of targeted advertising\n"
    "Quote: Our CDN is Cloudflare, and they may include cookies with our pages to provide a "
    "better service.\n"
    "Output: 0\n";

// RAII slot on a counting semaphore.
class Slot {
 public:
  explicit Slot(std::counting_semaphore<64>& s) : s_(s) { s_.acquire(); }
  ~Slot() { s_.release(); }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  std::counting_semaphore<64>& s_;
};

}  // namespace

std::string PromptTemplate::render(std::string_view title, std::string_view quote, int shots) {
  if (shots != 0 && shots != 2) {
    throw Error(ErrorKind::kValidation, "prompt shots must be 0 or 2");
  }
  std::string out(kInstruction);
  out += "\n\n";
  if (shots == 2) {
    out += kExamples;
    out += "\n";
  }
  out += "Title: ";
  out += title;
  out += "\nQuote: ";
  out += quote;
  out += "\n";
  return out;
}

ReplyKind parse_reply(std::string_view reply) {
  const auto t = text::trim(reply);
  if (t == "1") return ReplyKind::kMatch;
  if (t == "0") return ReplyKind::kNoMatch;
  return ReplyKind::kMalformed;
}

PromptMatcher::PromptMatcher(std::shared_ptr<CompletionClient> client, int shots,
                             std::size_t max_concurrency, RetryPolicy retry)
    : Matcher(0.5),
      client_(std::move(client)),
      shots_(shots),
      retry_(retry),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_concurrency, 1, 64))) {
  if (shots != 0 && shots != 2) throw Error(ErrorKind::kValidation, "prompt shots must be 0 or 2");
  if (!client_) throw Error(ErrorKind::kPrecondition, "prompt matcher needs a completion client");
}

MatchScore PromptMatcher::score(std::string_view case_title, std::string_view excerpt) const {
  check_inputs(case_title, excerpt);
  const std::string prompt = PromptTemplate::render(case_title, excerpt, shots_);
  std::string reply;
  auto backoff = retry_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      Slot slot(slots_);
      reply = client_->complete(prompt, 0.0);
      break;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kTransport || attempt >= retry_.max_attempts) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::chrono::milliseconds(
        static_cast<std::int64_t>(static_cast<double>(backoff.count()) * retry_.backoff_multiplier));
  }
  switch (parse_reply(reply)) {
    case ReplyKind::kMatch: return MatchScore{1.0, 1.0, false, false};
    case ReplyKind::kNoMatch: return MatchScore{0.0, 0.0, false, false};
    case ReplyKind::kMalformed: break;
  }
  {
    std::lock_guard lock(log_mu_);
    malformed_.push_back(reply);
  }
  std::clog << "prompt matcher: malformed reply treated as abstention: '" << reply << "'\n";
  return MatchScore{0.0, 0.0, true, false};
}

std::size_t PromptMatcher::abstentions() const {
  std::lock_guard lock(log_mu_);
  return malformed_.size();
}

std::vector<std::string> PromptMatcher::malformed_replies() const {
  std::lock_guard lock(log_mu_);
  return malformed_;
}

std::shared_ptr<PromptMatcher> prompt_matcher(std::shared_ptr<CompletionClient> client, int shots) {
  return std::make_shared<PromptMatcher>(std::move(client), shots);
}

// ---------------------------------------------------------------------------

OpenAiClient::OpenAiClient(Options options) : options_(std::move(options)) {
  if (options_.base_url.empty()) {
    const char* env = std::getenv("OPENAI_BASE_URL");
    options_.base_url = env ? env : "https://api.openai.com";
  }
  const char* key = std::getenv(options_.api_key_env.c_str());
  if (!key || !*key) {
    throw Error(ErrorKind::kUnavailable,
                "environment variable " + options_.api_key_env + " is not set");
  }
  api_key_ = key;
}

std::string OpenAiClient::complete(const std::string& prompt, double temperature) {
  httplib::Client cli(options_.base_url);
  cli.set_connection_timeout(options_.timeout);
  cli.set_read_timeout(options_.timeout);
  const json body = {{"model", options_.model},
                     {"temperature", temperature},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
  auto res = cli.Post("/v1/chat/completions", headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorKind::kTransport, "completion request failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw Error(ErrorKind::kTransport, "completion API returned " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error(ErrorKind::kUnavailable,
                "completion API returned " + std::to_string(res->status) + ": " + res->body);
  }
  try {
    const auto reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("unexpected completion payload: ") + e.what());
  }
}

}  // namespace privlabel
