#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "cogstyle/assets.hpp"
#include "cogstyle/llm.hpp"
#include "cogstyle/synthetic.hpp"

// After the library headers: httplib pulls in <resolv.h>, whose _res macro
// collides with Eigen parameter names.
#include <httplib.h>
#include <json.hpp>

using namespace cogstyle;
namespace fs = std::filesystem;

namespace {

const PromptSet& prompts() {
  static const PromptSet p = PromptSet::load(default_asset_dir() / "llm_prompts.json");
  return p;
}

std::string reply(double s1, double s2) {
  return "The score of a coherence shift towards the chosen job offer is: " + std::to_string(s1) +
         " and the score of being influenced by minor incentives is: " + std::to_string(s2) + ".";
}

std::vector<ParticipantRecord> sample_records(std::size_t n, std::uint64_t seed) {
  std::vector<std::string> ids;
  std::vector<CognitiveStyle> labels;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("R" + std::to_string(1000 + i));
    labels.push_back(kStyles[i % kStyleCount]);
  }
  return synthesize_records(ids, labels, seed);
}

// Answers with the true class encoded in the two scores.
class OracleClient : public ChatClient {
 public:
  explicit OracleClient(const std::vector<ParticipantRecord>& records) {
    for (const auto& r : records) style_[r.essay()] = r.outcome.style;
  }
  std::optional<std::string> complete(const std::vector<ChatMessage>& messages) override {
    const auto s = style_.at(messages.at(1).content);
    const bool up_cis = s == CognitiveStyle::UpCisUpInf || s == CognitiveStyle::UpCisDownInf;
    const bool up_inf = s == CognitiveStyle::UpCisUpInf || s == CognitiveStyle::DownCisUpInf;
    return reply(up_cis ? 0.9 : 0.1, up_inf ? 0.9 : 0.1);
  }

 private:
  std::map<std::string, CognitiveStyle> style_;
};

class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::vector<std::optional<std::string>> script) : script_(std::move(script)) {}
  std::optional<std::string> complete(const std::vector<ChatMessage>&) override {
    std::lock_guard lock(mutex_);
    const auto i = calls_++;
    return script_[i % script_.size()];
  }
  std::size_t calls() const { return calls_; }

 private:
  std::mutex mutex_;
  std::vector<std::optional<std::string>> script_;
  std::size_t calls_ = 0;
};

class DyingClient : public ChatClient {
 public:
  explicit DyingClient(std::size_t good) : good_(good) {}
  std::optional<std::string> complete(const std::vector<ChatMessage>&) override {
    if (served_++ >= good_) throw EndpointUnreachable("connection refused");
    return reply(0.5, 0.5);
  }

 private:
  std::size_t good_;
  std::atomic<std::size_t> served_{0};
};

struct MockServer {
  httplib::Server server;
  std::thread thread;
  int port = -1;
  std::atomic<int> hits{0};
  nlohmann::json last_body;
  std::mutex mutex;

  MockServer() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      {
        std::lock_guard lock(mutex);
        last_body = nlohmann::json::parse(req.body);
      }
      if (req.get_header_value("Authorization") != "Bearer sk-test") {
        res.status = 401;
        return;
      }
      nlohmann::json out = {{"choices", {{{"message", {{"role", "assistant"}, {"content", reply(0.25, 0.75)}}}}}}};
      res.set_content(out.dump(), "application/json");
    });
    server.Post("/plain", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"text", reply(1, 0)}}.dump(), "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{not json", "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~MockServer() {
    server.stop();
    thread.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port) + path; }
};

}  // namespace

TEST_CASE("prompts are the verbatim assets and byte-stable") {
  const auto a = build_prompt(prompts(), "I chose the bus.", PromptMode::zero_shot);
  const auto b = build_prompt(prompts(), "I chose the bus.", PromptMode::zero_shot);
  REQUIRE(a.size() == 2);
  CHECK(a == b);
  CHECK(a[0].role == "system");
  CHECK(a[0].content == prompts().zero_shot);
  CHECK(a[1].role == "user");
  CHECK(a[1].content == "I chose the bus.");
  const auto f = build_prompt(prompts(), "x", PromptMode::four_shot);
  CHECK(f[0].content == prompts().four_shot);
  CHECK(f[0].content.find("Example 3:") != std::string::npos);
  CHECK(messages_to_json(a).dump() == messages_to_json(b).dump());
  CHECK_THROWS_AS(build_prompt(prompts(), "", PromptMode::zero_shot), Error);
  CHECK(prompt_mode_from_string("four_shot") == PromptMode::four_shot);
  CHECK_THROWS_AS(prompt_mode_from_string("two_shot"), Error);
}

TEST_CASE("parse the reference reply format") {
  const auto p = parse_scores(
      "The score of a coherence shift towards the chosen job offer is: 0.8 and the score of being influenced by "
      "minor incentives is: 0.6.");
  CHECK(p.coherence_shift == 0.8);
  CHECK(p.influence == 0.6);
  CHECK_FALSE(p.clamped);
}

TEST_CASE("parsing tolerates case, whitespace and surrounding text") {
  const auto p = parse_scores(
      "Sure!\nTHE SCORE OF A COHERENCE  SHIFT towards the chosen\tjob offer is:0.35, and the score of being "
      "influenced by minor incentives is :  1.\nHope this helps.");
  CHECK(p.coherence_shift == 0.35);
  CHECK(p.influence == 1.0);
  const auto q = parse_scores(
      "influenced by minor incentives is: .2 ... coherence shift towards the chosen job offer is: 0");
  CHECK(q.coherence_shift == 0.0);
  CHECK(q.influence == 0.2);
}

TEST_CASE("marginal values are clamped, others rejected") {
  auto p = parse_scores(reply(1.03, -0.02));
  CHECK(p.coherence_shift == 1.0);
  CHECK(p.influence == 0.0);
  CHECK(p.clamped);
  CHECK_THROWS_AS(parse_scores(reply(1.2, 0.5)), Error);
  CHECK_THROWS_AS(parse_scores(reply(0.5, -0.3)), Error);
}

TEST_CASE("malformed replies are parse errors carrying the text") {
  for (const std::string bad :
       {"", "I cannot answer that.", "The score of a coherence shift towards the chosen job offer is: high",
        "The score of a coherence shift towards the chosen job offer is: 0.5",
        "coherence shift towards the chosen job offer is: 0.5 and influenced by incentives is: 0.4"}) {
    CAPTURE(bad);
    try {
      parse_scores(bad);
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::parse);
      CHECK(std::string(e.what()).find(bad) != std::string::npos);
    }
  }
}

TEST_CASE("product mapping yields a distribution") {
  for (double s1 : {0.0, 0.1, 0.5, 0.77, 1.0})
    for (double s2 : {0.0, 0.3, 0.5, 1.0}) {
      const auto p = scores_to_class_probs({s1, s2, false});
      double sum = 0.0;
      for (double v : p) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(p[index_of(CognitiveStyle::UpCisUpInf)] == doctest::Approx(s1 * s2));
      CHECK(p[index_of(CognitiveStyle::DownCisDownInf)] == doctest::Approx((1 - s1) * (1 - s2)));
    }
}

TEST_CASE("a client that encodes the true class scores AUC 1") {
  const auto recs = sample_records(40, 3);
  OracleClient client(recs);
  LlmBaselineOptions opt;
  opt.max_in_flight = 4;
  const auto rep = run_llm_baseline(recs, client, prompts(), opt);
  CHECK(rep.total == 40);
  CHECK(rep.parse_failures == 0);
  CHECK(rep.retries == 0);
  CHECK(rep.evaluation.mean_auc == doctest::Approx(1.0));
  CHECK(rep.evaluation.feature_set == "llm-zero_shot");
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(rep.results[i].participant_id == recs[i].participant_id);
  const auto j = llm_report_to_json(rep);
  CHECK(j["parse_failure_rate"] == 0.0);
  CHECK(j["records"].size() == 40);
}

TEST_CASE("garbage replies are excluded after one retry") {
  const auto recs = sample_records(12, 4);
  ScriptedClient client({std::string("no idea")});
  const auto rep = run_llm_baseline(recs, client, prompts(), {});
  CHECK(client.calls() == 24);
  CHECK(rep.parse_failures == 12);
  CHECK(rep.retries == 12);
  CHECK(std::isnan(rep.evaluation.mean_auc));
  REQUIRE_FALSE(rep.evaluation.warnings.empty());
  CHECK(rep.evaluation.warnings.front().find("100%") != std::string::npos);
  CHECK(llm_report_to_json(rep)["parse_failure_rate"] == 1.0);
}

TEST_CASE("a failed first call is retried once") {
  const auto recs = sample_records(8, 5);
  LlmBaselineOptions opt;
  opt.max_in_flight = 1;
  ScriptedClient client({std::nullopt, reply(0.6, 0.4)});
  const auto rep = run_llm_baseline(recs, client, prompts(), opt);
  CHECK(rep.parse_failures == 0);
  CHECK(rep.retries == 8);
  for (const auto& r : rep.results) CHECK(r.attempts == 2);

  ScriptedClient clamping({reply(1.01, 0.5)});
  CHECK(run_llm_baseline(recs, clamping, prompts(), opt).clamped == 8);
}

TEST_CASE("an unreachable endpoint aborts and keeps finished results") {
  const auto recs = sample_records(10, 6);
  const auto path = fs::temp_directory_path() / "cogstyle_llm_partial.ndjson";
  fs::remove(path);
  DyingClient client(4);
  LlmBaselineOptions opt;
  opt.max_in_flight = 1;
  opt.partial_results_path = path;
  CHECK_THROWS_AS(run_llm_baseline(recs, client, prompts(), opt), EndpointUnreachable);
  REQUIRE(fs::exists(path));
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["coherence_shift"] == 0.5);
    ++lines;
  }
  CHECK(lines == 4);
}

TEST_CASE("HTTP client speaks the chat completion protocol") {
  MockServer server;
  LlmClientConfig cfg;
  cfg.endpoint = server.url("/v1/chat/completions");
  cfg.model = "mock-model";
  cfg.api_key = "sk-test";
  HttpChatClient client(cfg);
  const auto out = client.complete(build_prompt(prompts(), "essay text", PromptMode::zero_shot));
  REQUIRE(out);
  CHECK(parse_scores(*out).influence == doctest::Approx(0.75));
  {
    std::lock_guard lock(server.mutex);
    CHECK(server.last_body["model"] == "mock-model");
    CHECK(server.last_body["temperature"] == 0);
    CHECK(server.last_body["messages"][1]["content"] == "essay text");
  }

  cfg.api_key = "wrong";
  CHECK_FALSE(HttpChatClient(cfg).complete({{"user", "x"}}).has_value());
  cfg.endpoint = server.url("/plain");
  CHECK(HttpChatClient(cfg).complete({{"user", "x"}}).has_value());
  cfg.endpoint = server.url("/broken");
  CHECK_FALSE(HttpChatClient(cfg).complete({{"user", "x"}}).has_value());

  cfg.endpoint = server.url("/v1/chat/completions");
  cfg.api_key = "sk-test";
  HttpChatClient good(cfg);
  const auto recs = sample_records(6, 8);
  const auto rep = run_llm_baseline(recs, good, prompts(), {});
  CHECK(rep.parse_failures == 0);
  CHECK(server.hits >= 6);
}

TEST_CASE("HTTP client reports an unreachable endpoint") {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  LlmClientConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.timeout_seconds = 2;
  HttpChatClient client(cfg);
  CHECK_THROWS_AS(client.complete({{"user", "x"}}), EndpointUnreachable);
  cfg.endpoint = "ftp://example.org";
  CHECK_THROWS_AS(HttpChatClient{cfg}, Error);
}

TEST_CASE("client configuration reads a file with environment overrides") {
  const auto path = fs::temp_directory_path() / "cogstyle_llm_config.json";
  std::ofstream(path) << R"({"endpoint":"http://localhost:9/v1/chat/completions","model":"m1","max_in_flight":2})";
  ::unsetenv("COGSTYLE_LLM_ENDPOINT");
  ::unsetenv("COGSTYLE_LLM_MODEL");
  ::unsetenv("COGSTYLE_LLM_API_KEY");
  auto c = LlmClientConfig::load(path);
  CHECK(c.model == "m1");
  CHECK(c.max_in_flight == 2);
  ::setenv("COGSTYLE_LLM_MODEL", "m2", 1);
  ::setenv("COGSTYLE_LLM_API_KEY", "k", 1);
  c = LlmClientConfig::load(path);
  CHECK(c.model == "m2");
  CHECK(c.api_key == "k");
  ::unsetenv("COGSTYLE_LLM_MODEL");
  ::unsetenv("COGSTYLE_LLM_API_KEY");
  CHECK_THROWS_AS(LlmClientConfig::load(""), Error);
  CHECK_THROWS_AS(LlmClientConfig::load(fs::temp_directory_path() / "nope_cfg.json"), Error);
}
