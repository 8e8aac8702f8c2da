#include "cogstyle/llm.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace cogstyle {

using nlohmann::json;
using nlohmann::ordered_json;

PromptMode prompt_mode_from_string(std::string_view s) {
  if (s == "zero_shot" || s == "0-shot" || s == "zero") return PromptMode::zero_shot;
  if (s == "four_shot" || s == "4-shot" || s == "four") return PromptMode::four_shot;
  fail(ErrorKind::configuration, "unknown prompt mode '" + std::string(s) + "'", "mode");
}

std::string_view to_string(PromptMode m) { return m == PromptMode::zero_shot ? "zero_shot" : "four_shot"; }

PromptSet PromptSet::parse(const std::string& text, const std::string& source) {
  try {
    const json j = json::parse(text);
    PromptSet p{j.at("version").get<std::string>(), j.at("zero_shot").get<std::string>(),
                j.at("four_shot").get<std::string>()};
    if (p.zero_shot.empty() || p.four_shot.empty()) fail(ErrorKind::configuration, "empty prompt text");
    return p;
  } catch (const json::exception& e) {
    fail(ErrorKind::configuration, "prompt asset file " + source + ": " + e.what(), source);
  }
}

PromptSet PromptSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::configuration, "cannot open prompt asset file " + path.string(), path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::vector<ChatMessage> build_prompt(const PromptSet& prompts, const std::string& essay, PromptMode mode) {
  if (essay.find_first_not_of(" \t\r\n") == std::string::npos)
    fail(ErrorKind::validation, "essay text is empty", "essay");
  return {ChatMessage{"system", mode == PromptMode::zero_shot ? prompts.zero_shot : prompts.four_shot},
          ChatMessage{"user", essay}};
}

ordered_json messages_to_json(const std::vector<ChatMessage>& messages) {
  ordered_json arr = ordered_json::array();
  for (const auto& m : messages) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr;
}

namespace {

double extract_score(const std::string& response, const std::regex& re, const char* what, bool& clamped) {
  std::smatch m;
  if (!std::regex_search(response, m, re))
    fail(ErrorKind::parse, std::string("no ") + what + " score found in response: " + response, what);
  const std::string num = m[1].str();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
  if (ec != std::errc() || ptr != num.data() + num.size() || !std::isfinite(v))
    fail(ErrorKind::parse, std::string("unreadable ") + what + " score '" + num + "' in response: " + response, what);
  constexpr double slack = 0.05;
  if (v < -slack || v > 1.0 + slack)
    fail(ErrorKind::parse, std::string(what) + " score " + num + " outside [0,1] in response: " + response, what);
  if (v < 0.0 || v > 1.0) {
    clamped = true;
    v = std::clamp(v, 0.0, 1.0);
  }
  return v;
}

}  // namespace

LlmScorePair parse_scores(const std::string& response) {
  static const std::string number = R"(([-+]?(?:[0-9]+(?:\.[0-9]+)?|\.[0-9]+)(?:[eE][-+]?[0-9]+)?))";
  static const std::regex coherence(
      R"(coherence\s+shift\s+towards\s+the\s+chosen\s+job\s+offer\s+is\s*:\s*)" + number, std::regex::icase);
  static const std::regex influence(R"(influenced\s+by\s+minor\s+incentives\s+is\s*:\s*)" + number, std::regex::icase);
  LlmScorePair p;
  p.coherence_shift = extract_score(response, coherence, "coherence_shift", p.clamped);
  p.influence = extract_score(response, influence, "influence", p.clamped);
  return p;
}

std::array<double, kStyleCount> scores_to_class_probs(const LlmScorePair& pair) {
  const double s1 = pair.coherence_shift, s2 = pair.influence;
  std::array<double, kStyleCount> p{};
  p[index_of(CognitiveStyle::UpCisUpInf)] = s1 * s2;
  p[index_of(CognitiveStyle::UpCisDownInf)] = s1 * (1.0 - s2);
  p[index_of(CognitiveStyle::DownCisUpInf)] = (1.0 - s1) * s2;
  p[index_of(CognitiveStyle::DownCisDownInf)] = (1.0 - s1) * (1.0 - s2);
  return p;
}

// ---------------------------------------------------------------------------
// HTTP client

LlmClientConfig LlmClientConfig::load(const std::filesystem::path& path) {
  LlmClientConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::configuration, "cannot open LLM client config " + path.string(), path.string());
    try {
      const json j = json::parse(in);
      c.endpoint = j.value("endpoint", "");
      c.model = j.value("model", "");
      c.api_key = j.value("api_key", "");
      c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
      c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    } catch (const json::exception& e) {
      fail(ErrorKind::configuration, "LLM client config " + path.string() + ": " + e.what(), path.string());
    }
  }
  if (const char* v = std::getenv("COGSTYLE_LLM_ENDPOINT")) c.endpoint = v;
  if (const char* v = std::getenv("COGSTYLE_LLM_MODEL")) c.model = v;
  if (const char* v = std::getenv("COGSTYLE_LLM_API_KEY")) c.api_key = v;
  if (c.endpoint.empty()) fail(ErrorKind::configuration, "LLM endpoint not configured", "endpoint");
  if (c.max_in_flight < 1) fail(ErrorKind::configuration, "max_in_flight must be >= 1", "max_in_flight");
  return c;
}

HttpChatClient::HttpChatClient(LlmClientConfig config) : config_(std::move(config)) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url))
    fail(ErrorKind::configuration, "endpoint must be an http(s) URL: " + config_.endpoint, "endpoint");
  base_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (base_.rfind("https://", 0) == 0)
    fail(ErrorKind::configuration, "this build has no TLS support; use an http endpoint", "endpoint");
#endif
}

std::optional<std::string> HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
  httplib::Client cli(base_);
  cli.set_connection_timeout(config_.timeout_seconds, 0);
  cli.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  ordered_json body;
  body["model"] = config_.model;
  body["messages"] = messages_to_json(messages);
  body["temperature"] = 0;
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw EndpointUnreachable("cannot reach " + config_.endpoint + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) return std::nullopt;
  try {
    const json j = json::parse(res->body);
    if (j.contains("choices")) return j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("text")) return j.at("text").get<std::string>();
  } catch (const json::exception&) {
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Baseline run

namespace {

ordered_json result_to_json(const LlmRecordResult& r) {
  ordered_json j;
  j["participant_id"] = r.participant_id;
  j["attempts"] = r.attempts;
  if (r.scores) {
    j["coherence_shift"] = r.scores->coherence_shift;
    j["influence"] = r.scores->influence;
  } else {
    j["coherence_shift"] = nullptr;
    j["influence"] = nullptr;
  }
  j["response"] = r.last_response;
  return j;
}

}  // namespace

LlmBaselineReport run_llm_baseline(const std::vector<ParticipantRecord>& records, ChatClient& client,
                                   const PromptSet& prompts, const LlmBaselineOptions& options) {
  LlmBaselineReport rep;
  rep.total = records.size();
  rep.results.resize(records.size());
  std::vector<char> done(records.size(), 0);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex err_mutex;
  std::optional<std::string> abort_message;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      if (abort) return;
      const std::size_t i = next++;
      if (i >= records.size()) return;
      auto& res = rep.results[i];
      res.participant_id = records[i].participant_id;
      try {
        const auto messages = build_prompt(prompts, records[i].essay(), options.mode);
        for (int attempt = 0; attempt < 2 && !res.scores; ++attempt) {
          ++res.attempts;
          auto reply = client.complete(messages);
          if (!reply) continue;
          res.last_response = *reply;
          try {
            res.scores = parse_scores(*reply);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::parse) throw;
          }
        }
        done[i] = 1;
      } catch (const EndpointUnreachable& e) {
        std::lock_guard lock(err_mutex);
        if (!abort_message) abort_message = e.what();
        abort = true;
        return;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::validation) {
          res.attempts = 0;  // empty essay: nothing to send, excluded
          done[i] = 1;
          continue;
        }
        std::lock_guard lock(err_mutex);
        if (!failure) failure = std::current_exception();
        abort = true;
        return;
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!failure) failure = std::current_exception();
        abort = true;
        return;
      }
    }
  };

  const int threads = std::max(1, std::min<int>(options.max_in_flight, static_cast<int>(records.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  if (failure) std::rethrow_exception(failure);
  if (abort) {
    if (options.partial_results_path) {
      std::ofstream out(*options.partial_results_path, std::ios::binary);
      for (std::size_t i = 0; i < records.size(); ++i)
        if (done[i]) out << result_to_json(rep.results[i]).dump() << "\n";
    }
    throw EndpointUnreachable(*abort_message + (options.partial_results_path
                                                     ? " (partial results in " + options.partial_results_path->string() + ")"
                                                     : std::string()));
  }

  std::vector<int> labels;
  std::vector<std::array<double, kStyleCount>> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = rep.results[i];
    if (r.attempts > 1) rep.retries += static_cast<std::size_t>(r.attempts - 1);
    if (!r.scores) {
      ++rep.parse_failures;
      continue;
    }
    if (r.scores->clamped) ++rep.clamped;
    rows.push_back(scores_to_class_probs(*r.scores));
    labels.push_back(static_cast<int>(index_of(records[i].outcome.style)));
  }

  auto& ev = rep.evaluation;
  ev.feature_set = options.feature_set.empty() ? "llm-" + std::string(to_string(options.mode)) : options.feature_set;
  ev.n = rows.size();
  ev.k_folds = 0;
  ev.k_features = 0;
  ev.mean_auc = std::nan("");
  ev.per_class_auc.fill(std::nan(""));
  Eigen::MatrixXd probs(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kStyleCount));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < kStyleCount; ++c) probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    Eigen::Index pred = 0;
    probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&pred);
    ++ev.confusion[labels[i]][pred];
  }
  if (rep.parse_failures == rep.total && rep.total > 0) ev.warnings.push_back("100% parse failure: no record was scorable");
  try {
    std::vector<double> per_class;
    ev.mean_auc = macro_ovr_auc(probs, labels, &per_class);
    for (std::size_t c = 0; c < kStyleCount; ++c) ev.per_class_auc[c] = per_class[c];
    ev.per_fold_auc = {ev.mean_auc};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::undefined_metric) throw;
    if (!rows.empty()) ev.warnings.push_back(std::string("AUC undefined: ") + e.what());
  }
  return rep;
}

ordered_json llm_report_to_json(const LlmBaselineReport& r) {
  ordered_json j = report_to_json(r.evaluation);
  j["total_records"] = r.total;
  j["parse_failures"] = r.parse_failures;
  j["parse_failure_rate"] = r.total ? static_cast<double>(r.parse_failures) / static_cast<double>(r.total) : 0.0;
  j["retries"] = r.retries;
  j["clamped"] = r.clamped;
  j["score_to_class_mapping"] = "product: UpUp=s1*s2, UpDown=s1*(1-s2), DownUp=(1-s1)*s2, DownDown=(1-s1)*(1-s2)";
  ordered_json results = ordered_json::array();
  for (const auto& x : r.results) results.push_back(result_to_json(x));
  j["records"] = results;
  return j;
}

}  // namespace cogstyle
