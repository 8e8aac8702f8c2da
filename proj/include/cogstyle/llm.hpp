#pragma once

// Prompting baseline: builds zero-/four-shot chat prompts from the prompt
// assets, parses the two scores out of the model's reply, maps them onto the
// four classes and scores the result with macro one-vs-rest AUC.

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cogstyle/errors.hpp"
#include "cogstyle/evaluation.hpp"
#include "cogstyle/record.hpp"

namespace cogstyle {

enum class PromptMode { zero_shot, four_shot };
PromptMode prompt_mode_from_string(std::string_view s);
std::string_view to_string(PromptMode m);

struct ChatMessage {
  std::string role;
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct PromptSet {
  std::string version;
  std::string zero_shot;
  std::string four_shot;

  static PromptSet load(const std::filesystem::path& path);
  static PromptSet parse(const std::string& json_text, const std::string& source = "<memory>");
};

/// [system: verbatim prompt for the mode, user: essay]. Empty essay is a
/// validation error.
std::vector<ChatMessage> build_prompt(const PromptSet& prompts, const std::string& essay, PromptMode mode);
nlohmann::ordered_json messages_to_json(const std::vector<ChatMessage>& messages);

struct LlmScorePair {
  double coherence_shift = 0.0;
  double influence = 0.0;
  bool clamped = false;  // a value was marginally outside [0,1]
};

/// Reads the numbers following the two fixed reply phrases (case-insensitive,
/// flexible whitespace). Values up to 0.05 outside [0,1] are clamped and
/// flagged; anything else is a parse error carrying the raw text.
LlmScorePair parse_scores(const std::string& response);

/// Probabilities in class-index order (DownCisDownInf, DownCisUpInf,
/// UpCisDownInf, UpCisUpInf) from the product of the two scores.
std::array<double, kStyleCount> scores_to_class_probs(const LlmScorePair& pair);

/// Thrown when the endpoint cannot be reached at all.
class EndpointUnreachable : public Error {
 public:
  explicit EndpointUnreachable(std::string message) : Error(ErrorKind::runtime, std::move(message), "endpoint") {}
};

/// Messages in, text out.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the reply text, or nullopt when the service answered but the
  /// call failed (non-2xx, malformed body). Throws EndpointUnreachable.
  virtual std::optional<std::string> complete(const std::vector<ChatMessage>& messages) = 0;
};

struct LlmClientConfig {
  std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  std::string api_key;
  int max_in_flight = 4;
  int timeout_seconds = 60;

  /// JSON file {endpoint, model, api_key, max_in_flight, timeout_seconds};
  /// COGSTYLE_LLM_ENDPOINT / _MODEL / _API_KEY override file values. An
  /// empty path reads the environment only.
  static LlmClientConfig load(const std::filesystem::path& path);
};

/// POSTs {"model", "messages", "temperature": 0} and accepts either an
/// OpenAI-style {"choices":[{"message":{"content"}}]} or {"text"} reply.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(LlmClientConfig config);
  std::optional<std::string> complete(const std::vector<ChatMessage>& messages) override;

 private:
  LlmClientConfig config_;
  std::string base_;  // scheme://host[:port]
  std::string path_;
};

struct LlmBaselineOptions {
  PromptMode mode = PromptMode::zero_shot;
  int max_in_flight = 4;
  std::string feature_set;  // report label; defaults to "llm-<mode>"
  /// Written on abort: one JSON line per finished record.
  std::optional<std::filesystem::path> partial_results_path;
};

struct LlmRecordResult {
  std::string participant_id;
  int attempts = 0;
  std::optional<LlmScorePair> scores;
  std::string last_response;
};

struct LlmBaselineReport {
  EvaluationReport evaluation;  // k_folds = 0; mean_auc NaN when nothing was scorable
  std::size_t total = 0;
  std::size_t parse_failures = 0;  // records excluded after the retry
  std::size_t retries = 0;
  std::size_t clamped = 0;
  std::vector<LlmRecordResult> results;  // record order
};

/// One retry per failed call or parse, then exclusion.
LlmBaselineReport run_llm_baseline(const std::vector<ParticipantRecord>& records, ChatClient& client,
                                   const PromptSet& prompts, const LlmBaselineOptions& options);

nlohmann::ordered_json llm_report_to_json(const LlmBaselineReport& r);

}  // namespace cogstyle
