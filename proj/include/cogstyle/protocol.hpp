#pragma once

// Session state machine for the two-stage protocol:
//   writing_1 -> writing_2 -> pre_prefs -> distraction -> offer_view -> choice
//   -> post_prefs -> complete
// Every operation checks the stage first; nothing moves backwards.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cogstyle/assets.hpp"
#include "cogstyle/errors.hpp"
#include "cogstyle/record.hpp"
#include "cogstyle/rng.hpp"

namespace cogstyle {

enum class Stage { writing_1, writing_2, pre_prefs, distraction, offer_view, choice, post_prefs, complete };

std::string_view to_string(Stage s);

/// Writing rejected for length; carries the measured count.
class WordCountError : public Error {
 public:
  WordCountError(std::string message, int measured, int min_words, int max_words)
      : Error(ErrorKind::validation, std::move(message), "text"),
        measured_(measured), min_(min_words), max_(max_words) {}
  int measured() const noexcept { return measured_; }
  int min_words() const noexcept { return min_; }
  int max_words() const noexcept { return max_; }

 private:
  int measured_, min_, max_;
};

struct SessionState {
  std::string session_id;
  std::string participant_id;
  Stage stage = Stage::writing_1;
  OfferConfiguration config;
  std::optional<std::uint64_t> seed;
  std::string created_at;
  std::string updated_at;
  std::vector<WritingResponse> writings;
  std::optional<PreferenceSnapshot> pre;
  std::optional<PreferenceSnapshot> post;
  std::optional<int> distraction_score;
  std::optional<Offer> choice;
};

nlohmann::ordered_json session_to_json(const SessionState& s);

struct OfferPresentation {
  std::map<Offer, std::string> offer_texts;
  std::map<Offer, std::string> companies;
  Offer condition = Offer::A;  // offer carrying the favorable location paragraph
};

/// Append-only NDJSON log of completed records plus an in-memory index
/// rebuilt on open. Appends are single write(2) calls on an O_APPEND
/// descriptor, so a crash never leaves a half record in the middle of the log.
class RecordStore {
 public:
  /// In-memory store (nothing persisted).
  RecordStore() = default;
  /// Opens or creates `<dir>/records.ndjson`; replays and audits every line.
  explicit RecordStore(const std::filesystem::path& dir);
  ~RecordStore();
  RecordStore(const RecordStore&) = delete;
  RecordStore& operator=(const RecordStore&) = delete;

  void append(const ParticipantRecord& r);
  bool contains(const std::string& participant_id) const;
  std::vector<ParticipantRecord> records() const;  // ordered by participant_id
  std::size_t size() const;

  /// Imports an NDJSON stream; every line is schema-validated and audited
  /// before anything is appended. Returns the number of records added.
  std::size_t import_ndjson(const std::string& text);
  void flush();

 private:
  void append_locked(const ParticipantRecord& r);

  mutable std::shared_mutex mutex_;
  std::map<std::string, ParticipantRecord> index_;
  std::filesystem::path path_;
  int fd_ = -1;
};

/// Parses an NDJSON document into records (blank lines skipped).
std::vector<ParticipantRecord> parse_records_ndjson(const std::string& text);
std::string records_to_ndjson(const std::vector<ParticipantRecord>& records);

struct ExportFilter {
  bool complete_only = false;
};

class ProtocolEngine {
 public:
  ProtocolEngine(ProtocolAssets assets, std::shared_ptr<RecordStore> store);

  const ProtocolAssets& assets() const { return assets_; }
  RecordStore& store() { return *store_; }

  /// loc_plus is drawn from `seed` when given, otherwise from OS entropy.
  SessionState create_session(std::optional<std::uint64_t> seed = std::nullopt);
  SessionState session(const std::string& id) const;
  Stage stage(const std::string& id) const;

  /// which = 1 or 2.
  SessionState submit_writing(const std::string& id, int which, const std::string& text);

  /// `responses` keyed by item id, `weights` keyed by attribute name. The pre
  /// phase requires all scored and filler items, the post phase the scored
  /// items only. The post submission keeps the session at post_prefs until
  /// finalize.
  SessionState submit_preferences(const std::string& id, Phase phase, const std::map<std::string, int>& responses,
                                  const std::map<std::string, int>& weights);

  /// Score is optional and gates nothing.
  SessionState submit_distraction(const std::string& id, std::optional<int> score);

  /// Valid at offer_view (and moves the session to choice) or at choice;
  /// output is identical on every call.
  OfferPresentation render_offers(const std::string& id);

  SessionState submit_choice(const std::string& id, const std::string& offer);

  ParticipantRecord finalize_session(const std::string& id);

  /// Completed records from the store plus, unless complete_only, in-progress
  /// sessions as partial documents (null for missing fields). Ordered by
  /// participant_id.
  std::vector<nlohmann::ordered_json> export_records(ExportFilter filter) const;
  std::string export_ndjson(ExportFilter filter) const;

 private:
  struct Slot {
    std::mutex mutex;
    SessionState state;
  };
  std::shared_ptr<Slot> slot(const std::string& id) const;
  static void require_stage(const SessionState& s, Stage expected, std::string_view op);
  static void touch(SessionState& s);
  std::string fresh_token(std::size_t bytes);

  ProtocolAssets assets_;
  std::shared_ptr<RecordStore> store_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::mutex entropy_mutex_;
  Rng entropy_;
};

nlohmann::ordered_json presentation_to_json(const OfferPresentation& p, bool include_condition);

}  // namespace cogstyle
