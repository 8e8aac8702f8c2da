#pragma once

// Participant records and their newline-delimited JSON form.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cogstyle/scoring.hpp"

namespace cogstyle {

struct WritingResponse {
  int stage = 1;  // 1 or 2
  std::string text;
  int word_count = 0;
  friend bool operator==(const WritingResponse&, const WritingResponse&) = default;
};

struct ParticipantRecord {
  std::string participant_id;
  std::array<WritingResponse, 2> writings;
  PreferenceSnapshot pre;
  PreferenceSnapshot post;
  OfferConfiguration config;
  Offer choice = Offer::A;
  DecisionOutcome outcome;
  std::optional<int> distraction_score;

  /// The two essays joined by a blank line, as fed to text feature extraction.
  std::string essay() const;
  friend bool operator==(const ParticipantRecord&, const ParticipantRecord&) = default;
};

/// Whitespace tokens after trimming. Whitespace is ASCII space, tab, newline,
/// carriage return, vertical tab and form feed; a hyphenated token counts once.
int count_words(std::string_view text);

nlohmann::ordered_json snapshot_to_json(const PreferenceSnapshot& s);
nlohmann::ordered_json config_to_json(const OfferConfiguration& c);
nlohmann::ordered_json outcome_to_json(const DecisionOutcome& o);
nlohmann::ordered_json record_to_json(const ParticipantRecord& r);

/// Schema violations in a record document; empty when valid.
std::vector<std::string> validate_record_json(const nlohmann::json& j);

/// Parses and validates a record document. Throws a validation error on any
/// schema violation; does not check the stored outcome (see audit_record).
ParticipantRecord record_from_json(const nlohmann::json& j);

/// Recomputes the outcome from raw fields; throws an integrity error on mismatch.
void audit_record(const ParticipantRecord& r);

/// One line, stable field order, no trailing newline.
std::string record_to_line(const ParticipantRecord& r);

}  // namespace cogstyle
