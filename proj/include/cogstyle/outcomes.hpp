#pragma once

// Per-participant outcome rows derived from a record export, and the
// outcomes CSV that the evaluation commands read labels from.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cogstyle/scoring.hpp"

namespace cogstyle {

struct OutcomeRow {
  std::string participant_id;
  Offer choice = Offer::A;
  Offer loc_plus = Offer::A;
  int psi_pre = 0;
  int psi_post = 0;
  int cis = 0;
  bool inf = false;
  CognitiveStyle style = CognitiveStyle::UpCisUpInf;
};

struct RowError {
  std::size_t line = 0;        // 1-based line in the input
  std::string participant_id;  // empty when unreadable
  std::string message;         // all problems on the line, "; "-separated
};

struct ScoreResult {
  std::vector<OutcomeRow> rows;  // ordered by participant_id
  std::vector<RowError> errors;  // input order
};

/// Scores every line of an NDJSON export independently. Unparseable lines,
/// schema violations, stored outcomes that disagree with recomputation and
/// repeated ids become row errors; the remaining rows are still scored.
ScoreResult score_records_ndjson(const std::string& text);

/// participant_id,choice,loc_plus,psi_pre,psi_post,cis,inf,class with cis
/// multiplied by cis_scale (classification always uses the raw value).
std::string format_outcomes_csv(const std::vector<OutcomeRow>& rows, double cis_scale = 1.0);
std::string format_row_errors_csv(const std::vector<RowError>& errors);

/// Labels from any CSV with participant_id and class columns.
std::map<std::string, CognitiveStyle> parse_outcomes_csv(const std::string& text, const std::string& source = "<memory>");
std::map<std::string, CognitiveStyle> read_outcomes_csv(const std::filesystem::path& path);

}  // namespace cogstyle
