#include "cogstyle/outcomes.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cogstyle/errors.hpp"
#include "cogstyle/features.hpp"
#include "cogstyle/record.hpp"

namespace cogstyle {

using nlohmann::json;

ScoreResult score_records_ndjson(const std::string& text) {
  ScoreResult out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      out.errors.push_back({lineno, "", std::string("invalid JSON: ") + e.what()});
      continue;
    }
    std::string id;
    if (j.is_object() && j.contains("participant_id") && j["participant_id"].is_string())
      id = j["participant_id"].get<std::string>();
    const auto errs = validate_record_json(j);
    if (!errs.empty()) {
      std::string msg;
      for (const auto& e : errs) msg += (msg.empty() ? "" : "; ") + e;
      out.errors.push_back({lineno, id, msg});
      continue;
    }
    try {
      const auto r = record_from_json(j);
      audit_record(r);
      if (!seen.insert(id).second) {
        out.errors.push_back({lineno, id, "duplicate participant_id"});
        continue;
      }
      const auto& o = r.outcome;
      out.rows.push_back({id, o.choice, r.config.loc_plus, o.psi_pre, o.psi_post, o.cis, o.inf, o.style});
    } catch (const Error& e) {
      out.errors.push_back({lineno, id, e.what()});
    }
  }
  std::sort(out.rows.begin(), out.rows.end(),
            [](const OutcomeRow& a, const OutcomeRow& b) { return a.participant_id < b.participant_id; });
  return out;
}

std::string format_outcomes_csv(const std::vector<OutcomeRow>& rows, double cis_scale) {
  std::string out = "participant_id,choice,loc_plus,psi_pre,psi_post,cis,inf,class\n";
  for (const auto& r : rows) {
    out += csv_field(r.participant_id);
    out += ',';
    out += to_string(r.choice);
    out += ',';
    out += to_string(r.loc_plus);
    out += ',' + std::to_string(r.psi_pre) + ',' + std::to_string(r.psi_post) + ',';
    out += cis_scale == 1.0 ? std::to_string(r.cis) : format_double(scale_cis(r.cis, cis_scale));
    out += r.inf ? ",true," : ",false,";
    out += to_string(r.style);
    out += '\n';
  }
  return out;
}

std::string format_row_errors_csv(const std::vector<RowError>& errors) {
  std::string out = "line,participant_id,error\n";
  for (const auto& e : errors)
    out += std::to_string(e.line) + ',' + csv_field(e.participant_id) + ',' + csv_field(e.message) + '\n';
  return out;
}

std::map<std::string, CognitiveStyle> parse_outcomes_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::parse, source + ": empty outcomes file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  const auto id_col = std::find(header.begin(), header.end(), "participant_id") - header.begin();
  const auto class_col = std::find(header.begin(), header.end(), "class") - header.begin();
  if (id_col == static_cast<long>(header.size()) || class_col == static_cast<long>(header.size()))
    fail(ErrorKind::parse, source + ": header needs participant_id and class columns");

  std::map<std::string, CognitiveStyle> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string where = source + " line " + std::to_string(lineno);
    if (f.size() != header.size()) fail(ErrorKind::parse, where + ": wrong number of fields");
    CognitiveStyle style;
    try {
      style = style_from_string(f[class_col]);
    } catch (const Error&) {
      fail(ErrorKind::parse, where + ": unknown class '" + f[class_col] + "'", "class");
    }
    if (!labels.emplace(f[id_col], style).second)
      fail(ErrorKind::validation, where + ": duplicate participant_id " + f[id_col], "participant_id");
  }
  return labels;
}

std::map<std::string, CognitiveStyle> read_outcomes_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::configuration, "cannot open outcomes file " + path.string(), path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_outcomes_csv(ss.str(), path.string());
}

}  // namespace cogstyle
