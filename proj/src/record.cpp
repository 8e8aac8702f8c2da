#include "cogstyle/record.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "cogstyle/errors.hpp"

namespace cogstyle {

using nlohmann::json;
using nlohmann::ordered_json;

std::string ParticipantRecord::essay() const { return writings[0].text + "\n\n" + writings[1].text; }

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

bool valid_participant_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  return true;
}

bool is_int(const json& j) { return j.is_number_integer() || j.is_number_unsigned(); }

void check_snapshot(const json& j, const std::string& path, const char* phase, std::vector<std::string>& errs) {
  if (!j.is_object()) {
    errs.push_back(path + ": expected object");
    return;
  }
  if (!j.contains("phase") || j["phase"] != phase) errs.push_back(path + ".phase: expected \"" + phase + "\"");
  if (!j.contains("responses") || !j["responses"].is_object()) {
    errs.push_back(path + ".responses: expected object");
  } else {
    for (auto a : kAttributes) {
      const std::string name(to_string(a));
      const auto p = path + ".responses." + name;
      if (!j["responses"].contains(name)) {
        errs.push_back(p + ": missing");
        continue;
      }
      const auto& r = j["responses"][name];
      for (const char* pole : {"plus", "minus"}) {
        if (!r.is_object() || !r.contains(pole) || !is_int(r[pole]) || !PreferenceValue::valid(r[pole].get<int>()))
          errs.push_back(p + "." + pole + ": expected one of -5,-3,-1,1,3,5");
      }
      if (r.is_object() && r.size() != 2) errs.push_back(p + ": unexpected fields");
    }
    if (j["responses"].size() != kAttributeCount) errs.push_back(path + ".responses: expected exactly four attributes");
  }
  if (!j.contains("weights") || !j["weights"].is_object()) {
    errs.push_back(path + ".weights: expected object");
  } else {
    for (auto a : kAttributes) {
      const std::string name(to_string(a));
      if (!j["weights"].contains(name) || !is_int(j["weights"][name]) ||
          !AttributeWeight::valid(j["weights"][name].get<int>()))
        errs.push_back(path + ".weights." + name + ": expected integer 1..8");
    }
    if (j["weights"].size() != kAttributeCount) errs.push_back(path + ".weights: expected exactly four attributes");
  }
  if (!j.contains("filler_responses") || !j["filler_responses"].is_object()) {
    errs.push_back(path + ".filler_responses: expected object");
  } else {
    for (const auto& [id, v] : j["filler_responses"].items())
      if (!is_int(v) || !PreferenceValue::valid(v.get<int>()))
        errs.push_back(path + ".filler_responses." + id + ": expected one of -5,-3,-1,1,3,5");
  }
  if (j.size() != 4) errs.push_back(path + ": unexpected fields");
}

PreferenceSnapshot snapshot_from_json(const json& j) {
  std::map<Attribute, std::pair<int, int>> ratings;
  std::map<Attribute, int> weights;
  std::map<std::string, int> fillers;
  for (auto a : kAttributes) {
    const std::string name(to_string(a));
    const auto& r = j.at("responses").at(name);
    ratings[a] = {r.at("plus").get<int>(), r.at("minus").get<int>()};
    weights[a] = j.at("weights").at(name).get<int>();
  }
  for (const auto& [id, v] : j.at("filler_responses").items()) fillers[id] = v.get<int>();
  return PreferenceSnapshot::from_maps(phase_from_string(j.at("phase").get<std::string>()), ratings, weights,
                                       fillers);
}

}  // namespace

int count_words(std::string_view text) {
  int count = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

ordered_json snapshot_to_json(const PreferenceSnapshot& s) {
  ordered_json j;
  j["phase"] = to_string(s.phase);
  ordered_json responses = ordered_json::object();
  ordered_json weights = ordered_json::object();
  for (auto a : kAttributes) {
    const std::string name(to_string(a));
    responses[name] = {{"plus", s.rating(a).plus.value()}, {"minus", s.rating(a).minus.value()}};
    weights[name] = s.weight(a).value();
  }
  j["responses"] = std::move(responses);
  j["weights"] = std::move(weights);
  ordered_json fillers = ordered_json::object();
  for (const auto& [id, v] : s.filler_responses) fillers[id] = v.value();
  j["filler_responses"] = std::move(fillers);
  return j;
}

ordered_json config_to_json(const OfferConfiguration& c) {
  ordered_json j;
  for (auto [key, offer] : {std::pair{"offer_a_signs", Offer::A}, std::pair{"offer_b_signs", Offer::B}}) {
    ordered_json signs = ordered_json::object();
    for (auto a : kAttributes) signs[std::string(to_string(a))] = OfferConfiguration::signs_for(offer).sign(a);
    j[key] = std::move(signs);
  }
  j["loc_plus"] = to_string(c.loc_plus);
  return j;
}

ordered_json outcome_to_json(const DecisionOutcome& o) {
  ordered_json j;
  j["choice"] = to_string(o.choice);
  j["psi_pre"] = o.psi_pre;
  j["psi_post"] = o.psi_post;
  j["cis"] = o.cis;
  j["inf"] = o.inf;
  j["style"] = to_string(o.style);
  return j;
}

ordered_json record_to_json(const ParticipantRecord& r) {
  ordered_json j;
  j["participant_id"] = r.participant_id;
  ordered_json writings = ordered_json::array();
  for (const auto& w : r.writings)
    writings.push_back({{"stage", w.stage == 1 ? "writing_1" : "writing_2"}, {"text", w.text}, {"word_count", w.word_count}});
  j["writings"] = std::move(writings);
  j["pre"] = snapshot_to_json(r.pre);
  j["post"] = snapshot_to_json(r.post);
  j["config"] = config_to_json(r.config);
  j["choice"] = to_string(r.choice);
  j["outcome"] = outcome_to_json(r.outcome);
  j["distraction_score"] = r.distraction_score ? json(*r.distraction_score) : json(nullptr);
  return j;
}

std::string record_to_line(const ParticipantRecord& r) { return record_to_json(r).dump(); }

std::vector<std::string> validate_record_json(const json& j) {
  std::vector<std::string> errs;
  if (!j.is_object()) return {"record: expected object"};

  static const std::vector<std::string> required{"participant_id", "writings", "pre",     "post",
                                                 "config",         "choice",   "outcome", "distraction_score"};
  for (const auto& k : required)
    if (!j.contains(k)) errs.push_back(k + ": missing");
  for (const auto& [k, v] : j.items())
    if (std::find(required.begin(), required.end(), k) == required.end()) errs.push_back(k + ": unexpected field");
  if (!errs.empty()) return errs;

  if (!j["participant_id"].is_string() || !valid_participant_id(j["participant_id"].get<std::string>()))
    errs.push_back("participant_id: expected 1-64 characters of [A-Za-z0-9_-]");

  const auto& w = j["writings"];
  if (!w.is_array() || w.size() != 2) {
    errs.push_back("writings: expected array of two responses");
  } else {
    for (std::size_t i = 0; i < 2; ++i) {
      const auto p = "writings[" + std::to_string(i) + "]";
      const auto& e = w[i];
      const std::string stage = i == 0 ? "writing_1" : "writing_2";
      if (!e.is_object() || !e.contains("stage") || e["stage"] != stage) errs.push_back(p + ".stage: expected " + stage);
      if (!e.is_object() || !e.contains("text") || !e["text"].is_string()) {
        errs.push_back(p + ".text: expected string");
      } else if (!e.contains("word_count") || !is_int(e["word_count"]) ||
                 e["word_count"].get<long long>() != count_words(e["text"].get<std::string>())) {
        errs.push_back(p + ".word_count: must equal the whitespace token count of text");
      }
      if (e.is_object() && e.size() != 3) errs.push_back(p + ": unexpected fields");
    }
  }

  check_snapshot(j["pre"], "pre", "pre", errs);
  check_snapshot(j["post"], "post", "post", errs);

  const auto& c = j["config"];
  if (!c.is_object() || !c.contains("loc_plus") || (c["loc_plus"] != "A" && c["loc_plus"] != "B")) {
    errs.push_back("config.loc_plus: expected \"A\" or \"B\"");
  }
  if (c.is_object()) {
    for (auto [key, offer] : {std::pair{"offer_a_signs", Offer::A}, std::pair{"offer_b_signs", Offer::B}}) {
      if (!c.contains(key) || !c[key].is_object() || c[key].size() != kAttributeCount) {
        errs.push_back(std::string("config.") + key + ": expected four signs");
        continue;
      }
      for (auto a : kAttributes) {
        const std::string name(to_string(a));
        if (!c[key].contains(name) || !is_int(c[key][name]) ||
            c[key][name].get<int>() != OfferConfiguration::signs_for(offer).sign(a))
          errs.push_back(std::string("config.") + key + "." + name + ": does not match the fixed offer pattern");
      }
    }
    if (c.size() != 3) errs.push_back("config: unexpected fields");
  }

  if (j["choice"] != "A" && j["choice"] != "B") errs.push_back("choice: expected \"A\" or \"B\"");

  const auto& o = j["outcome"];
  if (!o.is_object()) {
    errs.push_back("outcome: expected object");
  } else {
    if (!o.contains("choice") || o["choice"] != j["choice"]) errs.push_back("outcome.choice: must equal choice");
    for (const char* k : {"psi_pre", "psi_post"})
      if (!o.contains(k) || !is_int(o[k]) || std::abs(o[k].get<long long>()) > kPsiBound)
        errs.push_back(std::string("outcome.") + k + ": expected integer in [-320, 320]");
    if (!o.contains("cis") || !is_int(o["cis"]) || std::abs(o["cis"].get<long long>()) > kCisBound)
      errs.push_back("outcome.cis: expected integer in [-640, 640]");
    if (!o.contains("inf") || !o["inf"].is_boolean()) errs.push_back("outcome.inf: expected boolean");
    bool style_ok = o.contains("style") && o["style"].is_string();
    if (style_ok) {
      style_ok = false;
      for (auto s : kStyles)
        if (o["style"] == to_string(s)) style_ok = true;
    }
    if (!style_ok) errs.push_back("outcome.style: expected one of the four cognitive-style labels");
    if (o.size() != 6) errs.push_back("outcome: unexpected fields");
  }

  const auto& d = j["distraction_score"];
  if (!d.is_null() && (!is_int(d) || d.get<long long>() < 0)) errs.push_back("distraction_score: expected null or non-negative integer");
  return errs;
}

ParticipantRecord record_from_json(const json& j) {
  const auto errs = validate_record_json(j);
  if (!errs.empty()) {
    std::string msg = "record schema violation: " + errs.front();
    if (errs.size() > 1) msg += " (+" + std::to_string(errs.size() - 1) + " more)";
    fail(ErrorKind::validation, msg, errs.front().substr(0, errs.front().find(':')));
  }
  ParticipantRecord r{
      j["participant_id"].get<std::string>(),
      {WritingResponse{1, j["writings"][0]["text"].get<std::string>(), j["writings"][0]["word_count"].get<int>()},
       WritingResponse{2, j["writings"][1]["text"].get<std::string>(), j["writings"][1]["word_count"].get<int>()}},
      snapshot_from_json(j["pre"]),
      snapshot_from_json(j["post"]),
      OfferConfiguration{offer_from_string(j["config"]["loc_plus"].get<std::string>())},
      offer_from_string(j["choice"].get<std::string>()),
      DecisionOutcome{},
      std::nullopt};
  const auto& o = j["outcome"];
  r.outcome = DecisionOutcome{offer_from_string(o["choice"].get<std::string>()),
                              o["psi_pre"].get<int>(),
                              o["psi_post"].get<int>(),
                              o["cis"].get<int>(),
                              o["inf"].get<bool>(),
                              style_from_string(o["style"].get<std::string>())};
  if (!j["distraction_score"].is_null()) r.distraction_score = j["distraction_score"].get<int>();
  return r;
}

void audit_record(const ParticipantRecord& r) {
  const auto fresh = compute_outcome(r.pre, r.post, r.choice, r.config);
  if (!(fresh == r.outcome))
    fail(ErrorKind::integrity,
         "stored outcome for " + r.participant_id + " does not match recomputation (stored cis " +
             std::to_string(r.outcome.cis) + ", recomputed " + std::to_string(fresh.cis) + ")",
         r.participant_id);
}

}  // namespace cogstyle
