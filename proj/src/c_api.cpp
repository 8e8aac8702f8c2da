#include "cogstyle/cogstyle.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cogstyle/assets.hpp"
#include "cogstyle/errors.hpp"
#include "cogstyle/evaluation.hpp"
#include "cogstyle/features.hpp"
#include "cogstyle/llm.hpp"
#include "cogstyle/outcomes.hpp"
#include "cogstyle/protocol.hpp"
#include "cogstyle/record.hpp"
#include "cogstyle/scoring.hpp"
#include "cogstyle/synthetic.hpp"

#ifndef COGSTYLE_VERSION
#define COGSTYLE_VERSION "0.1.0"
#endif

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

struct cs_engine {
  std::shared_ptr<cogstyle::RecordStore> store;
  std::unique_ptr<cogstyle::ProtocolEngine> engine;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_field;

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) return nullptr;
  std::memcpy(p, s.data(), s.size());
  p[s.size()] = '\0';
  return p;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

cs_status status_of(cogstyle::ErrorKind k) {
  using cogstyle::ErrorKind;
  switch (k) {
    case ErrorKind::validation: return CS_ERR_VALIDATION;
    case ErrorKind::state: return CS_ERR_STATE;
    case ErrorKind::not_found: return CS_ERR_NOT_FOUND;
    case ErrorKind::configuration: return CS_ERR_CONFIGURATION;
    case ErrorKind::runtime: return CS_ERR_RUNTIME;
    case ErrorKind::integrity: return CS_ERR_INTEGRITY;
    case ErrorKind::parse: return CS_ERR_PARSE;
    case ErrorKind::undefined_metric: return CS_ERR_UNDEFINED_METRIC;
  }
  return CS_ERR_INTERNAL;
}

std::string error_json(const char* kind, const std::string& message, const std::string& field,
                       const ordered_json& extra = ordered_json::object()) {
  ordered_json e{{"kind", kind}, {"message", message}};
  if (!field.empty()) e["field"] = field;
  for (auto it = extra.begin(); it != extra.end(); ++it) e[it.key()] = it.value();
  return ordered_json{{"error", e}}.dump();
}

// Runs fn, translating exceptions into a status, the thread-local error and
// (when err_out is given) a JSON error document.
template <class F>
cs_status guarded(char** err_out, F&& fn) {
  try {
    g_last_error.clear();
    g_last_field.clear();
    fn();
    return CS_OK;
  } catch (const cogstyle::WordCountError& e) {
    g_last_error = e.what();
    g_last_field = e.field();
    put(err_out, error_json("validation", e.what(), e.field(),
                            {{"measured", e.measured()}, {"min", e.min_words()}, {"max", e.max_words()}}));
    return CS_ERR_VALIDATION;
  } catch (const cogstyle::Error& e) {
    g_last_error = e.what();
    g_last_field = e.field();
    put(err_out, error_json(std::string(cogstyle::to_string(e.kind())).c_str(), e.what(), e.field()));
    return status_of(e.kind());
  } catch (const json::exception& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    put(err_out, error_json("parse", g_last_error, ""));
    return CS_ERR_PARSE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    put(err_out, error_json("internal", e.what(), ""));
    return CS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    put(err_out, error_json("internal", g_last_error, ""));
    return CS_ERR_INTERNAL;
  }
}

cs_status invalid(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  g_last_field = what;
  return CS_ERR_INVALID_ARGUMENT;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) cogstyle::fail(cogstyle::ErrorKind::configuration, "cannot open " + p.string(), p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) cogstyle::fail(cogstyle::ErrorKind::runtime, "cannot write " + p.string(), p.string());
}

ordered_json protocol_json(const cogstyle::ProtocolAssets& a) {
  using namespace cogstyle;
  ordered_json j;
  j["version"] = a.version;
  j["fingerprint"] = a.fingerprint;
  ordered_json w = ordered_json::array();
  for (const auto& p : a.writing)
    w.push_back({{"stage", p.stage}, {"prompt", p.prompt}, {"min_words", p.min_words}, {"max_words", p.max_words}});
  j["writing"] = w;
  j["scale"] = {-5, -3, -1, 1, 3, 5};
  j["weight_range"] = {1, 8};
  j["questionnaire_background"] = a.questionnaire_background;
  ordered_json pre = ordered_json::array();
  for (const auto& it : a.items) pre.push_back({{"id", it.id}, {"text", a.expand(it.pre_text)}});
  j["pre_items"] = pre;
  j["post_background"] = a.post_background;
  ordered_json post = ordered_json::array();
  for (const auto& id : a.post_item_order) {
    const auto* it = a.find_item(id);
    post.push_back({{"id", id}, {"text", a.expand(it->post_text.value_or(it->pre_text))}});
  }
  j["post_items"] = post;
  ordered_json ws = ordered_json::array();
  for (const auto& q : a.weights) ws.push_back({{"attribute", to_string(q.attribute)}, {"text", q.text}});
  j["weights"] = ws;
  j["distraction"] = {{"title", a.distraction_title},
                      {"instructions", a.distraction_instructions},
                      {"max_score", a.distraction_max_score}};
  j["offer_background"] = a.offer_background;
  j["decision_prompt"] = a.decision_prompt;
  return j;
}

std::map<std::string, int> int_map(const json& j, const char* key) {
  std::map<std::string, int> m;
  if (!j.contains(key)) return m;
  const auto& o = j.at(key);
  if (!o.is_object()) cogstyle::fail(cogstyle::ErrorKind::validation, std::string(key) + " must be an object", key);
  for (const auto& [k, v] : o.items()) {
    if (!v.is_number_integer())
      cogstyle::fail(cogstyle::ErrorKind::validation, std::string(key) + "." + k + " must be an integer", k);
    m[k] = v.get<int>();
  }
  return m;
}

json parse_body(const char* text) {
  if (!text || !*text) return json::object();
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    cogstyle::fail(cogstyle::ErrorKind::parse, std::string("request body is not valid JSON: ") + e.what(), "body");
  }
}

}  // namespace

extern "C" {

const char* cs_version(void) { return COGSTYLE_VERSION; }

const char* cs_status_name(cs_status s) {
  switch (s) {
    case CS_OK: return "ok";
    case CS_ERR_VALIDATION: return "validation";
    case CS_ERR_STATE: return "state";
    case CS_ERR_NOT_FOUND: return "not_found";
    case CS_ERR_CONFIGURATION: return "configuration";
    case CS_ERR_RUNTIME: return "runtime";
    case CS_ERR_INTEGRITY: return "integrity";
    case CS_ERR_PARSE: return "parse";
    case CS_ERR_UNDEFINED_METRIC: return "undefined_metric";
    case CS_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* cs_last_error(void) { return g_last_error.c_str(); }
const char* cs_last_error_field(void) { return g_last_field.c_str(); }
void cs_free_string(char* s) { std::free(s); }

cs_status cs_compute_rho(int plus, int minus, int weight, int* out) {
  if (!out) return invalid("out");
  return guarded(nullptr, [&] { *out = cogstyle::compute_rho(plus, minus, weight); });
}

cs_status cs_classify(int cis, int inf, const char** out_class) {
  if (!out_class) return invalid("out_class");
  return guarded(nullptr, [&] { *out_class = cogstyle::to_string(cogstyle::classify_style(cis, inf != 0)).data(); });
}

cs_status cs_score_record(const char* record_json, char** out_json) {
  if (!record_json) return invalid("record_json");
  return guarded(out_json, [&] {
    const auto r = cogstyle::record_from_json(json::parse(record_json));
    const auto o = cogstyle::compute_outcome(r.pre, r.post, r.choice, r.config);
    put(out_json, cogstyle::outcome_to_json(o).dump());
  });
}

cs_status cs_score_ndjson(const char* ndjson, double cis_scale, char** out_csv, char** out_errors_csv) {
  if (!ndjson) return invalid("ndjson");
  bool row_errors = false;
  const auto st = guarded(nullptr, [&] {
    if (!(cis_scale > 0.0)) cogstyle::fail(cogstyle::ErrorKind::configuration, "cis scale must be > 0", "cis_scale");
    const auto res = cogstyle::score_records_ndjson(ndjson);
    put(out_csv, cogstyle::format_outcomes_csv(res.rows, cis_scale));
    put(out_errors_csv, cogstyle::format_row_errors_csv(res.errors));
    row_errors = !res.errors.empty();
    if (row_errors) {
      g_last_error = std::to_string(res.errors.size()) + " row(s) failed validation";
      g_last_field = "records";
    }
  });
  if (st == CS_OK && row_errors) return CS_ERR_VALIDATION;
  return st;
}

cs_status cs_validate_record(const char* record_json, char** out_json) {
  if (!record_json) return invalid("record_json");
  return guarded(out_json, [&] {
    json j;
    try {
      j = json::parse(record_json);
    } catch (const json::exception& e) {
      put(out_json, json::array({std::string("invalid JSON: ") + e.what()}).dump());
      return;
    }
    auto errs = cogstyle::validate_record_json(j);
    if (errs.empty()) {
      try {
        cogstyle::audit_record(cogstyle::record_from_json(j));
      } catch (const cogstyle::Error& e) {
        errs.push_back(e.what());
      }
    }
    put(out_json, json(errs).dump());
  });
}

cs_status cs_engine_open(const char* assets_path, const char* store_dir, cs_engine** out) {
  if (!out) return invalid("out");
  *out = nullptr;
  return guarded(nullptr, [&] {
    const fs::path ap = assets_path ? fs::path(assets_path) : cogstyle::default_asset_dir() / "protocol_v1.json";
    auto assets = cogstyle::ProtocolAssets::load(ap);
    auto e = std::make_unique<cs_engine>();
    if (store_dir) {
      fs::create_directories(store_dir);
      e->store = std::make_shared<cogstyle::RecordStore>(fs::path(store_dir));
    } else {
      e->store = std::make_shared<cogstyle::RecordStore>();
    }
    e->engine = std::make_unique<cogstyle::ProtocolEngine>(std::move(assets), e->store);
    *out = e.release();
  });
}

void cs_engine_close(cs_engine* engine) { delete engine; }

cs_status cs_engine_flush(cs_engine* engine) {
  if (!engine) return invalid("engine");
  return guarded(nullptr, [&] { engine->store->flush(); });
}

cs_status cs_engine_record_count(cs_engine* engine, size_t* out) {
  if (!engine) return invalid("engine");
  if (!out) return invalid("out");
  return guarded(nullptr, [&] { *out = engine->store->size(); });
}

cs_status cs_engine_protocol(cs_engine* engine, char** out_json) {
  if (!engine) return invalid("engine");
  return guarded(out_json, [&] { put(out_json, protocol_json(engine->engine->assets()).dump()); });
}

cs_status cs_engine_import(cs_engine* engine, const char* ndjson, size_t* out_count) {
  if (!engine) return invalid("engine");
  if (!ndjson) return invalid("ndjson");
  return guarded(nullptr, [&] {
    const auto n = engine->store->import_ndjson(ndjson);
    if (out_count) *out_count = n;
  });
}

cs_status cs_session_create(cs_engine* engine, const uint64_t* seed, char** out_json) {
  if (!engine) return invalid("engine");
  return guarded(out_json, [&] {
    std::optional<std::uint64_t> s;
    if (seed) s = *seed;
    put(out_json, cogstyle::session_to_json(engine->engine->create_session(s)).dump());
  });
}

cs_status cs_session_get(cs_engine* engine, const char* id, char** out_json) {
  if (!engine) return invalid("engine");
  if (!id) return invalid("session_id");
  return guarded(out_json, [&] { put(out_json, cogstyle::session_to_json(engine->engine->session(id)).dump()); });
}

cs_status cs_session_stage(cs_engine* engine, const char* id, char** out_json) {
  if (!engine) return invalid("engine");
  if (!id) return invalid("session_id");
  return guarded(out_json, [&] {
    put(out_json, ordered_json{{"session_id", id}, {"stage", cogstyle::to_string(engine->engine->stage(id))}}.dump());
  });
}

cs_status cs_session_writing(cs_engine* engine, const char* id, int which, const char* text, char** out_json) {
  if (!engine) return invalid("engine");
  if (!id) return invalid("session_id");
  if (!text) return invalid("text");
  return guarded(out_json, [&] {
    put(out_json, cogstyle::session_to_json(engine->engine->submit_writing(id, which, text)).dump());
  });
}

cs_status cs_session_preferences(cs_engine* engine, const char* id, const char* phase, const char* body_json,
                                 char** out_json) {
  if (!engine) return invalid("engine");
  if (!id) return invalid("session_id");
  if (!phase) return invalid("phase");
  return guarded(out_json, [&] {
    const auto body = parse_body(body_json);
    if (!body.is_object()) cogstyle::fail(cogstyle::ErrorKind::validation, "body must be an object", "body");
    const auto p = cogstyle::phase_from_string(phase);
    const auto s = engine->engine->submit_preferences(id, p, int_map(body, "responses"), int_map(body, "weights"));
    put(out_json, cogstyle::session_to_json(s).dump());
  });
}

cs_status cs_session_distraction(cs_engine* engine, const char* id, const char* body_json, char** out_json) {
  if (!engine) return invalid("engine");
  if (!id) return invalid("session_id");
  return guarded(out_json, [&] {
    const auto body = parse_body(body_json);
    std::optional<int> score;
    if (body.is_object() && body.contains("score") && !body["score"].is_null()) {
      if (!body["score"].is_number_integer())
        cogstyle::fail(cogstyle::ErrorKind::validation, "score must be an integer", "score");
      score = body["score"].get<int>();
    }
    put(out_json, cogstyle::session_to_json(engine->engine->submit_distraction(id, score)).dump());
  });
}

cs_status cs_session_offers(cs_engine* engine, const char* id, int include_condition, char** out_json) {
  if (!engine) return invalid("engine");
  if (!id) return invalid("session_id");
  return guarded(out_json, [&] {
    put(out_json, cogstyle::presentation_to_json(engine->engine->render_offers(id), include_condition != 0).dump());
  });
}

cs_status cs_session_choice(cs_engine* engine, const char* id, const char* offer, char** out_json) {
  if (!engine) return invalid("engine");
  if (!id) return invalid("session_id");
  if (!offer) return invalid("offer");
  return guarded(out_json,
                 [&] { put(out_json, cogstyle::session_to_json(engine->engine->submit_choice(id, offer)).dump()); });
}

cs_status cs_session_finalize(cs_engine* engine, const char* id, char** out_json) {
  if (!engine) return invalid("engine");
  if (!id) return invalid("session_id");
  return guarded(out_json,
                 [&] { put(out_json, cogstyle::record_to_json(engine->engine->finalize_session(id)).dump()); });
}

cs_status cs_export_ndjson(cs_engine* engine, int complete_only, char** out_ndjson) {
  if (!engine) return invalid("engine");
  return guarded(nullptr, [&] {
    put(out_ndjson, engine->engine->export_ndjson(cogstyle::ExportFilter{complete_only != 0}));
  });
}

cs_status cs_evaluate(const char* options_json, char** out_report_json, char** out_table_csv) {
  if (!options_json) return invalid("options_json");
  return guarded(out_report_json, [&] {
    using namespace cogstyle;
    const auto opt = json::parse(options_json);
    const auto labels = read_outcomes_csv(opt.at("outcomes").get<std::string>());
    CvOptions cv;
    cv.k = opt.value("k", 5);
    cv.seed = opt.value("seed", std::uint64_t{0});
    cv.lambda = opt.value("lambda", 1.0);
    cv.pca_components = opt.value("pca_components", std::size_t{0});
    std::vector<EvaluationReport> reports;
    ordered_json arr = ordered_json::array();
    for (const auto& path : opt.at("features")) {
      const fs::path fp = path.get<std::string>();
      auto table = read_feature_csv(fp);
      if (opt.contains("columns") && !opt["columns"].empty())
        table = table.select_columns(opt["columns"].get<std::vector<std::string>>());
      std::map<std::string, CognitiveStyle> joined;
      std::size_t unmatched = 0;
      for (const auto& [id, c] : labels) {
        if (table.row_of(id) != FeatureTable::npos)
          joined.emplace(id, c);
        else
          ++unmatched;
      }
      cv.feature_set = opt.contains("feature_set") ? opt["feature_set"].get<std::string>() : fp.stem().string();
      auto rep = cross_validate(table, joined, cv);
      if (unmatched) rep.warnings.push_back(std::to_string(unmatched) + " labeled participant(s) without features dropped");
      const std::size_t featureless = table.rows() - joined.size();
      if (featureless) rep.warnings.push_back(std::to_string(featureless) + " feature row(s) without labels dropped");
      arr.push_back(report_to_json(rep));
      reports.push_back(std::move(rep));
    }
    put(out_report_json, ordered_json{{"reports", arr}}.dump(2) + "\n");
    put(out_table_csv, reports_to_table_csv(reports));
  });
}

cs_status cs_effects(const char* features_path, const char* outcomes_path, char** out_csv) {
  if (!features_path) return invalid("features_path");
  if (!outcomes_path) return invalid("outcomes_path");
  return guarded(nullptr, [&] {
    using namespace cogstyle;
    const auto table = read_feature_csv(features_path);
    const auto labels = read_outcomes_csv(outcomes_path);
    std::map<std::string, CognitiveStyle> joined;
    for (const auto& [id, c] : labels)
      if (table.row_of(id) != FeatureTable::npos) joined.emplace(id, c);
    put(out_csv, effects_to_csv(effect_size_table(table, joined)));
  });
}

cs_status cs_aggregate_annotations(const char* annotations_path, const char* out_dir, char** out_json) {
  if (!annotations_path) return invalid("annotations_path");
  if (!out_dir) return invalid("out_dir");
  return guarded(out_json, [&] {
    using namespace cogstyle;
    std::vector<std::string> excluded;
    const auto tables = aggregate_annotations(parse_annotations_ndjson(read_file(annotations_path)), &excluded);
    fs::create_directories(out_dir);
    ordered_json summary;
    summary["tables"] = ordered_json::array();
    for (const auto& t : tables) {
      const auto& first = t.columns().front();
      const std::string stem = first.name.rfind("discre_", 0) == 0 ? "discre" : first.name;
      write_feature_csv(t, fs::path(out_dir) / (stem + ".csv"), first.provenance, "annotations");
      summary["tables"].push_back({{"file", stem + ".csv"}, {"columns", t.cols()}, {"rows", t.rows()}});
    }
    summary["excluded"] = excluded;
    put(out_json, summary.dump());
  });
}

cs_status cs_synthesize(size_t n, uint64_t seed, const char* spec_json, const char* out_dir, char** out_json) {
  if (!out_dir) return invalid("out_dir");
  return guarded(out_json, [&] {
    using namespace cogstyle;
    const auto spec = spec_json ? SyntheticSpec::from_json(json::parse(spec_json)) : SyntheticSpec::null_spec();
    const auto data = generate_synthetic(n, seed, spec);
    // Records draw from a stream derived from, but distinct from, the feature seed.
    const auto records = synthesize_records(data.ids, data.labels, seed ^ 0x9e3779b97f4a7c15ull);
    const fs::path dir = out_dir;
    fs::create_directories(dir);
    write_file(dir / "records.ndjson", records_to_ndjson(records));
    write_feature_csv(data.features, dir / "features.csv", "synthetic", "gaussian", "1");
    std::vector<OutcomeRow> rows;
    for (const auto& r : records)
      rows.push_back({r.participant_id, r.choice, r.config.loc_plus, r.outcome.psi_pre, r.outcome.psi_post,
                      r.outcome.cis, r.outcome.inf, r.outcome.style});
    write_file(dir / "outcomes.csv", format_outcomes_csv(rows));

    std::array<std::size_t, kStyleCount> counts{};
    for (auto c : data.labels) ++counts[index_of(c)];
    ordered_json shares, cnt;
    for (auto c : kStyles) {
      cnt[std::string(to_string(c))] = counts[index_of(c)];
      shares[std::string(to_string(c))] = n ? static_cast<double>(counts[index_of(c)]) / static_cast<double>(n) : 0.0;
    }
    put(out_json, ordered_json{{"n", n},
                               {"seed", seed},
                               {"spec", spec.to_json()},
                               {"class_counts", cnt},
                               {"class_shares", shares},
                               {"files", {"records.ndjson", "features.csv", "features.manifest.json", "outcomes.csv"}}}
                      .dump(2) +
                      "\n");
  });
}

cs_status cs_build_prompt(const char* prompts_path, const char* essay, const char* mode, char** out_json) {
  if (!essay) return invalid("essay");
  if (!mode) return invalid("mode");
  return guarded(out_json, [&] {
    using namespace cogstyle;
    const fs::path p = prompts_path ? fs::path(prompts_path) : default_asset_dir() / "llm_prompts.json";
    const auto prompts = PromptSet::load(p);
    put(out_json, messages_to_json(build_prompt(prompts, essay, prompt_mode_from_string(mode))).dump());
  });
}

cs_status cs_parse_scores(const char* response, double* coherence_shift, double* influence, int* clamped) {
  if (!response) return invalid("response");
  return guarded(nullptr, [&] {
    const auto s = cogstyle::parse_scores(response);
    if (coherence_shift) *coherence_shift = s.coherence_shift;
    if (influence) *influence = s.influence;
    if (clamped) *clamped = s.clamped ? 1 : 0;
  });
}

cs_status cs_llm_baseline(const char* options_json, char** out_report_json) {
  if (!options_json) return invalid("options_json");
  return guarded(out_report_json, [&] {
    using namespace cogstyle;
    const auto opt = json::parse(options_json);
    const auto records = parse_records_ndjson(read_file(opt.at("records").get<std::string>()));
    const std::string cfg_path = opt.contains("config") && opt["config"].is_string() ? opt["config"].get<std::string>() : "";
    auto cfg = LlmClientConfig::load(cfg_path);
    LlmBaselineOptions o;
    o.mode = prompt_mode_from_string(opt.value("mode", std::string("zero_shot")));
    o.max_in_flight = opt.value("max_in_flight", cfg.max_in_flight);
    if (opt.contains("partial_results") && opt["partial_results"].is_string())
      o.partial_results_path = opt["partial_results"].get<std::string>();
    const fs::path pp = opt.contains("prompts") && opt["prompts"].is_string()
                            ? fs::path(opt["prompts"].get<std::string>())
                            : default_asset_dir() / "llm_prompts.json";
    const auto prompts = PromptSet::load(pp);
    HttpChatClient client(cfg);
    put(out_report_json, llm_report_to_json(run_llm_baseline(records, client, prompts, o)).dump(2) + "\n");
  });
}

const char* cs_default_asset_dir(void) {
  static const std::string dir = cogstyle::default_asset_dir().string();
  return dir.c_str();
}

cs_status cs_fingerprint_file(const char* path, char** out) {
  if (!path) return invalid("path");
  return guarded(nullptr, [&] { put(out, cogstyle::fnv1a(read_file(path))); });
}

}  // extern "C"
