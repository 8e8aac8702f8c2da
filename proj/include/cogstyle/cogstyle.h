#ifndef COGSTYLE_H
#define COGSTYLE_H

/* C interface to the cogstyle library.
 *
 * Every call returns a cs_status. Strings handed back through char** out
 * parameters are owned by the caller and released with cs_free_string. Calls
 * that produce a JSON result also produce a JSON error document on failure:
 *   {"error": {"kind": "...", "message": "...", "field": "..."}}
 * The most recent failure on the calling thread is also available through
 * cs_last_error / cs_last_error_field. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CS_API __declspec(dllexport)
#else
#define CS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cs_status {
  CS_OK = 0,
  CS_ERR_VALIDATION = 1,
  CS_ERR_STATE = 2,
  CS_ERR_NOT_FOUND = 3,
  CS_ERR_CONFIGURATION = 4,
  CS_ERR_RUNTIME = 5,
  CS_ERR_INTEGRITY = 6,
  CS_ERR_PARSE = 7,
  CS_ERR_UNDEFINED_METRIC = 8,
  CS_ERR_INVALID_ARGUMENT = 9, /* null handle or pointer */
  CS_ERR_INTERNAL = 10
} cs_status;

CS_API const char* cs_version(void);
CS_API const char* cs_status_name(cs_status status);
CS_API const char* cs_last_error(void);
CS_API const char* cs_last_error_field(void);
CS_API void cs_free_string(char* s);

/* ---- scoring ---------------------------------------------------------- */

CS_API cs_status cs_compute_rho(int plus, int minus, int weight, int* out);
/* Writes the class name ("UpCisUpInf", ...) into a static string. */
CS_API cs_status cs_classify(int cis, int inf, const char** out_class);
/* record_json: one exported record. out_json: its recomputed outcome. */
CS_API cs_status cs_score_record(const char* record_json, char** out_json);
/* Scores an NDJSON export. out_csv receives the outcomes CSV (valid rows,
 * cis multiplied by cis_scale); out_errors_csv the row-level error report.
 * Returns CS_ERR_VALIDATION when any row failed; both outputs are still set. */
CS_API cs_status cs_score_ndjson(const char* ndjson, double cis_scale, char** out_csv, char** out_errors_csv);
/* Schema check of one record; out_json is a JSON array of messages. */
CS_API cs_status cs_validate_record(const char* record_json, char** out_json);

/* ---- protocol engine -------------------------------------------------- */

typedef struct cs_engine cs_engine;

/* assets_path: protocol asset file, NULL for the installed default.
 * store_dir: directory holding records.ndjson, NULL keeps records in memory. */
CS_API cs_status cs_engine_open(const char* assets_path, const char* store_dir, cs_engine** out);
CS_API void cs_engine_close(cs_engine* engine);
CS_API cs_status cs_engine_flush(cs_engine* engine);
CS_API cs_status cs_engine_record_count(cs_engine* engine, size_t* out);
/* Public protocol content (prompts, items, bounds) for a client. */
CS_API cs_status cs_engine_protocol(cs_engine* engine, char** out_json);
/* Appends already-complete records; all are validated before any is stored. */
CS_API cs_status cs_engine_import(cs_engine* engine, const char* ndjson, size_t* out_count);

/* seed may be NULL for an unseeded draw. */
CS_API cs_status cs_session_create(cs_engine* engine, const uint64_t* seed, char** out_json);
CS_API cs_status cs_session_get(cs_engine* engine, const char* session_id, char** out_json);
CS_API cs_status cs_session_stage(cs_engine* engine, const char* session_id, char** out_json);
CS_API cs_status cs_session_writing(cs_engine* engine, const char* session_id, int which, const char* text,
                                    char** out_json);
/* body_json: {"responses": {item_id: value}, "weights": {attribute: value}} */
CS_API cs_status cs_session_preferences(cs_engine* engine, const char* session_id, const char* phase,
                                        const char* body_json, char** out_json);
/* body_json: {"score": n} or {} / NULL when the task was skipped. */
CS_API cs_status cs_session_distraction(cs_engine* engine, const char* session_id, const char* body_json,
                                        char** out_json);
CS_API cs_status cs_session_offers(cs_engine* engine, const char* session_id, int include_condition,
                                   char** out_json);
CS_API cs_status cs_session_choice(cs_engine* engine, const char* session_id, const char* offer, char** out_json);
/* out_json: the stored record. */
CS_API cs_status cs_session_finalize(cs_engine* engine, const char* session_id, char** out_json);
/* complete_only = 0 also exports sessions in progress (with a "stage" field). */
CS_API cs_status cs_export_ndjson(cs_engine* engine, int complete_only, char** out_ndjson);

/* ---- analysis ---------------------------------------------------------- */

/* options_json: {"features": [path, ...], "outcomes": path, "k": 5,
 * "seed": 0, "lambda": 1.0, "pca_components": 0, "columns": [name, ...]}.
 * Each feature file is evaluated as its own feature set. out_report_json:
 * {"reports": [...]}; out_table_csv: feature_set,AUC,k. */
CS_API cs_status cs_evaluate(const char* options_json, char** out_report_json, char** out_table_csv);
/* Class-vs-rest Cohen's d per feature; undefined cells are empty. */
CS_API cs_status cs_effects(const char* features_path, const char* outcomes_path, char** out_csv);
/* Writes records.ndjson, features.csv (+ manifest) and outcomes.csv into
 * out_dir. spec_json may be NULL (null features under default priors).
 * out_json: summary with counts and class shares. */
CS_API cs_status cs_synthesize(size_t n, uint64_t seed, const char* spec_json, const char* out_dir, char** out_json);

/* Aggregates per-unit annotation NDJSON into one feature CSV (+ manifest)
 * per annotation kind in out_dir: causal.csv, counterfactual.csv,
 * dissonance.csv, consonance.csv, discre.csv. out_json: {"tables":
 * [{"file", "columns", "rows"}], "excluded": ["<kind>:<participant>", ...]} */
CS_API cs_status cs_aggregate_annotations(const char* annotations_path, const char* out_dir, char** out_json);

/* ---- prompting baseline ---------------------------------------------------- */

/* mode: "zero_shot" or "four_shot"; prompts_path NULL for the default asset.
 * out_json: [{"role", "content"}, ...] */
CS_API cs_status cs_build_prompt(const char* prompts_path, const char* essay, const char* mode, char** out_json);
CS_API cs_status cs_parse_scores(const char* response, double* coherence_shift, double* influence, int* clamped);
/* options_json: {"records": path, "config": path|null, "mode": "zero_shot",
 * "max_in_flight": 4, "prompts": path|null, "partial_results": path|null} */
CS_API cs_status cs_llm_baseline(const char* options_json, char** out_report_json);

/* ---- misc -------------------------------------------------------------- */

/* Directory holding the installed protocol, prompt and schema assets. */
CS_API const char* cs_default_asset_dir(void);

/* 16 hex digit FNV-1a digest of a file's bytes. */
CS_API cs_status cs_fingerprint_file(const char* path, char** out);

#ifdef __cplusplus
}
#endif

#endif
