// cogstyle command-line entry point: serve, score, eval, effects, synth,
// llm-baseline, export.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "capi.hpp"
#include "http_service.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace cogstyle_tools;

namespace {

enum Exit { kOk = 0, kValidation = 1, kConfiguration = 2, kRuntime = 3 };

int exit_code(cs_status s) {
  switch (s) {
    case CS_OK: return kOk;
    case CS_ERR_CONFIGURATION:
    case CS_ERR_UNDEFINED_METRIC: return kConfiguration;
    case CS_ERR_RUNTIME:
    case CS_ERR_INTERNAL: return kRuntime;
    default: return kValidation;
  }
}

int report_failure(cs_status s, const std::string& context) {
  std::cerr << "cogstyle " << context << ": " << cs_status_name(s) << ": " << cs_last_error() << "\n";
  return exit_code(s);
}

std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  return static_cast<bool>(out);
}

std::string fingerprint(const fs::path& p) {
  CsString out;
  return cs_fingerprint_file(p.c_str(), out.out()) == CS_OK ? out.str() : std::string();
}

// Everything needed to reproduce a run; deliberately free of timestamps and
// absolute output locations so identical reruns produce identical manifests.
class Manifest {
 public:
  explicit Manifest(std::string command) {
    j_["command"] = std::move(command);
    j_["cogstyle_version"] = cs_version();
    j_["inputs"] = ordered_json::array();
    j_["parameters"] = ordered_json::object();
    j_["outputs"] = ordered_json::array();
  }
  void input(const std::string& role, const fs::path& p) {
    j_["inputs"].push_back({{"role", role}, {"path", p.string()}, {"fnv1a", fingerprint(p)}});
  }
  template <class T>
  void param(const std::string& key, const T& v) {
    j_["parameters"][key] = v;
  }
  void seed(std::uint64_t s) { j_["seed"] = s; }
  void output(const fs::path& dir, const std::string& name) {
    j_["outputs"].push_back({{"path", name}, {"fnv1a", fingerprint(dir / name)}});
  }
  void status(const std::string& s) { j_["status"] = s; }
  bool write(const fs::path& dir) const { return write_file(dir / "manifest.json", j_.dump(2) + "\n"); }

 private:
  ordered_json j_;
};

bool ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) std::cerr << "cogstyle: cannot create output directory " << dir << ": " << ec.message() << "\n";
  return !ec;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string assets;
  std::string store_dir = "cogstyle-data";
  std::string host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve(const ServeArgs& a) {
  // Block the shutdown signals before any thread starts so a dedicated
  // waiter receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  cs_engine* raw = nullptr;
  const auto st = cs_engine_open(a.assets.empty() ? nullptr : a.assets.c_str(), a.store_dir.c_str(), &raw);
  if (st != CS_OK) return report_failure(st, "serve");
  EnginePtr engine(raw);

  const fs::path asset_dir = a.assets.empty() ? fs::path(cs_default_asset_dir()) : fs::path(a.assets).parent_path();
  HttpService service(engine.get(), asset_dir / "participant_record.schema.json");
  const int port = service.bind(a.host, a.port);
  if (port < 0) {
    std::cerr << "cogstyle serve: cannot bind " << a.host << ":" << a.port << " (address in use?)\n";
    return kConfiguration;
  }
  std::cerr << "cogstyle serve: listening on http://" << a.host << ":" << port << " (store " << a.store_dir << ")\n";

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  const bool ok = service.listen();
  if (!ok) pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();

  const auto flushed = cs_engine_flush(engine.get());
  if (flushed != CS_OK) return report_failure(flushed, "serve");
  std::cerr << "cogstyle serve: stopped, store flushed\n";
  return ok ? kOk : kRuntime;
}

struct ScoreArgs {
  std::string records;
  std::string out_dir;
  double cis_scale = 1.0;
};

int cmd_score(const ScoreArgs& a) {
  const auto text = read_file(a.records);
  if (!text) {
    std::cerr << "cogstyle score: cannot read records file " << a.records << "\n";
    return kConfiguration;
  }
  if (!ensure_dir(a.out_dir)) return kRuntime;
  CsString csv, errors;
  const auto st = cs_score_ndjson(text->c_str(), a.cis_scale, csv.out(), errors.out());
  if (st != CS_OK && st != CS_ERR_VALIDATION) return report_failure(st, "score");
  if (st == CS_ERR_VALIDATION && !csv) return report_failure(st, "score");

  const fs::path dir = a.out_dir;
  write_file(dir / "outcomes.csv", csv.str());
  write_file(dir / "row_errors.csv", errors.str());
  Manifest m("score");
  m.input("records", a.records);
  m.param("cis_scale", a.cis_scale);
  m.output(dir, "outcomes.csv");
  m.output(dir, "row_errors.csv");
  m.status(st == CS_OK ? "ok" : "row_errors");
  m.write(dir);
  if (st == CS_ERR_VALIDATION) {
    std::cerr << "cogstyle score: " << cs_last_error() << "; see " << (dir / "row_errors.csv").string() << "\n";
    return kValidation;
  }
  return kOk;
}

struct EvalArgs {
  std::vector<std::string> features;
  std::string outcomes;
  std::string out_dir;
  std::string feature_set;
  std::vector<std::string> columns;
  int k = 5;
  std::uint64_t seed = 0;
  double lambda = 1.0;
  std::size_t pca = 0;
};

int cmd_eval(const EvalArgs& a) {
  if (!ensure_dir(a.out_dir)) return kRuntime;
  ordered_json opt{{"features", a.features}, {"outcomes", a.outcomes}, {"k", a.k},
                   {"seed", a.seed},         {"lambda", a.lambda},     {"pca_components", a.pca}};
  if (!a.columns.empty()) opt["columns"] = a.columns;
  if (!a.feature_set.empty()) opt["feature_set"] = a.feature_set;
  CsString report, table;
  const auto st = cs_evaluate(opt.dump().c_str(), report.out(), table.out());
  if (st != CS_OK) return report_failure(st, "eval");

  const fs::path dir = a.out_dir;
  write_file(dir / "report.json", report.str());
  write_file(dir / "table.csv", table.str());
  Manifest m("eval");
  for (const auto& f : a.features) m.input("features", f);
  m.input("outcomes", a.outcomes);
  m.seed(a.seed);
  m.param("k", a.k);
  m.param("lambda", a.lambda);
  m.param("pca_components", a.pca);
  m.param("columns", a.columns);
  m.param("metric", "macro_ovr_auc");
  m.output(dir, "report.json");
  m.output(dir, "table.csv");
  m.status("ok");
  m.write(dir);
  std::cout << table.str();
  return kOk;
}

struct EffectsArgs {
  std::string features;
  std::string outcomes;
  std::string out_dir;
};

int cmd_effects(const EffectsArgs& a) {
  if (!ensure_dir(a.out_dir)) return kRuntime;
  CsString csv;
  const auto st = cs_effects(a.features.c_str(), a.outcomes.c_str(), csv.out());
  if (st != CS_OK) return report_failure(st, "effects");
  const fs::path dir = a.out_dir;
  write_file(dir / "effects.csv", csv.str());
  Manifest m("effects");
  m.input("features", a.features);
  m.input("outcomes", a.outcomes);
  m.output(dir, "effects.csv");
  m.status("ok");
  m.write(dir);
  return kOk;
}

struct AggregateArgs {
  std::string annotations;
  std::string out_dir;
};

int cmd_aggregate(const AggregateArgs& a) {
  if (!ensure_dir(a.out_dir)) return kRuntime;
  CsString summary;
  const auto st = cs_aggregate_annotations(a.annotations.c_str(), a.out_dir.c_str(), summary.out());
  if (st != CS_OK) return report_failure(st, "aggregate");
  const fs::path dir = a.out_dir;
  const auto j = nlohmann::json::parse(summary.str());
  Manifest m("aggregate");
  m.input("annotations", a.annotations);
  for (const auto& t : j["tables"]) {
    const std::string file = t["file"];
    m.output(dir, file);
    m.output(dir, fs::path(file).stem().string() + ".manifest.json");
  }
  m.param("excluded", j["excluded"]);
  m.status("ok");
  m.write(dir);
  for (const auto& e : j["excluded"]) std::cerr << "cogstyle aggregate: no units for " << e.get<std::string>() << "\n";
  std::cout << summary.str() << "\n";
  return kOk;
}

struct SynthArgs {
  std::size_t n = 500;
  std::uint64_t seed = 0;
  std::string spec;
  std::string out_dir;
};

int cmd_synth(const SynthArgs& a) {
  std::optional<std::string> spec;
  if (!a.spec.empty()) {
    spec = read_file(a.spec);
    if (!spec) {
      std::cerr << "cogstyle synth: cannot read spec file " << a.spec << "\n";
      return kConfiguration;
    }
  }
  if (!ensure_dir(a.out_dir)) return kRuntime;
  CsString summary;
  const auto st = cs_synthesize(a.n, a.seed, spec ? spec->c_str() : nullptr, a.out_dir.c_str(), summary.out());
  if (st != CS_OK) return report_failure(st, "synth");
  const fs::path dir = a.out_dir;
  write_file(dir / "summary.json", summary.str());
  Manifest m("synth");
  if (!a.spec.empty()) m.input("spec", a.spec);
  m.seed(a.seed);
  m.param("n", a.n);
  for (const char* f : {"records.ndjson", "features.csv", "features.manifest.json", "outcomes.csv", "summary.json"})
    m.output(dir, f);
  m.status("ok");
  m.write(dir);
  return kOk;
}

struct LlmArgs {
  std::string records;
  std::string config;
  std::string mode = "zero_shot";
  std::string prompts;
  std::string out_dir;
  int max_in_flight = 4;
};

int cmd_llm(const LlmArgs& a) {
  if (!ensure_dir(a.out_dir)) return kRuntime;
  const fs::path dir = a.out_dir;
  ordered_json opt{{"records", a.records},
                   {"mode", a.mode},
                   {"max_in_flight", a.max_in_flight},
                   {"partial_results", (dir / "partial_results.ndjson").string()}};
  if (!a.config.empty()) opt["config"] = a.config;
  if (!a.prompts.empty()) opt["prompts"] = a.prompts;
  CsString report;
  const auto st = cs_llm_baseline(opt.dump().c_str(), report.out());
  Manifest m("llm-baseline");
  m.input("records", a.records);
  if (!a.config.empty()) m.input("config", a.config);
  if (!a.prompts.empty()) m.input("prompts", a.prompts);
  m.param("mode", a.mode);
  m.param("max_in_flight", a.max_in_flight);
  if (st != CS_OK) {
    m.status(std::string("failed: ") + cs_status_name(st));
    if (fs::exists(dir / "partial_results.ndjson")) m.output(dir, "partial_results.ndjson");
    m.write(dir);
    return report_failure(st, "llm-baseline");
  }
  write_file(dir / "llm_report.json", report.str());
  m.output(dir, "llm_report.json");
  m.status("ok");
  m.write(dir);
  return kOk;
}

struct ExportArgs {
  std::string assets;
  std::string store_dir = "cogstyle-data";
  bool all = false;
};

int cmd_export(const ExportArgs& a) {
  if (!fs::exists(a.store_dir)) {
    std::cerr << "cogstyle export: no store at " << a.store_dir << "\n";
    return kConfiguration;
  }
  cs_engine* raw = nullptr;
  auto st = cs_engine_open(a.assets.empty() ? nullptr : a.assets.c_str(), a.store_dir.c_str(), &raw);
  if (st != CS_OK) return report_failure(st, "export");
  EnginePtr engine(raw);
  CsString out;
  st = cs_export_ndjson(engine.get(), a.all ? 0 : 1, out.out());
  if (st != CS_OK) return report_failure(st, "export");
  std::cout << out.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cogstyle: decision-experiment protocol service and evaluation toolkit"};
  app.set_version_flag("--version", std::string(cs_version()));
  app.require_subcommand(1);

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Serve the protocol engine over HTTP");
  s->add_option("--assets", serve.assets, "Protocol asset file")->check(CLI::ExistingFile);
  s->add_option("--store-dir", serve.store_dir, "Directory for the record log")->capture_default_str();
  s->add_option("--host", serve.host)->capture_default_str();
  s->add_option("--port", serve.port)->capture_default_str()->check(CLI::Range(0, 65535));

  ScoreArgs score;
  auto* sc = app.add_subcommand("score", "Recompute outcomes for a record export");
  sc->add_option("--records", score.records, "NDJSON record export")->required();
  sc->add_option("--out-dir", score.out_dir)->required();
  sc->add_option("--cis-scale", score.cis_scale, "Multiplier applied to reported CIS")->capture_default_str();

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "Cross-validated macro one-vs-rest AUC per feature set");
  ev->add_option("--features", eval.features, "Feature CSV (repeatable, one feature set each)")->required();
  ev->add_option("--outcomes", eval.outcomes, "Outcomes CSV with participant_id and class")->required();
  ev->add_option("--out-dir", eval.out_dir)->required();
  ev->add_option("--k", eval.k, "Folds")->capture_default_str()->check(CLI::Range(2, 1000));
  ev->add_option("--seed", eval.seed)->capture_default_str();
  ev->add_option("--lambda", eval.lambda, "L2 strength")->capture_default_str()->check(CLI::NonNegativeNumber);
  ev->add_option("--pca-k", eval.pca, "Principal components per fold, 0 for none")->capture_default_str();
  ev->add_option("--columns", eval.columns, "Restrict to these feature columns");
  ev->add_option("--feature-set", eval.feature_set, "Report label (defaults to the file stem)");

  EffectsArgs effects;
  auto* ef = app.add_subcommand("effects", "Class-vs-rest Cohen's d per feature");
  ef->add_option("--features", effects.features)->required();
  ef->add_option("--outcomes", effects.outcomes)->required();
  ef->add_option("--out-dir", effects.out_dir)->required();

  AggregateArgs aggregate;
  auto* ag = app.add_subcommand("aggregate", "Turn per-unit annotation NDJSON into feature CSVs");
  ag->add_option("--annotations", aggregate.annotations, "Annotation NDJSON from the extractor sidecar")->required();
  ag->add_option("--out-dir", aggregate.out_dir)->required();

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "Generate synthetic records, features and outcomes");
  sy->add_option("--n", synth.n)->capture_default_str();
  sy->add_option("--seed", synth.seed)->capture_default_str();
  sy->add_option("--spec", synth.spec, "JSON spec with priors and planted shifts");
  sy->add_option("--out-dir", synth.out_dir)->required();

  LlmArgs llm;
  auto* ll = app.add_subcommand("llm-baseline", "Score essays with a chat-completion endpoint");
  ll->add_option("--records", llm.records)->required();
  ll->add_option("--config", llm.config, "Client config JSON (endpoint, model, api_key)");
  ll->add_option("--mode", llm.mode)->check(CLI::IsMember({"zero_shot", "four_shot"}))->capture_default_str();
  ll->add_option("--prompts", llm.prompts, "Prompt asset file");
  ll->add_option("--max-in-flight", llm.max_in_flight)->capture_default_str()->check(CLI::PositiveNumber);
  ll->add_option("--out-dir", llm.out_dir)->required();

  ExportArgs exp;
  auto* ex = app.add_subcommand("export", "Print stored records as NDJSON");
  ex->add_option("--assets", exp.assets)->check(CLI::ExistingFile);
  ex->add_option("--store-dir", exp.store_dir)->capture_default_str();
  ex->add_flag("--all", exp.all, "Include sessions in progress");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfiguration;
  }

  if (*s) return cmd_serve(serve);
  if (*sc) return cmd_score(score);
  if (*ev) return cmd_eval(eval);
  if (*ef) return cmd_effects(effects);
  if (*ag) return cmd_aggregate(aggregate);
  if (*sy) return cmd_synth(synth);
  if (*ll) return cmd_llm(llm);
  if (*ex) return cmd_export(exp);
  return kConfiguration;
}
