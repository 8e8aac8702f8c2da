#include "http_service.hpp"

#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "capi.hpp"

namespace cogstyle_tools {

using nlohmann::json;

int http_status_for(cs_status s) {
  switch (s) {
    case CS_OK: return 200;
    case CS_ERR_VALIDATION: return 422;
    case CS_ERR_STATE: return 409;
    case CS_ERR_NOT_FOUND: return 404;
    case CS_ERR_PARSE:
    case CS_ERR_INVALID_ARGUMENT: return 400;
    case CS_ERR_RUNTIME: return 503;
    default: return 500;
  }
}

namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, cs_status st, const CsString& body, int ok_status = 200) {
  res.status = st == CS_OK ? ok_status : http_status_for(st);
  if (body) {
    res.set_content(body.str(), kJson);
  } else {
    json e{{"error", {{"kind", cs_status_name(st)}, {"message", cs_last_error()}}}};
    res.set_content(e.dump(), kJson);
  }
}

void client_error(httplib::Response& res, int status, const std::string& kind, const std::string& message,
                  const std::string& field = {}) {
  json e{{"kind", kind}, {"message", message}};
  if (!field.empty()) e["field"] = field;
  res.status = status;
  res.set_content(json{{"error", e}}.dump(), kJson);
}

// Parses a JSON object body; empty bodies read as {}.
bool body_object(const httplib::Request& req, httplib::Response& res, json& out) {
  if (req.body.empty()) {
    out = json::object();
    return true;
  }
  try {
    out = json::parse(req.body);
  } catch (const json::exception& e) {
    client_error(res, 400, "parse", std::string("request body is not valid JSON: ") + e.what(), "body");
    return false;
  }
  if (!out.is_object()) {
    client_error(res, 422, "validation", "request body must be a JSON object", "body");
    return false;
  }
  return true;
}

}  // namespace

HttpService::HttpService(cs_engine* engine, std::filesystem::path schema_path)
    : engine_(engine), server_(std::make_unique<httplib::Server>()) {
  std::ifstream in(schema_path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  schema_ = ss.str();
  // httplib defaults to SO_REUSEPORT, which lets a second server share a busy port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  install_routes();
}

HttpService::~HttpService() = default;

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool HttpService::listen() { return server_->listen_after_bind(); }
void HttpService::stop() { server_->stop(); }
bool HttpService::running() const { return server_->is_running(); }

void HttpService::install_routes() {
  auto& s = *server_;
  cs_engine* eng = engine_;

  s.Get("/health", [eng](const httplib::Request&, httplib::Response& res) {
    size_t n = 0;
    cs_engine_record_count(eng, &n);
    res.set_content(json{{"status", "ok"}, {"version", cs_version()}, {"records", n}}.dump(), kJson);
  });

  s.Get("/schema", [this](const httplib::Request&, httplib::Response& res) {
    if (schema_.empty()) return client_error(res, 500, "configuration", "record schema not available");
    res.set_content(schema_, "application/schema+json");
  });

  s.Get("/protocol", [eng](const httplib::Request&, httplib::Response& res) {
    CsString out;
    reply(res, cs_engine_protocol(eng, out.out()), out);
  });

  s.Post("/sessions", [eng](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!body_object(req, res, body)) return;
    std::uint64_t seed = 0;
    const bool seeded = body.contains("seed") && !body["seed"].is_null();
    if (seeded) {
      if (!body["seed"].is_number_unsigned())
        return client_error(res, 422, "validation", "seed must be a non-negative integer", "seed");
      seed = body["seed"].get<std::uint64_t>();
    }
    CsString out;
    reply(res, cs_session_create(eng, seeded ? &seed : nullptr, out.out()), out, 201);
  });

  s.Get(R"(/sessions/([A-Za-z0-9_-]+))", [eng](const httplib::Request& req, httplib::Response& res) {
    CsString out;
    reply(res, cs_session_get(eng, req.matches[1].str().c_str(), out.out()), out);
  });

  s.Get(R"(/sessions/([A-Za-z0-9_-]+)/stage)", [eng](const httplib::Request& req, httplib::Response& res) {
    CsString out;
    reply(res, cs_session_stage(eng, req.matches[1].str().c_str(), out.out()), out);
  });

  s.Post(R"(/sessions/([A-Za-z0-9_-]+)/writing/([12]))", [eng](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!body_object(req, res, body)) return;
    if (!body.contains("text") || !body["text"].is_string())
      return client_error(res, 422, "validation", "text must be a string", "text");
    CsString out;
    const auto text = body["text"].get<std::string>();
    reply(res, cs_session_writing(eng, req.matches[1].str().c_str(), std::stoi(req.matches[2].str()), text.c_str(),
                                  out.out()),
          out);
  });

  s.Post(R"(/sessions/([A-Za-z0-9_-]+)/preferences/(pre|post))",
         [eng](const httplib::Request& req, httplib::Response& res) {
           CsString out;
           reply(res,
                 cs_session_preferences(eng, req.matches[1].str().c_str(), req.matches[2].str().c_str(),
                                        req.body.c_str(), out.out()),
                 out);
         });

  s.Post(R"(/sessions/([A-Za-z0-9_-]+)/distraction)", [eng](const httplib::Request& req, httplib::Response& res) {
    CsString out;
    reply(res, cs_session_distraction(eng, req.matches[1].str().c_str(), req.body.c_str(), out.out()), out);
  });

  s.Get(R"(/sessions/([A-Za-z0-9_-]+)/offers)", [eng](const httplib::Request& req, httplib::Response& res) {
    CsString out;
    reply(res, cs_session_offers(eng, req.matches[1].str().c_str(), 0, out.out()), out);
  });

  s.Post(R"(/sessions/([A-Za-z0-9_-]+)/choice)", [eng](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!body_object(req, res, body)) return;
    if (!body.contains("offer") || !body["offer"].is_string())
      return client_error(res, 422, "validation", "offer must be \"A\" or \"B\"", "offer");
    CsString out;
    const auto offer = body["offer"].get<std::string>();
    reply(res, cs_session_choice(eng, req.matches[1].str().c_str(), offer.c_str(), out.out()), out);
  });

  s.Post(R"(/sessions/([A-Za-z0-9_-]+)/finalize)", [eng](const httplib::Request& req, httplib::Response& res) {
    CsString out;
    reply(res, cs_session_finalize(eng, req.matches[1].str().c_str(), out.out()), out);
  });

  s.Get("/export", [eng](const httplib::Request& req, httplib::Response& res) {
    const auto flag = req.get_param_value("complete");
    if (!flag.empty() && flag != "true" && flag != "false")
      return client_error(res, 400, "parse", "complete must be true or false", "complete");
    CsString out;
    const auto st = cs_export_ndjson(eng, flag == "true", out.out());
    if (st != CS_OK) return client_error(res, http_status_for(st), cs_status_name(st), cs_last_error());
    res.set_content(out.str(), "application/x-ndjson");
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string msg = "unexpected failure";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    } catch (...) {
    }
    client_error(res, 500, "internal", msg);
  });
}

}  // namespace cogstyle_tools
