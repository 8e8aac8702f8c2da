#pragma once

// HTTP JSON front end for a protocol engine handle.

#include <filesystem>
#include <memory>
#include <string>

#include "cogstyle/cogstyle.h"

namespace httplib {
class Server;
}

namespace cogstyle_tools {

int http_status_for(cs_status s);

class HttpService {
 public:
  /// schema_path: record schema served at GET /schema.
  HttpService(cs_engine* engine, std::filesystem::path schema_path);
  ~HttpService();

  /// Binds without serving; port 0 picks a free port. Returns the bound
  /// port, or -1 when the address is unavailable.
  int bind(const std::string& host, int port);
  /// Serves until stop(); returns false if the loop failed.
  bool listen();
  void stop();
  bool running() const;

 private:
  void install_routes();

  cs_engine* engine_;
  std::string schema_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace cogstyle_tools
