#pragma once

// Thin C++ conveniences over the C interface for the tools.

#include <memory>
#include <string>

#include "cogstyle/cogstyle.h"

namespace cogstyle_tools {

/// Owns a string returned by the library.
class CsString {
 public:
  CsString() = default;
  ~CsString() { cs_free_string(p_); }
  CsString(const CsString&) = delete;
  CsString& operator=(const CsString&) = delete;
  char** out() {
    cs_free_string(p_);
    p_ = nullptr;
    return &p_;
  }
  std::string str() const { return p_ ? std::string(p_) : std::string(); }
  explicit operator bool() const { return p_ != nullptr; }

 private:
  char* p_ = nullptr;
};

struct EngineDeleter {
  void operator()(cs_engine* e) const { cs_engine_close(e); }
};
using EnginePtr = std::unique_ptr<cs_engine, EngineDeleter>;

}  // namespace cogstyle_tools
