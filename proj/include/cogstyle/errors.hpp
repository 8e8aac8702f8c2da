#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cogstyle {

enum class ErrorKind {
  validation,      // input outside its domain
  state,           // operation attempted out of protocol order
  not_found,       // unknown session or record
  configuration,   // bad assets, options or preconditions on setup
  runtime,         // storage / network failure, retryable
  integrity,       // stored outcome disagrees with recomputation
  parse,           // unparseable text or file
  undefined_metric // statistic undefined for the given data
};

std::string_view to_string(ErrorKind kind);

/// Single exception type carried through the core; the C API maps `kind()`
/// onto its status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message, std::string field = {})
      : std::runtime_error(std::move(message)), kind_(kind), field_(std::move(field)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Offending field or item id, empty when not applicable.
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string message, std::string field = {}) {
  throw Error(kind, std::move(message), std::move(field));
}

}  // namespace cogstyle
