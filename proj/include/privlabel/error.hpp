#pragma once

#include <stdexcept>
#include <string>

namespace privlabel {

enum class ErrorKind {
  kParse,
  kValidation,
  kDuplicate,
  kDanglingReference,
  kNotFound,
  kPrecondition,
  kNumeric,
  kTransport,
  kUnavailable,
  kIo,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; `kind` lets callers (the HTTP layer,
// the CLI) map failures to status codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace privlabel
