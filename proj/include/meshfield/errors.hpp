#pragma once

#include <stdexcept>
#include <string>

namespace meshfield {

// Error kinds map 1:1 onto the CLI's machine-parsable "error: <kind>: <detail>" lines.
enum class ErrorKind {
  missing_file,
  parse,
  validation,
  mismatch,
  config,
  unsupported,
  numeric,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::missing_file: return "missing-file";
    case ErrorKind::parse: return "parse-error";
    case ErrorKind::validation: return "validation-error";
    case ErrorKind::mismatch: return "mismatch";
    case ErrorKind::config: return "config-error";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::numeric: return "numeric-error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(detail), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& detail) {
  throw Error(kind, detail);
}

}  // namespace meshfield
