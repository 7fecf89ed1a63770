#pragma once

#include <stdexcept>
#include <string>

namespace consensus {

/// Category of a failure. The CLI and the HTTP service map these onto exit
/// codes and status codes, so keep the list stable.
enum class ErrorKind {
  argument,
  alignment,
  geometry,
  undefined,
  statistics,
  data,
  io,
  format,
  shape,
  empty_region,
  degenerate_model,
  ensemble,
  spec_mismatch,
  iteration,
  state,
  routing,
  conflict,
  not_found,
  unauthorized,
  forbidden,
  experiment,
  config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::undefined: return "undefined";
    case ErrorKind::statistics: return "statistics";
    case ErrorKind::data: return "data";
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::shape: return "shape";
    case ErrorKind::empty_region: return "empty_region";
    case ErrorKind::degenerate_model: return "degenerate_model";
    case ErrorKind::ensemble: return "ensemble";
    case ErrorKind::spec_mismatch: return "spec_mismatch";
    case ErrorKind::iteration: return "iteration";
    case ErrorKind::state: return "state";
    case ErrorKind::routing: return "routing";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::unauthorized: return "unauthorized";
    case ErrorKind::forbidden: return "forbidden";
    case ErrorKind::experiment: return "experiment";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace consensus
