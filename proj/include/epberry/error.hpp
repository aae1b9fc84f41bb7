#pragma once

#include <stdexcept>
#include <string>

namespace epberry {

enum class ErrorKind {
  InvalidArgument,    // bad shape, bad option, malformed input
  ParseError,         // family or config file could not be read
  NonConvergence,     // iterative routine gave up
  InconsistentSystem, // min-norm solve residual above tolerance
  DegeneratePoint,    // eigenvalue gap below the frame threshold
  TrackingFailure,    // branch matching ambiguous after refinement
  NotSimpleEP,        // Jordan structure is not a single 2-chain
  IllConditioned,     // e.g. G near a triple degeneracy
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::ParseError: return "parse error";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::InconsistentSystem: return "inconsistent system";
    case ErrorKind::DegeneratePoint: return "degenerate point";
    case ErrorKind::TrackingFailure: return "tracking failure";
    case ErrorKind::NotSimpleEP: return "not a simple exceptional point";
    case ErrorKind::IllConditioned: return "ill-conditioned";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Usage and input problems are the caller's fault; everything else is a
  // numerical failure of an otherwise valid request.
  bool is_usage() const noexcept {
    return kind_ == ErrorKind::InvalidArgument || kind_ == ErrorKind::ParseError;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace epberry
