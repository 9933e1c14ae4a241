#pragma once

#include <stdexcept>
#include <string>

namespace afg {

// Failure categories surfaced by the library. CLI maps these to exit codes;
// tests assert on the kind rather than on message text.
enum class ErrorKind {
  Input,          // caller passed data that violates an operation precondition
  Validation,     // a domain object or config is internally inconsistent
  Format,         // a persisted file is malformed or has the wrong version
  Integrity,      // checksum / manifest mismatch
  Training,       // optimization diverged
  Attack,         // attack-specific degeneracy (non-finite gradient, flat logits)
  Optimization,   // gradient-ascent degeneracy in visualization
  Configuration,  // requested combination of options cannot be honored
  Degenerate,     // mathematically degenerate input (all-zero tensor etc.)
  Dependency,     // an upstream pipeline artifact is missing
  Io,             // filesystem trouble
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Input: return "input error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Integrity: return "integrity error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Attack: return "attack error";
    case ErrorKind::Optimization: return "optimization error";
    case ErrorKind::Configuration: return "configuration error";
    case ErrorKind::Degenerate: return "degenerate error";
    case ErrorKind::Dependency: return "dependency error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

}  // namespace afg
