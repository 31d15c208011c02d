#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rppg {

// Failure categories surfaced by the library. The CLI maps these onto exit
// codes (kIo -> 2, everything else -> 1).
enum class ErrorKind {
  kFormat,
  kInvariant,
  kInsufficientData,
  kGeometry,
  kParameter,
  kDegenerateData,
  kNumericalDivergence,
  kEmptyRoi,
  kNoSignal,
  kDegenerateEmbedding,
  kValidation,
  kIo,
};

std::string_view ToString(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ToString(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void Require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) Fail(kind, message);
}

}  // namespace rppg
