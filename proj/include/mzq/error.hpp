#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mzq {

enum class ErrorCode {
  InvalidArgument,
  EmptyCascade,
  NonFinite,
  SingularSystem,
  DegenerateScatterer,
  DegenerateFlux,
  QuasiStaticLimit,
  NoConvergence,
  BadInitialization,
  NoFeature,
  IllPosed,
  Parse,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace mzq
