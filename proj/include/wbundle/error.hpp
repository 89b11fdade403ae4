#pragma once

#include <stdexcept>
#include <string>

namespace wb {

// Mirrors the status codes exported through the C API (wbundle.h).
enum class ErrorCode : int {
  kOk = 0,
  kDomain = 1,
  kInfeasible = 2,
  kNotConverged = 3,
  kResourceLimit = 4,
  kDegenerate = 5,
  kIo = 6,
  kInvalidArgument = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace wb
