#pragma once

#include <stdexcept>
#include <string>

namespace bcm {

enum class ErrorKind {
  validation,  // malformed input, geometry or grid mismatch
  numerical,   // non-convergence, guard failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& what) {
  throw Error(ErrorKind::validation, what);
}

[[noreturn]] inline void fail_numerical(const std::string& what) {
  throw Error(ErrorKind::numerical, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail_validation(what);
}

}  // namespace bcm
