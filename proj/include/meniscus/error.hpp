#pragma once

#include <stdexcept>
#include <string>

namespace meniscus {

enum class ErrorKind {
  kInvalidArgument,
  kDimensionMismatch,
  kIo,
  kDecode,
  kEmptyInput,
  kGeometry,
  kMissingPupil,
  kMissingMeniscus,
  kEmptySection,
  kUnderdetermined,
  kNotConverged,
  kUndefined,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so that callers (CLI exit
// codes, HTTP status mapping) can tell pipeline stages apart.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace meniscus
