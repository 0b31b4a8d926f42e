#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hnlb {

enum class Errc {
  UnknownVip,
  ConsistencyViolation,
  InvalidQueue,
  InvalidOp,
  UndefinedWindow,
  InvalidSpec,
  ParseError,
  TraceOrderError,
  ConfigError,
  SearchRangeError,
};

std::string_view to_string(Errc code);

// All library failures are reported through this one exception type; the
// code tells callers (and tests) which contract was broken.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace hnlb
