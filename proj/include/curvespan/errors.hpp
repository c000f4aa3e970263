#pragma once

#include <stdexcept>
#include <string>

namespace curvespan {

// Exit-code conventions used by the CLI: parse errors exit 3, precondition
// and usage errors exit 4, stretch violations exit 2.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& m) : std::runtime_error(m) {}
};

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace curvespan
