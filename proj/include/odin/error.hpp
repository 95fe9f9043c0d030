#pragma once

#include <stdexcept>
#include <string>

namespace odin {

// Every rejection carries a code so callers (and tests) can tell failure
// modes apart without parsing messages.
enum class Errc {
  invalid_argument,
  invalid_config,
  asymmetric,
  nonzero_diagonal,
  non_binary,
  dimension_mismatch,
  row_length,
  duplicate_id,
  malformed,
  io,
  degenerate_atlas,
  singular,
  non_finite,
  factorization,
  too_few_scores,
};

enum class ErrorCategory { usage, input, numeric };

inline ErrorCategory category_of(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::invalid_config:
      return ErrorCategory::usage;
    case Errc::singular:
    case Errc::non_finite:
    case Errc::factorization:
      return ErrorCategory::numeric;
    default:
      return ErrorCategory::input;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace odin
