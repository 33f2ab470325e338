#pragma once

#include <stdexcept>
#include <string>

namespace qsc {

/// Malformed or out-of-range input supplied by a caller.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fatal misconfiguration, e.g. a mantissa outgrowing its configured bit budget.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public InputError {
 public:
  ParseError(int line, const std::string& what)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Protocol parameters would need more working precision than allowed.
class ParameterRefusal : public std::runtime_error {
 public:
  ParameterRefusal(int required_bits, int max_bits)
      : std::runtime_error("parameters need p = " + std::to_string(required_bits) +
                           " bits, above the configured maximum of " +
                           std::to_string(max_bits)),
        required_bits_(required_bits),
        max_bits_(max_bits) {}
  int required_bits() const noexcept { return required_bits_; }
  int max_bits() const noexcept { return max_bits_; }

 private:
  int required_bits_;
  int max_bits_;
};

}  // namespace qsc
