#pragma once

#include <stdexcept>
#include <string>

namespace qtd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad eps, t < s, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A dense oracle object was requested for a state space that is too large.
class SizeLimitExceeded : public Error {
 public:
  using Error::Error;
};

/// Floating point failure that cannot be recovered (e.g. both terms of a
/// density ratio underflow).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed textual input. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qtd
