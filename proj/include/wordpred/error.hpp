#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wordpred {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened or read.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Iterative solver did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual norm " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace wordpred
