#pragma once

#include <stdexcept>
#include <string>

namespace pbmt {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Positioned parse failure (model DSL or property language).
class ParseError : public Error {
 public:
  ParseError(const std::string& code, const std::string& msg, int line, int col)
      : Error(code + " at " + std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        code_(code),
        line_(line),
        col_(col) {}

  const std::string& code() const { return code_; }
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  std::string code_;
  int line_;
  int col_;
};

// Simulation produced NaN or +/-inf; the run is aborted.
class NonFiniteSignal : public Error {
 public:
  NonFiniteSignal(int step, const std::string& signal)
      : Error("non-finite value at step " + std::to_string(step) + " on signal " + signal),
        step_(step),
        signal_(signal) {}

  int step() const { return step_; }
  const std::string& signal() const { return signal_; }

 private:
  int step_;
  std::string signal_;
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(long a, long b)
      : Error("signal length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class MissingSignal : public Error {
 public:
  explicit MissingSignal(const std::string& name) : Error("unknown signal: " + name), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

// Mutation descriptor applied to a site its operator cannot handle.
class IncompatibleSite : public Error {
 public:
  using Error::Error;
};

class GridTooLarge : public Error {
 public:
  using Error::Error;
};

class ZeroDenominator : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Model failed validation where a valid model is required.
class ModelError : public Error {
 public:
  using Error::Error;
};

class UnknownCell : public Error {
 public:
  using Error::Error;
};

}  // namespace pbmt
