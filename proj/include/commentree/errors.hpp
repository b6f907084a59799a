#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace commentree {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A malformed line in a text input (CSV, codebook, phrasebook).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A (class, action) pair that the codebook does not cover.
class UnknownPairError : public Error {
 public:
  explicit UnknownPairError(const std::string& message) : Error(message), line_(0) {}
  UnknownPairError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InvalidFractionError : public Error {
 public:
  using Error::Error;
};

class InvalidConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class EmptyBackgroundError : public Error {
 public:
  using Error::Error;
};

class NotRegressionError : public Error {
 public:
  using Error::Error;
};

/// A decision path whose merged bounds are empty; indicates a corrupt tree.
class ContradictoryPathError : public Error {
 public:
  using Error::Error;
};

class NoCounterfactualError : public Error {
 public:
  using Error::Error;
};

class DesiredEqualsFactualError : public Error {
 public:
  using Error::Error;
};

/// A cause interval for which the phrasebook has no clause.
class UncoveredIntervalError : public Error {
 public:
  using Error::Error;
};

class EmptyCandidateError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// A model or config file that is syntactically or structurally invalid.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace commentree
