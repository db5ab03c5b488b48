#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace modgraph {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file does not follow the expected binary layout.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Structurally well-formed input that violates a shape or range invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The caller broke an operation's precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Input on which the requested quantity does not exist (empty graph,
/// empty cluster, zero-volume cluster).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what + " (achieved residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// A statistic is undefined for the given samples (e.g. zero pooled variance).
class UndefinedStatistic : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace modgraph
