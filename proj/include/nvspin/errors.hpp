#pragma once

#include <stdexcept>
#include <string>

namespace nvspin {

enum class ErrorCode {
  ok = 0,
  domain = 1,
  singularity = 2,
  convergence = 3,
  rank = 4,
  validation = 5,
  io = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(ErrorCode::domain, what) {}
};

struct SingularityError : Error {
  explicit SingularityError(const std::string& what) : Error(ErrorCode::singularity, what) {}
};

struct RankError : Error {
  explicit RankError(const std::string& what) : Error(ErrorCode::rank, what) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(ErrorCode::validation, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCode::io, what) {}
};

/// Raised when an integration or fit runs out of budget. Carries the best
/// estimate reached so callers can still report it.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double estimate, double error_bound)
      : Error(ErrorCode::convergence, what), estimate_(estimate), error_bound_(error_bound) {}
  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

}  // namespace nvspin
