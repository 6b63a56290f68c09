#pragma once

#include <stdexcept>
#include <string>

namespace qdpd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violates an operation's precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A pulse cannot be represented at the requested sample rate.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Correlation peak too weak to trust the alignment.
class SyncError : public Error {
 public:
  SyncError(const std::string& what, double peak_db) : Error(what), peak_db_(peak_db) {}
  double peak_db() const noexcept { return peak_db_; }

 private:
  double peak_db_;
};

/// No driving pulse was found to fix the static amplitude and phase.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Least-squares design matrix is (numerically) rank deficient.
class IllConditionedError : public Error {
 public:
  IllConditionedError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qdpd
