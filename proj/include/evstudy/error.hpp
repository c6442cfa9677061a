#pragma once

#include <stdexcept>
#include <string>

namespace evstudy {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input: bad CSV rows, dates outside the calendar,
/// invalid configuration. Maps to CLI exit code 1.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Sample construction or panel alignment left no usable treated or control set.
class SampleError : public Error {
 public:
  using Error::Error;
};

/// A numerical estimation step could not be completed (rank deficiency,
/// exhausted bootstrap retries). Maps to CLI exit code 2.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// A test statistic is undefined because the relevant variance is zero.
/// The point estimate is still meaningful and is carried along.
class DegenerateVarianceError : public Error {
 public:
  DegenerateVarianceError(const std::string& what, double estimate)
      : Error(what), estimate_(estimate) {}

  double estimate() const noexcept { return estimate_; }

 private:
  double estimate_;
};

}  // namespace evstudy
