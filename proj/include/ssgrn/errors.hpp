#ifndef SSGRN_ERRORS_HPP
#define SSGRN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ssgrn {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, inconsistent, or too-small input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// The dataset cannot support the requested number of parameters.
class InfeasibleError : public DataError {
 public:
  using DataError::DataError;
};

/// A factorization failed or a numerical invariant was violated.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssgrn

#endif  // SSGRN_ERRORS_HPP
