#pragma once

#include <stdexcept>
#include <string>

namespace qnl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the domain where a formula is defined (zero detuning,
/// sweet-spot lever, p_e >= 0.5, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A least-squares or regression problem could not be solved.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or record.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace qnl
