#pragma once

#include <stdexcept>
#include <string>

namespace minhet {

/// Bad arguments: dimension mismatch, violated precondition, malformed config.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested operation is not available for this potential (e.g. a
/// custom potential registered without second derivatives).
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A tail has already reached the roundoff floor, so a decay fit would be noise.
class DegenerateTail : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tail average is farther than q from every well of the target set.
class NoLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace minhet
