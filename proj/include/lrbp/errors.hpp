#pragma once

#include <stdexcept>
#include <string>

namespace lrbp {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Enumeration or expansion would exceed the configured element cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Dimension or shape disagreement between inputs.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Invalid argument or structurally invalid input.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Feature outside the supported model (e.g. mixed cardinalities).
class UnsupportedError : public Error {
public:
    using Error::Error;
};

// A message or distribution collapsed to total mass zero.
class ZeroMassError : public Error {
public:
    using Error::Error;
};

// NaN or Inf produced during a computation.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

// Malformed input file; the message carries the offending field path.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace lrbp
