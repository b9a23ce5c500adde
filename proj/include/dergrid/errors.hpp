#pragma once

#include <stdexcept>
#include <string>

namespace dergrid {

// Base class for everything thrown by the library. The C API translates
// subclasses into error codes at the boundary.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input document (JSON/CSV): message carries field or row context.
class ParseError : public Error {
public:
    using Error::Error;
};

// Structurally valid input that violates a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Filesystem problems: message names the path.
class IoError : public Error {
public:
    using Error::Error;
};

// Numerical failure: power flow or training left the finite regime.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Vector/matrix sizes that do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

} // namespace dergrid
