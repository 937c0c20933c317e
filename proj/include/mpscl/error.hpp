#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mpscl {

// Base class for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape or rank disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid argument value or violated precondition.
class ValueError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (missing file, short write, ...).
class IoError : public Error {
 public:
  using Error::Error;
};

// Forbidden data access, e.g. target-domain labels on a training path.
class GuardError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf detected where a finite value is required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk format; carries the byte offset of the bad position.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : Error(msg + " (byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}

  std::size_t byte_offset;
};

}  // namespace mpscl
