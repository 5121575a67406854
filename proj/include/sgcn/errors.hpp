// Error taxonomy shared by every module. The CLI maps these onto exit codes:
// parse/validation/dimension/index/io -> 2 (data), numeric -> 3.
#pragma once

#include <stdexcept>
#include <string>

namespace sgcn {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (CSV, config, checkpoint framing).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Shapes of tensor operands do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An identifier points outside its container.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf or otherwise left the finite domain.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Filesystem-level failure (missing file, unwritable directory).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgcn
