#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace see {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed input record; carries the byte offset where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what + " at byte " + std::to_string(byte_offset)),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

/// Coordinate outside the declared sensor geometry.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Event timestamps went backwards.
class OrderingError : public Error {
 public:
  using Error::Error;
};

/// A called operation's contract was not met by its input (e.g. querying an inactive site).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Numeric value not representable (e.g. dyadic scale too large).
class RangeError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity reached a computation that requires finite values.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid hardware or search configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Weight container / model spec does not validate.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace see
