#pragma once

#include <stdexcept>
#include <string>

namespace livinglab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad file lines, invalid records, bad configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A referenced entity (experiment, session, system, site, record) does not exist.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// The operation is illegal in the current state (lifecycle, repeated feedback).
class StateError : public Error {
 public:
  using Error::Error;
};

class UnknownRecord : public NotFound {
 public:
  using NotFound::NotFound;
};

class WrongKind : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A remote participant did not answer in time or refused the connection.
class SystemUnavailable : public Error {
 public:
  using Error::Error;
};

/// A participant answered with a list violating the RankedList contract.
class InvalidResponse : public Error {
 public:
  using Error::Error;
};

}  // namespace livinglab
