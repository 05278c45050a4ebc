#pragma once

#include <stdexcept>
#include <string>

namespace ssdet {

// Base class for every library failure. Callers that only care about
// "something numerical went wrong" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidModel : public Error {
 public:
  using Error::Error;
};

class DegenerateToConstant : public Error {
 public:
  using Error::Error;
};

class InsufficientTrials : public Error {
 public:
  using Error::Error;
};

// Cube I/O failures carry a kind so the CLI can report them uniformly.
class CubeFormatError : public Error {
 public:
  enum class Kind { MalformedHeader, MalformedRecord, TruncatedPayload, NonFinitePayload, Io };

  CubeFormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace ssdet
