#pragma once

#include <stdexcept>
#include <string>

namespace xlnbt {

// Base class for every failure raised by the library. Callers that only need
// to distinguish "our" errors from programming errors catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace xlnbt
