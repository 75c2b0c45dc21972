#pragma once

#include <stdexcept>
#include <string>

namespace fetomo {

// Base for every error the library raises. The CLI maps the subclasses onto
// exit codes (data errors -> 2, numerical failures -> 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class CurvatureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UndefinedStatistic : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace fetomo
