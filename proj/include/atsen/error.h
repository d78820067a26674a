#ifndef ATSEN_ERROR_H_
#define ATSEN_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace atsen {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string &what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Tag or type names that do not fit the vocabulary.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value. Carries the offending field name.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string &what)
      : Error(field + ": " + what), field_(std::move(field)), message_(what) {}
  const std::string &field() const { return field_; }
  const std::string &message() const { return message_; }

 private:
  std::string field_;
  std::string message_;
};

// Bad arguments to an operation (lengths, indices, ranges).
class InputError : public Error {
 public:
  using Error::Error;
};

// ParamSet layouts that do not match.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Datasets that are not aligned sentence-by-sentence and token-by-token.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace atsen

#endif  // ATSEN_ERROR_H_
