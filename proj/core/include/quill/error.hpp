#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace quill {

// Base for every error raised by the toolkit. The CLI maps these to exit
// code 2 (data/validation error).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A line of a text-based input file could not be parsed.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Binary file with an unknown magic or format version.
class FormatVersionError : public Error {
 public:
  using Error::Error;
};

// Binary file whose tensor shapes disagree with its own header.
class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

class TruncatedFileError : public Error {
 public:
  using Error::Error;
};

// Raised when training produces a non-finite loss or gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace quill
