#pragma once

#include <stdexcept>
#include <string>

namespace gypsum {

// Parse failure with source position. Lines and columns are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string msg, int line, int col)
      : std::runtime_error(msg + " at line " + std::to_string(line) + ", col " +
                           std::to_string(col)),
        line_(line),
        col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeMismatch : public std::runtime_error {
 public:
  explicit ShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

class MissingFile : public std::runtime_error {
 public:
  explicit MissingFile(const std::string& path)
      : std::runtime_error("missing file: " + path) {}
};

class LengthError : public std::runtime_error {
 public:
  explicit LengthError(const std::string& msg) : std::runtime_error(msg) {}
};

class DegenerateMask : public std::runtime_error {
 public:
  explicit DegenerateMask(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class UnknownKind : public std::runtime_error {
 public:
  explicit UnknownKind(const std::string& kind)
      : std::runtime_error("unknown node kind: " + kind) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gypsum
