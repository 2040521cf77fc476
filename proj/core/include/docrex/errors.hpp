#pragma once

#include <stdexcept>
#include <string>

namespace docrex {

// Base of every error thrown by the library. kind() is a short stable tag
// used by the CLI for its one-line error reports.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("schema", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error("training", what) {}
};

}  // namespace docrex
