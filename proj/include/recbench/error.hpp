#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace recbench {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input row. line() is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

// Split planning could not produce a valid protocol (e.g. no eligible users).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration. problems() lists every issue found, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what), problems_{what} {}
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out = "invalid configuration";
    for (const auto& p : problems) out += "\n  - " + p;
    return out;
  }
  std::vector<std::string> problems_;
};

// Recommendation requested for a user absent from the training matrix.
class ColdStartError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace recbench
