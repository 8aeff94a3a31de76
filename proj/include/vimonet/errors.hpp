#pragma once

#include <stdexcept>
#include <string>

namespace vimonet {

// Violated precondition or malformed argument (shape mismatch, wrong payload
// type, unknown stage...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidTokenError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Spliced sequence or generation would exceed the LM's max_len.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Non-finite activation, loss or gradient.
class NumericFault : public std::runtime_error {
 public:
  NumericFault(const std::string& what, int layer = -1)
      : std::runtime_error(what), layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_;
};

class EmptyLossError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A record references a payload that is absent or of the wrong kind.
class ResolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JudgeUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Config validation failure; `where` is a JSON pointer into the config.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

}  // namespace vimonet
