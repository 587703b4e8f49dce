#pragma once

#include <stdexcept>
#include <string>

namespace ccdt {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Schema violations: bad schema definitions or records that do not conform.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text (JSON lines, rule expressions, artifact files).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A rule expression could not be evaluated against a message.
class EvaluationError : public Error {
 public:
  EvaluationError(std::string rule_id, std::string field, const std::string& what)
      : Error(what), rule_id_(std::move(rule_id)), field_(std::move(field)) {}

  const std::string& rule_id() const noexcept { return rule_id_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string rule_id_;
  std::string field_;
};

/// Tensor or feature shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Network failure talking to a validation service. Safe to retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccdt
