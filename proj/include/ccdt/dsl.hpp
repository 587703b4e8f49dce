#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ccdt/schema.hpp"

namespace ccdt::dsl {

/// Runtime value of an expression.
using Value = std::variant<bool, double, std::string>;

struct Node;

/// A parsed predicate/arithmetic expression of the rule language (grammar in
/// docs/rule_dsl.md). Immutable and cheap to copy.
class Expression {
 public:
  Expression() = default;

  /// Throws FormatError with the column of the first syntax error.
  static Expression parse(std::string_view source);

  const std::string& source() const noexcept { return source_; }

  /// Field names referenced anywhere in the expression, sorted and unique.
  std::vector<std::string> fields() const;

  /// Evaluates against a message. Throws EvaluationError (rule id left empty)
  /// naming the offending field on missing or ill-typed operands.
  Value evaluate(const MessageSchema& schema, const CancerMessage& message) const;

  /// Evaluates and requires a boolean result.
  bool test(const MessageSchema& schema, const CancerMessage& message) const;

  bool operator==(const Expression& other) const { return source_ == other.source_; }

 private:
  std::string source_;
  std::shared_ptr<const Node> root_;
};

}  // namespace ccdt::dsl
