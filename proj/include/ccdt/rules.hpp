#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ccdt/dsl.hpp"
#include "ccdt/json.hpp"
#include "ccdt/result_code.hpp"
#include "ccdt/schema.hpp"

namespace ccdt {

enum class Severity { error, warning };

std::string_view to_string(Severity s) noexcept;

/// One declarative validation rule. If `prereq` is false the rule does not
/// apply; otherwise `check` decides between info and `severity`.
struct Rule {
  std::string id;
  std::vector<std::string> fields;  // sorted union of fields referenced by prereq and check
  dsl::Expression prereq;
  dsl::Expression check;
  Severity severity = Severity::error;
  // Field assignments that make prereq true and check false.
  std::vector<FieldAssignment> counterexamples;
  // Generator template that produced the rule; empty for hand-written rules.
  std::string family;

  /// Same id and behaviour (prereq, check, severity).
  bool same_definition(const Rule& other) const {
    return prereq == other.prereq && check == other.check && severity == other.severity;
  }
};

/// Builds a rule from expression sources; derives `fields` from them.
/// Throws FormatError on syntax errors.
Rule make_rule(std::string id, std::string_view prereq, std::string_view check, Severity severity,
               std::vector<FieldAssignment> counterexamples = {}, std::string family = {});

class RuleSet {
 public:
  RuleSet() = default;
  /// Throws SchemaError on duplicate ids.
  RuleSet(std::string version, std::vector<Rule> rules);

  const std::string& version() const noexcept { return version_; }
  const std::vector<Rule>& rules() const noexcept { return rules_; }
  std::size_t nr() const noexcept { return rules_.size(); }
  std::vector<std::string> ids() const;
  const Rule* find(std::string_view id) const;

  /// Throws SchemaError if a rule references a field the schema lacks.
  void check_against(const MessageSchema& schema) const;

  RecipeBook recipes() const;

 private:
  std::string version_;
  std::vector<Rule> rules_;
};

/// Codes aligned with the rule set's rule order.
struct ValidationReport {
  std::vector<std::string> rule_ids;
  std::vector<ResultCode> codes;

  ResultCode code_for(std::string_view rule_id) const;
};

ResultCode validate_rule(const Rule& rule, const MessageSchema& schema, const CancerMessage& message);

/// Throws EvaluationError naming the rule id and field on ill-typed data.
ValidationReport validate(const MessageSchema& schema, const CancerMessage& message, const RuleSet& rules);

/// Element-wise validate; errors carry the message index.
LabelledDataset validate_batch(const Dataset& dataset, const RuleSet& rules);

struct RuleSetDiff {
  std::vector<std::string> retained_ids;  // identical definition in both
  std::vector<std::string> modified_ids;  // same id, different definition
  std::vector<std::string> new_ids;       // target only
  std::vector<std::string> removed_ids;   // source only
};

RuleSetDiff diff_rulesets(const RuleSet& source, const RuleSet& target);

// ---- synthetic rule sets -----------------------------------------------------

/// Draws `n_rules` rules mixing single-field range/membership checks,
/// two- and three-field combination checks and date-gated prerequisites.
/// Throws ConfigError when the schema cannot host the requested shapes.
RuleSet generate_ruleset(const MessageSchema& schema, std::size_t n_rules, std::uint64_t seed,
                         std::string version = "v1");

struct EvolutionSpec {
  std::vector<int> addition_arities;  // one entry per added rule: 1, 2 or 3 fields
  std::size_t modifications = 0;
  std::uint64_t seed = 0;
  std::string version = "v2";
};

/// Adds and modifies rules; ids of new rules continue the numbering.
RuleSet evolve_ruleset(const MessageSchema& schema, const RuleSet& source, const EvolutionSpec& spec);

/// Rule generation with a fixed arity; exposed for tests.
Rule generate_rule(const MessageSchema& schema, std::string id, int arity, std::uint64_t seed);

// ---- files ---------------------------------------------------------------------

Json ruleset_to_json(const RuleSet& rules, const MessageSchema& schema);
RuleSet ruleset_from_json(const Json& doc, const MessageSchema& schema);
RuleSet load_ruleset(const std::filesystem::path& path, const MessageSchema& schema);
void save_ruleset(const RuleSet& rules, const MessageSchema& schema, const std::filesystem::path& path);

}  // namespace ccdt
