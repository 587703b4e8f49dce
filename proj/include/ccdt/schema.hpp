#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>


#include "ccdt/json.hpp"
#include "ccdt/result_code.hpp"

namespace ccdt {

enum class FieldKind { categorical, numerical, textual };

std::string_view to_string(FieldKind kind) noexcept;

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::categorical;

  // categorical
  std::vector<std::string> domain;

  // numerical
  double min = 0.0;
  double max = 0.0;
  bool integer = false;

  // textual
  std::size_t max_len = 0;
  // Textual fields holding ISO-8601 dates; the generator draws them from
  // [date_min, date_max].
  bool is_date = false;
  std::string date_min;
  std::string date_max;

  bool operator==(const FieldSpec&) const = default;
};

/// Ordered, validated list of fields.
class MessageSchema {
 public:
  /// Throws SchemaError on duplicate/empty names, empty domains or min >= max.
  explicit MessageSchema(std::vector<FieldSpec> fields);

  const std::vector<FieldSpec>& fields() const noexcept { return fields_; }
  std::size_t nv() const noexcept { return fields_.size(); }
  const FieldSpec& field(std::size_t i) const { return fields_.at(i); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool operator==(const MessageSchema& other) const { return fields_ == other.fields_; }

 private:
  std::vector<FieldSpec> fields_;
  std::unordered_map<std::string, std::size_t> index_;
};

using SchemaPtr = std::shared_ptr<const MessageSchema>;

/// Categorical and textual values are strings, numerical values are doubles.
using FieldValue = std::variant<std::string, double>;

/// One record; values are stored in schema field order.
struct CancerMessage {
  std::vector<FieldValue> values;

  bool operator==(const CancerMessage&) const = default;
};

/// A partial message: field name -> value. Used for counterexample recipes.
using FieldAssignment = std::vector<std::pair<std::string, FieldValue>>;

/// Throws SchemaError naming the first offending field.
void check_message(const MessageSchema& schema, const CancerMessage& message);

struct Dataset {
  SchemaPtr schema;
  std::vector<CancerMessage> messages;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return messages.size(); }
  bool operator==(const Dataset& other) const {
    return *schema == *other.schema && messages == other.messages && seed == other.seed;
  }
};

/// Messages plus one result code per (message, rule).
struct LabelledDataset {
  Dataset data;
  std::vector<std::string> rule_ids;
  std::vector<std::vector<ResultCode>> labels;  // [message][rule]

  std::size_t size() const noexcept { return data.size(); }
  std::optional<std::size_t> rule_index(std::string_view id) const;
  bool operator==(const LabelledDataset&) const = default;
};

/// Rows `indices` of `source`, in the given order (duplicates allowed).
Dataset subset(const Dataset& source, const std::vector<std::size_t>& indices);
LabelledDataset subset(const LabelledDataset& source, const std::vector<std::size_t>& indices);

/// Concatenates two labelled datasets over the same schema and rule ids.
LabelledDataset concat(const LabelledDataset& a, const LabelledDataset& b);

// ---- schema files ------------------------------------------------------------

/// The shipped nine-field schema (gender, topography, morphology, basis,
/// chemotherapy, birth_date, diagnosis_date, ct, message_version).
SchemaPtr default_schema();

MessageSchema parse_schema(const Json& doc);
Json schema_to_json(const MessageSchema& schema);
MessageSchema load_schema(const std::filesystem::path& path);
void save_schema(const MessageSchema& schema, const std::filesystem::path& path);

// ---- messages ----------------------------------------------------------------

Json message_to_json(const MessageSchema& schema, const CancerMessage& message);

/// Throws SchemaError naming the field (and `context`, e.g. "line 3") on mismatch.
CancerMessage message_from_json(const MessageSchema& schema, const Json& obj, std::string_view context = {});

Dataset read_jsonl(const std::filesystem::path& path, SchemaPtr schema);
void write_jsonl(const Dataset& dataset, const std::filesystem::path& path);

/// Labelled lines: {"message": {...}, "labels": {"R001": "info", ...}}.
LabelledDataset read_labelled_jsonl(const std::filesystem::path& path, SchemaPtr schema);
void write_labelled_jsonl(const LabelledDataset& dataset, const std::filesystem::path& path);

// ---- generation --------------------------------------------------------------

/// Per rule, the counterexample recipes a rule set offers the generator.
using RecipeBook = std::vector<std::vector<FieldAssignment>>;

/// Draws `count` schema-valid messages. With probability `violation_rate`
/// a message is overwritten with one recipe of a randomly chosen rule.
Dataset generate_messages(SchemaPtr schema, std::size_t count, std::uint64_t seed, double violation_rate,
                          const RecipeBook& recipes = {});

}  // namespace ccdt
