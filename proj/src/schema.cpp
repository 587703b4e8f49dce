#include "ccdt/schema.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ccdt/dates.hpp"
#include "ccdt/error.hpp"

namespace ccdt {

using json = Json;
using ordered_json = Json;

std::string_view to_string(ResultCode c) noexcept {
  switch (c) {
    case ResultCode::info: return "info";
    case ResultCode::warning: return "warning";
    case ResultCode::not_applied: return "not_applied";
    case ResultCode::error: return "error";
  }
  return "?";
}

ResultCode parse_result_code(std::string_view text) {
  for (auto c : kAllCodes)
    if (to_string(c) == text) return c;
  throw FormatError("unknown result code '" + std::string(text) + "'");
}

std::string_view to_string(FieldKind kind) noexcept {
  switch (kind) {
    case FieldKind::categorical: return "categorical";
    case FieldKind::numerical: return "numerical";
    case FieldKind::textual: return "textual";
  }
  return "?";
}

MessageSchema::MessageSchema(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  if (fields_.empty()) throw SchemaError("schema has no fields");
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const auto& f = fields_[i];
    if (f.name.empty()) throw SchemaError("field " + std::to_string(i) + " has an empty name");
    if (!index_.emplace(f.name, i).second) throw SchemaError("duplicate field name '" + f.name + "'");
    switch (f.kind) {
      case FieldKind::categorical: {
        if (f.domain.empty()) throw SchemaError("field '" + f.name + "': empty categorical domain");
        std::set<std::string> seen(f.domain.begin(), f.domain.end());
        if (seen.size() != f.domain.size()) throw SchemaError("field '" + f.name + "': duplicate domain values");
        break;
      }
      case FieldKind::numerical:
        if (!(f.min < f.max)) throw SchemaError("field '" + f.name + "': min must be < max");
        break;
      case FieldKind::textual:
        if (f.max_len == 0) throw SchemaError("field '" + f.name + "': max_len must be positive");
        if (f.is_date) {
          auto lo = parse_iso_date(f.date_min);
          auto hi = parse_iso_date(f.date_max);
          if (!lo || !hi || *lo > *hi) throw SchemaError("field '" + f.name + "': invalid date range");
          if (f.max_len < 10) throw SchemaError("field '" + f.name + "': date fields need max_len >= 10");
        }
        break;
    }
  }
}

std::optional<std::size_t> MessageSchema::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void check_message(const MessageSchema& schema, const CancerMessage& message) {
  if (message.values.size() != schema.nv())
    throw SchemaError("message has " + std::to_string(message.values.size()) + " values, schema has " +
                      std::to_string(schema.nv()));
  for (std::size_t i = 0; i < schema.nv(); ++i) {
    const auto& f = schema.field(i);
    const auto& v = message.values[i];
    switch (f.kind) {
      case FieldKind::categorical: {
        const auto* s = std::get_if<std::string>(&v);
        if (!s) throw SchemaError("field '" + f.name + "': expected a categorical string");
        if (std::find(f.domain.begin(), f.domain.end(), *s) == f.domain.end())
          throw SchemaError("field '" + f.name + "': value '" + *s + "' not in domain");
        break;
      }
      case FieldKind::numerical: {
        const auto* d = std::get_if<double>(&v);
        if (!d) throw SchemaError("field '" + f.name + "': expected a number");
        if (!std::isfinite(*d) || *d < f.min || *d > f.max)
          throw SchemaError("field '" + f.name + "': value out of range");
        if (f.integer && std::floor(*d) != *d) throw SchemaError("field '" + f.name + "': expected an integer");
        break;
      }
      case FieldKind::textual: {
        const auto* s = std::get_if<std::string>(&v);
        if (!s) throw SchemaError("field '" + f.name + "': expected a string");
        if (s->size() > f.max_len) throw SchemaError("field '" + f.name + "': text longer than max_len");
        break;
      }
    }
  }
}

std::optional<std::size_t> LabelledDataset::rule_index(std::string_view id) const {
  for (std::size_t j = 0; j < rule_ids.size(); ++j)
    if (rule_ids[j] == id) return j;
  return std::nullopt;
}

Dataset subset(const Dataset& source, const std::vector<std::size_t>& indices) {
  Dataset out{source.schema, {}, source.seed};
  out.messages.reserve(indices.size());
  for (auto i : indices) out.messages.push_back(source.messages.at(i));
  return out;
}

LabelledDataset subset(const LabelledDataset& source, const std::vector<std::size_t>& indices) {
  LabelledDataset out{subset(source.data, indices), source.rule_ids, {}};
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(source.labels.at(i));
  return out;
}

LabelledDataset concat(const LabelledDataset& a, const LabelledDataset& b) {
  if (a.rule_ids != b.rule_ids) throw SchemaError("concat: rule ids differ");
  if (!(*a.data.schema == *b.data.schema)) throw SchemaError("concat: schemas differ");
  LabelledDataset out = a;
  out.data.messages.insert(out.data.messages.end(), b.data.messages.begin(), b.data.messages.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

// ---- schema files ------------------------------------------------------------

SchemaPtr default_schema() {
  std::vector<FieldSpec> f;
  auto cat = [&](std::string name, std::vector<std::string> domain) {
    FieldSpec s;
    s.name = std::move(name);
    s.kind = FieldKind::categorical;
    s.domain = std::move(domain);
    f.push_back(std::move(s));
  };
  auto text = [&](std::string name, std::string lo = {}, std::string hi = {}) {
    FieldSpec s;
    s.name = std::move(name);
    s.kind = FieldKind::textual;
    s.max_len = 10;
    if (!lo.empty()) {
      s.is_date = true;
      s.date_min = std::move(lo);
      s.date_max = std::move(hi);
    }
    f.push_back(std::move(s));
  };
  cat("gender", {"M", "F"});
  cat("topography", {"809", "500", "619", "180", "340", "440"});
  cat("morphology", {"405", "814", "807", "872", "850", "959"});
  cat("basis", {"0", "1", "2", "5", "7"});
  FieldSpec chemo;
  chemo.name = "chemotherapy";
  chemo.kind = FieldKind::numerical;
  chemo.min = 0;
  chemo.max = 10;
  chemo.integer = true;
  f.push_back(chemo);
  text("birth_date", "1925-01-01", "2010-12-31");
  text("diagnosis_date", "2000-01-01", "2023-12-31");
  text("ct");
  text("message_version");
  static const SchemaPtr schema = std::make_shared<const MessageSchema>(std::move(f));
  return schema;
}

namespace {

template <class T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw SchemaError(where + ": missing '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(where + ": bad '" + key + "': " + e.what());
  }
}

}  // namespace

MessageSchema parse_schema(const json& doc) {
  if (!doc.is_object() || !doc.contains("fields") || !doc["fields"].is_array())
    throw SchemaError("schema: expected an object with a 'fields' array");
  std::vector<FieldSpec> fields;
  std::size_t i = 0;
  for (const auto& jf : doc["fields"]) {
    std::string where = "schema field " + std::to_string(i++);
    if (!jf.is_object()) throw SchemaError(where + ": expected an object");
    FieldSpec f;
    f.name = require<std::string>(jf, "name", where);
    where += " ('" + f.name + "')";
    auto kind = require<std::string>(jf, "kind", where);
    if (kind == "categorical") {
      f.kind = FieldKind::categorical;
      f.domain = require<std::vector<std::string>>(jf, "domain", where);
    } else if (kind == "numerical") {
      f.kind = FieldKind::numerical;
      f.min = require<double>(jf, "min", where);
      f.max = require<double>(jf, "max", where);
      f.integer = jf.value("integer", false);
    } else if (kind == "textual") {
      f.kind = FieldKind::textual;
      f.max_len = require<std::size_t>(jf, "max_len", where);
      if (jf.value("format", std::string{}) == "date") {
        f.is_date = true;
        f.date_min = require<std::string>(jf, "date_min", where);
        f.date_max = require<std::string>(jf, "date_max", where);
      }
    } else {
      throw SchemaError(where + ": unknown kind '" + kind + "'");
    }
    fields.push_back(std::move(f));
  }
  return MessageSchema(std::move(fields));
}

ordered_json schema_to_json(const MessageSchema& schema) {
  ordered_json fields = ordered_json::array();
  for (const auto& f : schema.fields()) {
    ordered_json jf;
    jf["name"] = f.name;
    jf["kind"] = to_string(f.kind);
    switch (f.kind) {
      case FieldKind::categorical: jf["domain"] = f.domain; break;
      case FieldKind::numerical:
        jf["min"] = f.min;
        jf["max"] = f.max;
        if (f.integer) jf["integer"] = true;
        break;
      case FieldKind::textual:
        jf["max_len"] = f.max_len;
        if (f.is_date) {
          jf["format"] = "date";
          jf["date_min"] = f.date_min;
          jf["date_max"] = f.date_max;
        }
        break;
    }
    fields.push_back(std::move(jf));
  }
  return ordered_json{{"fields", std::move(fields)}};
}

namespace {

json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

}  // namespace

MessageSchema load_schema(const std::filesystem::path& path) {
  try {
    return parse_schema(parse_json_file(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void save_schema(const MessageSchema& schema, const std::filesystem::path& path) {
  write_text(path, schema_to_json(schema).dump(2) + "\n");
}

// ---- messages ----------------------------------------------------------------

ordered_json message_to_json(const MessageSchema& schema, const CancerMessage& message) {
  ordered_json obj = ordered_json::object();
  for (std::size_t i = 0; i < schema.nv(); ++i) {
    const auto& f = schema.field(i);
    const auto& v = message.values.at(i);
    if (const auto* d = std::get_if<double>(&v)) {
      if (f.integer)
        obj[f.name] = static_cast<long long>(*d);
      else
        obj[f.name] = *d;
    } else {
      obj[f.name] = std::get<std::string>(v);
    }
  }
  return obj;
}

CancerMessage message_from_json(const MessageSchema& schema, const json& obj, std::string_view context) {
  std::string prefix = context.empty() ? std::string{} : std::string(context) + ": ";
  if (!obj.is_object()) throw SchemaError(prefix + "expected a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!schema.index_of(key)) throw SchemaError(prefix + "field '" + key + "' is not in the schema");
  CancerMessage msg;
  msg.values.reserve(schema.nv());
  for (const auto& f : schema.fields()) {
    auto it = obj.find(f.name);
    if (it == obj.end()) throw SchemaError(prefix + "field '" + f.name + "' is missing");
    if (f.kind == FieldKind::numerical) {
      if (!it->is_number()) throw SchemaError(prefix + "field '" + f.name + "' must be a number");
      msg.values.emplace_back(it->get<double>());
    } else {
      if (!it->is_string()) throw SchemaError(prefix + "field '" + f.name + "' must be a string");
      msg.values.emplace_back(it->get<std::string>());
    }
  }
  try {
    check_message(schema, msg);
  } catch (const SchemaError& e) {
    throw SchemaError(prefix + e.what());
  }
  return msg;
}

namespace {

template <class Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where = path.filename().string() + " line " + std::to_string(lineno);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(where + ": malformed JSON: " + e.what());
    }
    fn(obj, where);
  }
}

}  // namespace

Dataset read_jsonl(const std::filesystem::path& path, SchemaPtr schema) {
  Dataset ds{schema, {}, 0};
  for_each_line(path, [&](const json& obj, const std::string& where) {
    ds.messages.push_back(message_from_json(*schema, obj, where));
  });
  return ds;
}

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& m : dataset.messages) out << message_to_json(*dataset.schema, m).dump() << '\n';
  write_text(path, out.str());
}

LabelledDataset read_labelled_jsonl(const std::filesystem::path& path, SchemaPtr schema) {
  LabelledDataset ds{{schema, {}, 0}, {}, {}};
  bool first = true;
  for_each_line(path, [&](const json& obj, const std::string& where) {
    if (!obj.contains("message") || !obj.contains("labels") || !obj["labels"].is_object())
      throw FormatError(where + ": expected {\"message\": ..., \"labels\": {...}}");
    ds.data.messages.push_back(message_from_json(*schema, obj["message"], where));
    const auto& labels = obj["labels"];
    if (first) {
      for (const auto& [id, _] : labels.items()) ds.rule_ids.push_back(id);
      first = false;
    }
    if (labels.size() != ds.rule_ids.size()) throw FormatError(where + ": label count differs from first line");
    std::vector<ResultCode> row;
    row.reserve(ds.rule_ids.size());
    for (const auto& id : ds.rule_ids) {
      auto it = labels.find(id);
      if (it == labels.end() || !it->is_string()) throw FormatError(where + ": missing label for rule '" + id + "'");
      try {
        row.push_back(parse_result_code(it->get<std::string>()));
      } catch (const FormatError& e) {
        throw FormatError(where + ": rule '" + id + "': " + e.what());
      }
    }
    ds.labels.push_back(std::move(row));
  });
  return ds;
}

void write_labelled_jsonl(const LabelledDataset& dataset, const std::filesystem::path& path) {
  std::ostringstream out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ordered_json line;
    line["message"] = message_to_json(*dataset.data.schema, dataset.data.messages[i]);
    ordered_json labels = ordered_json::object();
    for (std::size_t j = 0; j < dataset.rule_ids.size(); ++j)
      labels[dataset.rule_ids[j]] = to_string(dataset.labels[i][j]);
    line["labels"] = std::move(labels);
    out << line.dump() << '\n';
  }
  write_text(path, out.str());
}

}  // namespace ccdt
