#include "ccdt/rules.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "ccdt/error.hpp"

namespace ccdt {

std::string_view to_string(Severity s) noexcept { return s == Severity::error ? "error" : "warning"; }

Rule make_rule(std::string id, std::string_view prereq, std::string_view check, Severity severity,
               std::vector<FieldAssignment> counterexamples, std::string family) {
  Rule r;
  r.id = std::move(id);
  try {
    r.prereq = dsl::Expression::parse(prereq);
    r.check = dsl::Expression::parse(check);
  } catch (const FormatError& e) {
    throw FormatError("rule '" + r.id + "': " + e.what());
  }
  std::set<std::string> fields;
  for (auto& f : r.prereq.fields()) fields.insert(f);
  for (auto& f : r.check.fields()) fields.insert(f);
  r.fields.assign(fields.begin(), fields.end());
  r.severity = severity;
  r.counterexamples = std::move(counterexamples);
  r.family = std::move(family);
  return r;
}

RuleSet::RuleSet(std::string version, std::vector<Rule> rules) : version_(std::move(version)), rules_(std::move(rules)) {
  std::set<std::string> seen;
  for (const auto& r : rules_) {
    if (r.id.empty()) throw SchemaError("rule with empty id");
    if (!seen.insert(r.id).second) throw SchemaError("duplicate rule id '" + r.id + "'");
  }
}

std::vector<std::string> RuleSet::ids() const {
  std::vector<std::string> out;
  out.reserve(rules_.size());
  for (const auto& r : rules_) out.push_back(r.id);
  return out;
}

const Rule* RuleSet::find(std::string_view id) const {
  for (const auto& r : rules_)
    if (r.id == id) return &r;
  return nullptr;
}

void RuleSet::check_against(const MessageSchema& schema) const {
  for (const auto& r : rules_)
    for (const auto& f : r.fields)
      if (!schema.index_of(f)) throw SchemaError("rule '" + r.id + "' references unknown field '" + f + "'");
}

RecipeBook RuleSet::recipes() const {
  RecipeBook book;
  book.reserve(rules_.size());
  for (const auto& r : rules_) book.push_back(r.counterexamples);
  return book;
}

ResultCode ValidationReport::code_for(std::string_view rule_id) const {
  for (std::size_t i = 0; i < rule_ids.size(); ++i)
    if (rule_ids[i] == rule_id) return codes[i];
  throw SchemaError("no result for rule '" + std::string(rule_id) + "'");
}

ResultCode validate_rule(const Rule& rule, const MessageSchema& schema, const CancerMessage& message) {
  try {
    if (!rule.prereq.test(schema, message)) return ResultCode::not_applied;
    if (rule.check.test(schema, message)) return ResultCode::info;
    return rule.severity == Severity::error ? ResultCode::error : ResultCode::warning;
  } catch (const EvaluationError& e) {
    throw EvaluationError(rule.id, e.field(),
                          "rule '" + rule.id + "'" + (e.field().empty() ? "" : " field '" + e.field() + "'") + ": " + e.what());
  }
}

ValidationReport validate(const MessageSchema& schema, const CancerMessage& message, const RuleSet& rules) {
  ValidationReport rep;
  rep.rule_ids.reserve(rules.nr());
  rep.codes.reserve(rules.nr());
  for (const auto& r : rules.rules()) {
    rep.rule_ids.push_back(r.id);
    rep.codes.push_back(validate_rule(r, schema, message));
  }
  return rep;
}

LabelledDataset validate_batch(const Dataset& dataset, const RuleSet& rules) {
  LabelledDataset out{dataset, rules.ids(), {}};
  out.labels.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    try {
      out.labels.push_back(validate(*dataset.schema, dataset.messages[i], rules).codes);
    } catch (const EvaluationError& e) {
      throw EvaluationError(e.rule_id(), e.field(), "message " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

RuleSetDiff diff_rulesets(const RuleSet& source, const RuleSet& target) {
  RuleSetDiff d;
  for (const auto& r : source.rules()) {
    const Rule* t = target.find(r.id);
    if (!t)
      d.removed_ids.push_back(r.id);
    else if (r.same_definition(*t))
      d.retained_ids.push_back(r.id);
    else
      d.modified_ids.push_back(r.id);
  }
  for (const auto& r : target.rules())
    if (!source.find(r.id)) d.new_ids.push_back(r.id);
  return d;
}

// ---- files ---------------------------------------------------------------------

namespace {

Json value_to_json(const FieldSpec* f, const FieldValue& v) {
  if (const auto* d = std::get_if<double>(&v)) {
    if (f && f->integer) return static_cast<long long>(*d);
    return *d;
  }
  return std::get<std::string>(v);
}

}  // namespace

Json ruleset_to_json(const RuleSet& rules, const MessageSchema& schema) {
  Json arr = Json::array();
  for (const auto& r : rules.rules()) {
    Json jr;
    jr["id"] = r.id;
    jr["fields"] = r.fields;
    jr["prereq"] = r.prereq.source();
    jr["check"] = r.check.source();
    jr["severity"] = to_string(r.severity);
    if (!r.family.empty()) jr["family"] = r.family;
    if (!r.counterexamples.empty()) {
      Json recipes = Json::array();
      for (const auto& rec : r.counterexamples) {
        Json obj = Json::object();
        for (const auto& [name, value] : rec) {
          auto idx = schema.index_of(name);
          obj[name] = value_to_json(idx ? &schema.field(*idx) : nullptr, value);
        }
        recipes.push_back(std::move(obj));
      }
      jr["counterexamples"] = std::move(recipes);
    }
    arr.push_back(std::move(jr));
  }
  Json doc;
  doc["version"] = rules.version();
  doc["rules"] = std::move(arr);
  return doc;
}

RuleSet ruleset_from_json(const Json& doc, const MessageSchema& schema) {
  if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array())
    throw FormatError("rule set: expected {\"version\", \"rules\": [...]}");
  std::vector<Rule> rules;
  std::size_t i = 0;
  for (const auto& jr : doc["rules"]) {
    std::string where = "rule " + std::to_string(i++);
    try {
      auto id = jr.at("id").get<std::string>();
      where += " ('" + id + "')";
      auto sev_text = jr.at("severity").get<std::string>();
      if (sev_text != "error" && sev_text != "warning") throw FormatError("severity must be 'error' or 'warning'");
      std::vector<FieldAssignment> recipes;
      if (jr.contains("counterexamples")) {
        for (const auto& jc : jr["counterexamples"]) {
          FieldAssignment rec;
          for (const auto& [name, value] : jc.items()) {
            if (value.is_number())
              rec.emplace_back(name, value.get<double>());
            else
              rec.emplace_back(name, value.get<std::string>());
          }
          recipes.push_back(std::move(rec));
        }
      }
      Rule r = make_rule(id, jr.at("prereq").get<std::string>(), jr.at("check").get<std::string>(),
                         sev_text == "error" ? Severity::error : Severity::warning, std::move(recipes),
                         jr.value("family", std::string{}));
      if (jr.contains("fields")) {
        auto declared = jr["fields"].get<std::vector<std::string>>();
        std::sort(declared.begin(), declared.end());
        if (declared != r.fields) throw FormatError("declared fields differ from the fields the expressions reference");
      }
      rules.push_back(std::move(r));
    } catch (const Json::exception& e) {
      throw FormatError(where + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  RuleSet set(doc.value("version", std::string{}), std::move(rules));
  set.check_against(schema);
  return set;
}

RuleSet load_ruleset(const std::filesystem::path& path, const MessageSchema& schema) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return ruleset_from_json(doc, schema);
}

void save_ruleset(const RuleSet& rules, const MessageSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << ruleset_to_json(rules, schema).dump(2) << '\n';
}

}  // namespace ccdt
