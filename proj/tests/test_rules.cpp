#include <algorithm>
#include <set>

#include "ccdt/dsl.hpp"
#include "ccdt/error.hpp"
#include "ccdt/rules.hpp"
#include "support.hpp"

using namespace ccdt;

namespace {

CancerMessage with(const MessageSchema& s, CancerMessage m, const std::string& field, FieldValue v) {
  m.values[*s.index_of(field)] = std::move(v);
  return m;
}

}  // namespace

TEST_SUITE("rules") {

TEST_CASE("dsl parses and evaluates") {
  auto s = default_schema();
  auto m = test::sample_message(*s);
  auto t = [&](const char* src) { return dsl::Expression::parse(src).test(*s, m); };
  CHECK(t("gender = \"M\""));
  CHECK(t("gender != \"F\""));
  CHECK(t("chemotherapy + 1 == 4"));
  CHECK(t("chemotherapy * 2 > 5 and not chemotherapy < 3"));
  CHECK(t("topography in [\"809\", \"500\"]"));
  CHECK(t("morphology not in [\"814\"]"));
  CHECK(t("birth_date <= diagnosis_date"));
  CHECK(t("age(birth_date, diagnosis_date) = 19"));
  CHECK(t("year(diagnosis_date) = 2019"));
  CHECK(t("diagnosis_date >= \"2019-01-01\" or false"));
  CHECK_FALSE(t("-chemotherapy > 0"));
  CHECK(t("(chemotherapy - 1) / 2 = 1"));
}

TEST_CASE("dsl reports errors") {
  auto s = default_schema();
  auto m = test::sample_message(*s);
  CHECK_THROWS_AS(dsl::Expression::parse("gender = "), FormatError);
  CHECK_THROWS_AS(dsl::Expression::parse("gender = \"M"), FormatError);
  CHECK_THROWS_AS(dsl::Expression::parse("age(birth_date)"), FormatError);
  // ordering on non-date strings is an error, not a silent comparison
  CHECK_THROWS_AS(dsl::Expression::parse("ct < \"zz\"").test(*s, m), EvaluationError);
  CHECK_THROWS_AS(dsl::Expression::parse("nosuch = 1").test(*s, m), EvaluationError);
  CHECK_THROWS_AS(dsl::Expression::parse("chemotherapy + 1").test(*s, m), EvaluationError);
  auto e = dsl::Expression::parse("birth_date <= diagnosis_date and gender = \"M\"");
  CHECK(e.fields() == std::vector<std::string>{"birth_date", "diagnosis_date", "gender"});
}

TEST_CASE("validate maps prereq/check to codes") {
  auto s = default_schema();
  auto m = test::sample_message(*s);
  auto order = make_rule("R1", "true", "birth_date <= diagnosis_date", Severity::error);
  CHECK(validate_rule(order, *s, m) == ResultCode::info);
  auto inverted = with(*s, m, "birth_date", FieldValue(std::string("2020-01-01")));
  CHECK(validate_rule(order, *s, inverted) == ResultCode::error);

  auto activated = make_rule("R2", "diagnosis_date >= \"2023-01-01\"", "chemotherapy <= 5", Severity::error);
  CHECK(validate_rule(activated, *s, m) == ResultCode::not_applied);

  auto age = make_rule("R3", "true", "age(birth_date, diagnosis_date) <= 120", Severity::warning);
  auto old = with(*s, m, "birth_date", FieldValue(std::string("1889-01-01")));
  CHECK(validate_rule(age, *s, old) == ResultCode::warning);
}

TEST_CASE("evaluation errors name rule and field") {
  auto s = default_schema();
  auto m = test::sample_message(*s);
  auto bad = make_rule("R9", "true", "ct < \"abc\"", Severity::error);
  RuleSet rs("v", {bad});
  try {
    validate(*s, m, rs);
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.rule_id() == "R9");
    CHECK(e.field() == "ct");
  }
}

TEST_CASE("validate_batch equals per-message validate") {
  auto s = default_schema();
  auto rules = generate_ruleset(*s, 30, 4);
  auto data = generate_messages(s, 50, 9, 0.3, rules.recipes());
  auto batch = validate_batch(data, rules);
  REQUIRE(batch.size() == 50);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto r = validate(*s, data.messages[i], rules);
    CHECK(r.codes == batch.labels[i]);
    CHECK(batch.labels[i].size() == rules.nr());
  }
  auto empty = validate_batch(Dataset{s, {}, 0}, rules);
  CHECK(empty.size() == 0);
}

TEST_CASE("not_applied iff prereq false") {
  auto s = default_schema();
  auto rules = generate_ruleset(*s, 40, 12);
  auto data = generate_messages(s, 200, 3, 0.3, rules.recipes());
  for (const auto& m : data.messages)
    for (const auto& r : rules.rules()) {
      const bool applies = r.prereq.test(*s, m);
      CHECK((validate_rule(r, *s, m) == ResultCode::not_applied) == !applies);
    }
}

TEST_CASE("generated rule sets") {
  auto s = default_schema();
  auto a = generate_ruleset(*s, 30, 1);
  auto b = generate_ruleset(*s, 30, 1);
  CHECK(a.nr() == 30);
  CHECK(ruleset_to_json(a, *s) == ruleset_to_json(b, *s));
  std::set<std::string> ids;
  for (const auto& r : a.rules()) {
    ids.insert(r.id);
    CHECK(r.fields.size() >= 1);
    CHECK(r.fields.size() <= 3);
    auto fields = r.prereq.fields();
    auto cf = r.check.fields();
    fields.insert(fields.end(), cf.begin(), cf.end());
    std::sort(fields.begin(), fields.end());
    fields.erase(std::unique(fields.begin(), fields.end()), fields.end());
    CHECK(fields == r.fields);
    CHECK_FALSE(r.counterexamples.empty());
  }
  CHECK(ids.size() == 30);
  CHECK_NOTHROW(a.check_against(*s));
}

TEST_CASE("counterexample recipes violate their rule") {
  auto s = default_schema();
  auto rules = generate_ruleset(*s, 40, 21);
  auto base = generate_messages(s, 20, 2, 0.0);
  for (const auto& r : rules.rules()) {
    for (const auto& recipe : r.counterexamples) {
      for (const auto& m0 : base.messages) {
        auto m = m0;
        for (const auto& [f, v] : recipe) m.values[*s->index_of(f)] = v;
        auto code = validate_rule(r, *s, m);
        CHECK(code != ResultCode::info);
        CHECK(code != ResultCode::not_applied);
      }
    }
  }
}

TEST_CASE("diff and evolution shapes") {
  auto s = default_schema();
  auto src = generate_ruleset(*s, 30, 5, "S1");
  auto tgt = evolve_ruleset(*s, src, EvolutionSpec{{1, 1, 1, 1, 1}, 0, 6, "T1"});
  CHECK(tgt.nr() == 35);
  auto d = diff_rulesets(src, tgt);
  CHECK(d.new_ids.size() == 5);
  CHECK(d.retained_ids.size() == 30);
  CHECK(d.modified_ids.empty());
  CHECK(d.removed_ids.empty());

  auto same = evolve_ruleset(*s, src, EvolutionSpec{{}, 0, 7, "S1"});
  CHECK(ruleset_to_json(same, *s) == ruleset_to_json(src, *s));
  auto self = diff_rulesets(src, src);
  CHECK(self.retained_ids.size() == 30);

  auto mod = evolve_ruleset(*s, src, EvolutionSpec{{2, 3}, 2, 8, "T"});
  auto dm = diff_rulesets(src, mod);
  CHECK(dm.modified_ids.size() == 2);
  CHECK(dm.new_ids.size() == 2);
  CHECK(dm.retained_ids.size() == 28);
  for (std::size_t i = 0; i < 2; ++i) CHECK(mod.find(dm.new_ids[i])->fields.size() == static_cast<std::size_t>(i + 2));

  // partition property
  std::set<std::string> all;
  for (auto* v : {&dm.retained_ids, &dm.modified_ids, &dm.new_ids, &dm.removed_ids})
    for (const auto& id : *v) CHECK(all.insert(id).second);
  CHECK(all.size() == 32);
}

TEST_CASE("edited check shows up as modified; removed ids reported") {
  auto s = default_schema();
  auto a = RuleSet("a", {make_rule("R1", "true", "chemotherapy <= 5", Severity::error),
                         make_rule("R2", "true", "gender = \"M\"", Severity::error)});
  auto b = RuleSet("b", {make_rule("R1", "true", "chemotherapy <= 6", Severity::error)});
  auto d = diff_rulesets(a, b);
  CHECK(d.modified_ids == std::vector<std::string>{"R1"});
  CHECK(d.removed_ids == std::vector<std::string>{"R2"});
}

TEST_CASE("shipped presets reach the listed sizes") {
  auto s = default_schema();
  for (auto [n, arities] : std::vector<std::pair<std::size_t, std::vector<int>>>{
           {30, {1, 1, 1, 1, 1}}, {40, {1, 1, 1, 2, 2}}, {51, {1, 2, 2, 2, 3}}}) {
    auto src = generate_ruleset(*s, n, n);
    auto tgt = evolve_ruleset(*s, src, EvolutionSpec{arities, 2, n + 1, "T"});
    CHECK(src.nr() == n);
    CHECK(tgt.nr() == n + 5);
  }
}

TEST_CASE("rule set json round trip and duplicate ids") {
  test::TempDir dir("rules");
  auto s = default_schema();
  auto r = generate_ruleset(*s, 12, 77, "v7");
  save_ruleset(r, *s, dir.path / "r.json");
  auto back = load_ruleset(dir.path / "r.json", *s);
  CHECK(back.version() == "v7");
  CHECK(ruleset_to_json(back, *s) == ruleset_to_json(r, *s));
  auto rule = make_rule("R1", "true", "true", Severity::error);
  CHECK_THROWS_AS(RuleSet("x", {rule, rule}), SchemaError);
  Json doc = ruleset_to_json(r, *s);
  doc["rules"][0]["check"] = "nosuch_field = 1";
  CHECK_THROWS(ruleset_from_json(doc, *s));
}

TEST_CASE("labelled corpora contain all four codes") {
  auto s = default_schema();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto rules = generate_ruleset(*s, 30, seed);
    auto data = generate_messages(s, 500, seed + 10, 0.2, rules.recipes());
    auto l = validate_batch(data, rules);
    std::set<ResultCode> seen;
    for (const auto& row : l.labels) seen.insert(row.begin(), row.end());
    CHECK(seen.size() == 4);
  }
}

}  // TEST_SUITE
