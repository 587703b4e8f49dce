#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "ccdt/dates.hpp"
#include "ccdt/error.hpp"
#include "ccdt/random.hpp"
#include "ccdt/rules.hpp"

namespace ccdt {

namespace {

struct Fields {
  std::vector<const FieldSpec*> cats;     // any categorical (prerequisite equality)
  std::vector<const FieldSpec*> members;  // categorical with >= 3 values (membership checks)
  std::vector<const FieldSpec*> nums;
  std::vector<const FieldSpec*> dates;

  explicit Fields(const MessageSchema& schema) {
    for (const auto& f : schema.fields()) {
      if (f.kind == FieldKind::categorical) {
        cats.push_back(&f);
        if (f.domain.size() >= 3) members.push_back(&f);
      } else if (f.kind == FieldKind::numerical) {
        nums.push_back(&f);
      } else if (f.is_date) {
        dates.push_back(&f);
      }
    }
    // Earliest-starting date field first, so "dates[0] <= dates[1]" reads as birth <= diagnosis.
    std::sort(dates.begin(), dates.end(),
              [](const FieldSpec* a, const FieldSpec* b) { return *parse_iso_date(a->date_min) < *parse_iso_date(b->date_min); });
  }
};

std::string quote(const std::string& s) { return "\"" + s + "\""; }

std::string list_of(const std::vector<std::string>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + quote(values[i]);
  return out + "]";
}

std::string number_text(double v) {
  char buf[32];
  if (std::floor(v) == v && std::abs(v) < 1e15)
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  else
    std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

/// Splits a domain into (allowed, excluded) with 1-2 excluded values.
std::pair<std::vector<std::string>, std::vector<std::string>> split_domain(const FieldSpec& f, Rng& rng) {
  std::vector<std::string> values = f.domain;
  shuffle(values.begin(), values.end(), rng);
  std::size_t n_excluded = (values.size() >= 5 && bernoulli(rng, 0.5)) ? 2 : 1;
  std::vector<std::string> excluded(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n_excluded));
  std::vector<std::string> allowed(values.begin() + static_cast<std::ptrdiff_t>(n_excluded), values.end());
  auto by_domain_order = [&](const std::string& a, const std::string& b) {
    return std::find(f.domain.begin(), f.domain.end(), a) < std::find(f.domain.begin(), f.domain.end(), b);
  };
  std::sort(allowed.begin(), allowed.end(), by_domain_order);
  std::sort(excluded.begin(), excluded.end(), by_domain_order);
  return {allowed, excluded};
}

struct DateRange {
  int lo, hi;
  explicit DateRange(const FieldSpec& f) : lo(*parse_iso_date(f.date_min)), hi(*parse_iso_date(f.date_max)) {}
  int first_year() const { return year_of(lo); }
  int last_year() const { return year_of(hi); }
};

std::string jan_first(int year) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-01-01", year);
  return buf;
}

/// A gate year strictly inside the field's range, at a quantile in [qlo, qhi].
int gate_year(const FieldSpec& f, Rng& rng, double qlo, double qhi) {
  DateRange r(f);
  int span = r.last_year() - r.first_year();
  int y0 = r.first_year() + std::max(1, static_cast<int>(std::lround(qlo * span)));
  int y1 = r.first_year() + std::max(1, static_cast<int>(std::lround(qhi * span)));
  y1 = std::min(y1, r.last_year());
  if (y1 < y0) y1 = y0;
  return y0 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(y1 - y0 + 1)));
}

std::string date_in_year(int year, Rng& rng) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, 1 + static_cast<int>(uniform_index(rng, 12)),
                1 + static_cast<int>(uniform_index(rng, 28)));
  return buf;
}

/// Upper or lower plausibility bound that leaves 10-30% of the range outside.
struct Bound {
  bool upper;
  double limit;
  std::vector<double> violating;
};

Bound numeric_bound(const FieldSpec& f, Rng& rng) {
  Bound b;
  b.upper = bernoulli(rng, 0.6);
  double q = uniform_real(rng, 0.1, 0.3);
  double span = f.max - f.min;
  if (b.upper) {
    b.limit = f.max - q * span;
    if (f.integer) b.limit = std::floor(b.limit);
    if (b.limit >= f.max) b.limit = f.integer ? f.max - 1 : f.max - 0.1 * span;
    b.violating = {f.max, f.integer ? b.limit + 1 : (b.limit + f.max) / 2};
  } else {
    b.limit = f.min + q * span;
    if (f.integer) b.limit = std::ceil(b.limit);
    if (b.limit <= f.min) b.limit = f.integer ? f.min + 1 : f.min + 0.1 * span;
    b.violating = {f.min, f.integer ? b.limit - 1 : (b.limit + f.min) / 2};
  }
  std::sort(b.violating.begin(), b.violating.end());
  b.violating.erase(std::unique(b.violating.begin(), b.violating.end()), b.violating.end());
  return b;
}

std::string bound_text(const FieldSpec& f, const Bound& b) {
  return f.name + (b.upper ? " <= " : " >= ") + number_text(b.limit);
}

using Family = std::string;

std::vector<Family> families_for(const Fields& fs, int arity) {
  std::vector<Family> out;
  switch (arity) {
    case 1:
      if (!fs.members.empty()) out.push_back("member");
      if (!fs.nums.empty()) out.insert(out.end(), {"range", "range_gated"});
      if (!fs.dates.empty()) out.push_back("date_floor");
      break;
    case 2:
      if (fs.cats.size() >= 2 && !fs.members.empty()) out.push_back("combo");
      if (!fs.dates.empty() && !fs.members.empty()) out.push_back("gated_member");
      if (!fs.cats.empty() && !fs.nums.empty()) out.push_back("numcat");
      if (fs.dates.size() >= 2) out.insert(out.end(), {"date_order", "age"});
      break;
    case 3:
      if (!fs.dates.empty() && fs.cats.size() >= 2 && !fs.members.empty()) out.push_back("gated_combo");
      if (fs.cats.size() >= 2 && !fs.nums.empty() && !fs.members.empty()) out.push_back("combo_num");
      break;
    default: break;
  }
  return out;
}

/// Picks a categorical prerequisite field different from `avoid`, and a value.
std::pair<const FieldSpec*, std::string> prereq_value(const Fields& fs, Rng& rng, const FieldSpec* avoid = nullptr,
                                                      const FieldSpec* avoid2 = nullptr) {
  std::vector<const FieldSpec*> options;
  for (auto* f : fs.cats)
    if (f != avoid && f != avoid2) options.push_back(f);
  if (options.empty()) throw ConfigError("schema lacks a categorical field for a prerequisite");
  const FieldSpec* f = pick(options, rng);
  return {f, pick(f->domain, rng)};
}

Rule build(const Fields& fs, const Family& family, const std::string& id, Rng& rng) {
  using V = FieldValue;
  if (family == "member") {
    const FieldSpec& c = *pick(fs.members, rng);
    auto [allowed, excluded] = split_domain(c, rng);
    std::vector<FieldAssignment> recipes;
    for (auto& e : excluded) recipes.push_back({{c.name, V(e)}});
    return make_rule(id, "true", c.name + " in " + list_of(allowed), Severity::error, recipes, family);
  }
  if (family == "range") {
    const FieldSpec& n = *pick(fs.nums, rng);
    Bound b = numeric_bound(n, rng);
    std::vector<FieldAssignment> recipes;
    for (double v : b.violating) recipes.push_back({{n.name, V(v)}});
    return make_rule(id, "true", bound_text(n, b), Severity::warning, recipes, family);
  }
  if (family == "range_gated") {
    // Only applies when the quantity is present at all (above its minimum).
    const FieldSpec& n = *pick(fs.nums, rng);
    double span = n.max - n.min;
    double limit = n.max - uniform_real(rng, 0.15, 0.35) * span;
    if (n.integer) limit = std::floor(limit);
    std::vector<FieldAssignment> recipes = {{{n.name, V(n.max)}}};
    if (n.integer && limit + 1 < n.max) recipes.push_back({{n.name, V(limit + 1)}});
    return make_rule(id, n.name + " > " + number_text(n.min), n.name + " <= " + number_text(limit), Severity::warning,
                     recipes, family);
  }
  if (family == "date_floor") {
    const FieldSpec& d = *pick(fs.dates, rng);
    int gy = gate_year(d, rng, 0.1, 0.3);
    DateRange r(d);
    std::vector<FieldAssignment> recipes = {{{d.name, V(date_in_year(r.first_year(), rng))}},
                                            {{d.name, V(date_in_year(gy - 1, rng))}}};
    return make_rule(id, "true", d.name + " >= " + quote(jan_first(gy)), Severity::error, recipes, family);
  }
  if (family == "combo") {
    const FieldSpec& c2 = *pick(fs.members, rng);
    auto [pf, pv] = prereq_value(fs, rng, &c2);
    auto [allowed, excluded] = split_domain(c2, rng);
    std::vector<FieldAssignment> recipes;
    for (auto& e : excluded) recipes.push_back({{pf->name, V(pv)}, {c2.name, V(e)}});
    return make_rule(id, pf->name + " = " + quote(pv), c2.name + " in " + list_of(allowed), Severity::error, recipes,
                     family);
  }
  if (family == "gated_member") {
    const FieldSpec& d = *pick(fs.dates, rng);
    const FieldSpec& c = *pick(fs.members, rng);
    int gy = gate_year(d, rng, 0.3, 0.8);
    DateRange r(d);
    auto [allowed, excluded] = split_domain(c, rng);
    std::vector<FieldAssignment> recipes;
    for (auto& e : excluded)
      recipes.push_back({{d.name, V(date_in_year(gy + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(r.last_year() - gy + 1))), rng))},
                         {c.name, V(e)}});
    return make_rule(id, d.name + " >= " + quote(jan_first(gy)), c.name + " in " + list_of(allowed), Severity::error,
                     recipes, family);
  }
  if (family == "numcat") {
    const FieldSpec& n = *pick(fs.nums, rng);
    auto [pf, pv] = prereq_value(fs, rng);
    Bound b = numeric_bound(n, rng);
    std::vector<FieldAssignment> recipes;
    for (double v : b.violating) recipes.push_back({{pf->name, V(pv)}, {n.name, V(v)}});
    return make_rule(id, pf->name + " = " + quote(pv), bound_text(n, b), Severity::error, recipes, family);
  }
  if (family == "date_order") {
    const FieldSpec& a = *fs.dates[0];
    const FieldSpec& b = *fs.dates[1];
    DateRange rb(b);
    int y = rb.first_year() + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(rb.last_year() - rb.first_year())));
    std::vector<FieldAssignment> recipes = {{{a.name, V(date_in_year(y + 1, rng))}, {b.name, V(date_in_year(y, rng))}}};
    return make_rule(id, "true", a.name + " <= " + b.name, Severity::error, recipes, family);
  }
  if (family == "age") {
    const FieldSpec& a = *fs.dates[0];
    const FieldSpec& b = *fs.dates[1];
    int limit = 100 + 5 * static_cast<int>(uniform_index(rng, 5));
    DateRange rb(b);
    int y = rb.last_year() - static_cast<int>(uniform_index(rng, 5));
    std::vector<FieldAssignment> recipes = {
        {{a.name, V(date_in_year(y - limit - 2 - static_cast<int>(uniform_index(rng, 20)), rng))}, {b.name, V(date_in_year(y, rng))}}};
    return make_rule(id, "true", "age(" + a.name + ", " + b.name + ") <= " + std::to_string(limit), Severity::warning,
                     recipes, family);
  }
  if (family == "gated_combo") {
    const FieldSpec& d = *pick(fs.dates, rng);
    const FieldSpec& c2 = *pick(fs.members, rng);
    auto [pf, pv] = prereq_value(fs, rng, &c2);
    int gy = gate_year(d, rng, 0.2, 0.7);
    DateRange r(d);
    auto [allowed, excluded] = split_domain(c2, rng);
    std::vector<FieldAssignment> recipes;
    for (auto& e : excluded)
      recipes.push_back({{d.name, V(date_in_year(gy + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(r.last_year() - gy + 1))), rng))},
                         {pf->name, V(pv)},
                         {c2.name, V(e)}});
    return make_rule(id, d.name + " >= " + quote(jan_first(gy)) + " and " + pf->name + " = " + quote(pv),
                     c2.name + " in " + list_of(allowed), Severity::error, recipes, family);
  }
  if (family == "combo_num") {
    const FieldSpec& n = *pick(fs.nums, rng);
    const FieldSpec& c2 = *pick(fs.members, rng);
    auto [pf, pv] = prereq_value(fs, rng, &c2);
    auto [allowed, excluded] = split_domain(c2, rng);
    Bound b = numeric_bound(n, rng);
    std::vector<FieldAssignment> recipes;
    for (double v : b.violating) recipes.push_back({{pf->name, V(pv)}, {c2.name, V(allowed.front())}, {n.name, V(v)}});
    return make_rule(id, pf->name + " = " + quote(pv) + " and " + c2.name + " in " + list_of(allowed), bound_text(n, b),
                     Severity::error, recipes, family);
  }
  throw ConfigError("unknown rule family '" + family + "'");
}

std::string rule_id(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "R%03zu", n);
  return buf;
}

std::size_t id_number(const std::string& id) {
  std::size_t n = 0;
  for (char c : id)
    if (c >= '0' && c <= '9') n = n * 10 + static_cast<std::size_t>(c - '0');
  return n;
}

std::string signature(const Rule& r) { return r.prereq.source() + "|" + r.check.source(); }

/// Draws a rule of the given arity whose definition is not yet in `taken`.
Rule draw_unique(const Fields& fs, int arity, const std::string& id, std::uint64_t seed, std::set<std::string>& taken) {
  auto families = families_for(fs, arity);
  if (families.empty())
    throw ConfigError("schema lacks enough fields for rules over " + std::to_string(arity) + " field(s)");
  for (int attempt = 0; attempt < 200; ++attempt) {
    Rng rng(derive_seed(seed, "attempt-" + std::to_string(attempt)));
    Rule r = build(fs, pick(families, rng), id, rng);
    if (taken.insert(signature(r)).second) return r;
  }
  throw ConfigError("could not draw a distinct rule over " + std::to_string(arity) + " field(s); schema too small");
}

int draw_arity(const Fields& fs, Rng& rng) {
  double u = uniform01(rng);
  int arity = u < 0.45 ? 1 : u < 0.85 ? 2 : 3;
  while (arity > 1 && families_for(fs, arity).empty()) --arity;
  return arity;
}

}  // namespace

Rule generate_rule(const MessageSchema& schema, std::string id, int arity, std::uint64_t seed) {
  Fields fs(schema);
  std::set<std::string> taken;
  return draw_unique(fs, arity, id, seed, taken);
}

RuleSet generate_ruleset(const MessageSchema& schema, std::size_t n_rules, std::uint64_t seed, std::string version) {
  if (n_rules == 0) throw ConfigError("generate_ruleset: n_rules must be >= 1");
  Fields fs(schema);
  if (families_for(fs, 1).empty()) throw ConfigError("schema lacks fields for single-field rules");
  Rng rng(derive_seed(seed, "arity"));
  std::set<std::string> taken;
  std::vector<Rule> rules;
  for (std::size_t i = 0; i < n_rules; ++i) {
    int arity = draw_arity(fs, rng);
    rules.push_back(draw_unique(fs, arity, rule_id(i + 1), derive_seed(seed, "rule-" + std::to_string(i)), taken));
  }
  return RuleSet(std::move(version), std::move(rules));
}

RuleSet evolve_ruleset(const MessageSchema& schema, const RuleSet& source, const EvolutionSpec& spec) {
  Fields fs(schema);
  std::vector<Rule> rules = source.rules();
  std::set<std::string> taken;
  for (const auto& r : rules) taken.insert(signature(r));

  if (spec.modifications > rules.size()) throw ConfigError("evolve_ruleset: more modifications than rules");
  std::vector<std::size_t> order(rules.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(spec.seed, "modify"));
  shuffle(order.begin(), order.end(), rng);
  for (std::size_t m = 0; m < spec.modifications; ++m) {
    Rule& old = rules[order[m]];
    bool done = false;
    if (!old.family.empty()) {
      // Same family, new parameters; prefer keeping the same fields.
      std::optional<Rule> fallback;
      for (int attempt = 0; attempt < 200 && !done; ++attempt) {
        Rng r2(derive_seed(spec.seed, "modify-" + old.id + "-" + std::to_string(attempt)));
        Rule cand = build(fs, old.family, old.id, r2);
        if (taken.count(signature(cand))) continue;
        if (cand.fields == old.fields) {
          taken.insert(signature(cand));
          old = std::move(cand);
          done = true;
        } else if (!fallback) {
          fallback = std::move(cand);
        }
      }
      if (!done && fallback) {
        taken.insert(signature(*fallback));
        old = std::move(*fallback);
        done = true;
      }
    }
    if (!done) old.severity = old.severity == Severity::error ? Severity::warning : Severity::error;
  }

  std::size_t next = 0;
  for (const auto& r : rules) next = std::max(next, id_number(r.id));
  for (std::size_t a = 0; a < spec.addition_arities.size(); ++a) {
    int arity = spec.addition_arities[a];
    if (arity < 1 || arity > 3) throw ConfigError("evolve_ruleset: arity must be 1, 2 or 3");
    rules.push_back(draw_unique(fs, arity, rule_id(++next), derive_seed(spec.seed, "add-" + std::to_string(a)), taken));
  }
  return RuleSet(spec.version, std::move(rules));
}

}  // namespace ccdt
