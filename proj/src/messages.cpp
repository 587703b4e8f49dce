#include <cmath>

#include "ccdt/dates.hpp"
#include "ccdt/error.hpp"
#include "ccdt/random.hpp"
#include "ccdt/schema.hpp"

namespace ccdt {

namespace {

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

FieldValue random_value(const FieldSpec& f, Rng& rng) {
  switch (f.kind) {
    case FieldKind::categorical: return f.domain[uniform_index(rng, f.domain.size())];
    case FieldKind::numerical:
      if (f.integer) {
        auto lo = static_cast<long long>(std::ceil(f.min));
        auto hi = static_cast<long long>(std::floor(f.max));
        return static_cast<double>(lo + static_cast<long long>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1))));
      }
      return uniform_real(rng, f.min, f.max);
    case FieldKind::textual: {
      if (f.is_date) {
        int lo = *parse_iso_date(f.date_min);
        int hi = *parse_iso_date(f.date_max);
        return format_iso_date(lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1))));
      }
      std::string s(f.max_len, ' ');
      for (auto& c : s) c = kAlphabet[uniform_index(rng, kAlphabet.size())];
      return s;
    }
  }
  return std::string{};
}

}  // namespace

Dataset generate_messages(SchemaPtr schema, std::size_t count, std::uint64_t seed, double violation_rate,
                          const RecipeBook& recipes) {
  if (count == 0) throw ConfigError("generate_messages: count must be >= 1");
  if (!(violation_rate >= 0.0 && violation_rate <= 1.0))
    throw ConfigError("generate_messages: violation_rate must lie in [0, 1]");

  std::vector<std::size_t> usable;
  for (std::size_t r = 0; r < recipes.size(); ++r)
    if (!recipes[r].empty()) usable.push_back(r);

  Rng rng(seed);
  Dataset ds{schema, {}, seed};
  ds.messages.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    CancerMessage msg;
    msg.values.reserve(schema->nv());
    for (const auto& f : schema->fields()) msg.values.push_back(random_value(f, rng));
    if (!usable.empty() && bernoulli(rng, violation_rate)) {
      const auto& options = recipes[usable[uniform_index(rng, usable.size())]];
      const auto& recipe = options[uniform_index(rng, options.size())];
      for (const auto& [name, value] : recipe) {
        auto idx = schema->index_of(name);
        if (!idx) throw SchemaError("recipe references unknown field '" + name + "'");
        msg.values[*idx] = value;
      }
    }
    check_message(*schema, msg);
    ds.messages.push_back(std::move(msg));
  }
  return ds;
}

}  // namespace ccdt
