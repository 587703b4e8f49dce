#pragma once

#include <string>

#include <json.hpp>

#include "ccdt/error.hpp"

namespace ccdt {

// Insertion-ordered JSON keeps files, reports and label columns in the order
// they were written.
using Json = nlohmann::ordered_json;

/// Throws ConfigError if `doc` has a key that `known` (usually the defaults
/// serialized) lacks, so misspelled config keys do not pass silently.
inline void reject_unknown_keys(const Json& doc, const Json& known, const std::string& where) {
  if (!doc.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!known.contains(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

}  // namespace ccdt
