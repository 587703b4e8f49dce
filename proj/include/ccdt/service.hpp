#pragma once

#include <memory>
#include <string>

#include "ccdt/json.hpp"
#include "ccdt/rules.hpp"
#include "ccdt/schema.hpp"

namespace ccdt {

/// JSON-over-HTTP validation service for one rule-set version.
///   GET  /version          -> {"version", "rule_ids"}
///   POST /validate         body: message object -> {"results": [{"rule_id", "code"}...]}
///   POST /validate-batch   body: {"messages": [...]} -> {"results": [[...], ...]}
/// Malformed requests get 400 with {"error": "..."}.
class ValidationService {
 public:
  ValidationService(SchemaPtr schema, RuleSet rules);
  ~ValidationService();
  ValidationService(const ValidationService&) = delete;
  ValidationService& operator=(const ValidationService&) = delete;

  /// Binds `host:port` (port 0 picks a free port) and returns the bound port.
  /// Throws ConfigError on bind failure.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called. Call after bind().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Request handlers without the transport; return (status, body).
std::pair<int, Json> handle_validate(const MessageSchema& schema, const RuleSet& rules, const std::string& body);
std::pair<int, Json> handle_validate_batch(const MessageSchema& schema, const RuleSet& rules, const std::string& body);
Json version_info(const RuleSet& rules);

}  // namespace ccdt
