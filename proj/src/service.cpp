#include "ccdt/service.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "ccdt/error.hpp"

namespace ccdt {

namespace {

Json report_json(const ValidationReport& r) {
  Json out = Json::array();
  for (std::size_t i = 0; i < r.rule_ids.size(); ++i)
    out.push_back({{"rule_id", r.rule_ids[i]}, {"code", std::string(to_string(r.codes[i]))}});
  return out;
}

Json error_body(const std::string& what) { return Json{{"error", what}}; }

}  // namespace

Json version_info(const RuleSet& rules) { return Json{{"version", rules.version()}, {"rule_ids", rules.ids()}}; }

std::pair<int, Json> handle_validate(const MessageSchema& schema, const RuleSet& rules, const std::string& body) {
  try {
    auto doc = Json::parse(body);
    auto msg = message_from_json(schema, doc, "request");
    return {200, Json{{"results", report_json(validate(schema, msg, rules))}}};
  } catch (const Json::exception& e) {
    return {400, error_body(std::string("malformed JSON: ") + e.what())};
  } catch (const Error& e) {
    return {400, error_body(e.what())};
  }
}

std::pair<int, Json> handle_validate_batch(const MessageSchema& schema, const RuleSet& rules,
                                           const std::string& body) {
  try {
    auto doc = Json::parse(body);
    if (!doc.is_object() || !doc.contains("messages") || !doc["messages"].is_array())
      return {400, error_body("expected {\"messages\": [...]}")};
    Json results = Json::array();
    std::size_t i = 0;
    for (const auto& m : doc["messages"]) {
      auto msg = message_from_json(schema, m, "message " + std::to_string(i++));
      results.push_back(report_json(validate(schema, msg, rules)));
    }
    return {200, Json{{"results", std::move(results)}}};
  } catch (const Json::exception& e) {
    return {400, error_body(std::string("malformed JSON: ") + e.what())};
  } catch (const Error& e) {
    return {400, error_body(e.what())};
  }
}

struct ValidationService::Impl {
  SchemaPtr schema;
  RuleSet rules;
  httplib::Server server;
  std::atomic<bool> stop_requested{false};
  std::atomic<bool> serving{false};
  bool bound = false;
  bool closed = false;
};

ValidationService::ValidationService(SchemaPtr schema, RuleSet rules) : impl_(std::make_unique<Impl>()) {
  rules.check_against(*schema);
  impl_->schema = std::move(schema);
  impl_->rules = std::move(rules);
  auto* impl = impl_.get();
  auto reply = [](httplib::Response& res, const std::pair<int, Json>& r) {
    res.status = r.first;
    res.set_content(r.second.dump(), "application/json");
  };
  impl->server.Get("/version", [impl, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, {200, version_info(impl->rules)});
  });
  impl->server.Post("/validate", [impl, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, handle_validate(*impl->schema, impl->rules, req.body));
  });
  impl->server.Post("/validate-batch", [impl, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, handle_validate_batch(*impl->schema, impl->rules, req.body));
  });
}

ValidationService::~ValidationService() { stop(); }

int ValidationService::bind(const std::string& host, int port) {
  if (port == 0) {
    int p = impl_->server.bind_to_any_port(host);
    if (p <= 0) throw ConfigError("cannot bind " + host);
    impl_->bound = true;
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  impl_->bound = true;
  return port;
}

void ValidationService::serve() {
  impl_->serving = true;
  if (!impl_->stop_requested) impl_->server.listen_after_bind();
  impl_->serving = false;
}

void ValidationService::stop() {
  if (!impl_ || impl_->closed) return;
  impl_->stop_requested = true;
  if (impl_->serving) {
    // httplib ignores stop() until its accept loop runs.
    while (impl_->serving && !impl_->server.is_running())
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    impl_->server.stop();
  } else if (impl_->bound) {
    // Bound but never served: httplib only closes the listening socket from
    // its accept loop, so run the loop briefly.
    std::thread loop([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    impl_->server.stop();
    loop.join();
  }
  impl_->closed = true;
}

}  // namespace ccdt
