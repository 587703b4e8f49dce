#include "ccdt/query_client.hpp"

#include <httplib.h>

#include "ccdt/error.hpp"

namespace ccdt {

QueryClient QueryClient::in_process(RuleSet rules) {
  QueryClient c;
  c.rules_ = std::make_shared<const RuleSet>(std::move(rules));
  return c;
}

QueryClient QueryClient::http(std::string url, int retries, std::size_t chunk) {
  if (url.empty()) throw ConfigError("empty service URL");
  if (chunk == 0) throw ConfigError("chunk size must be positive");
  QueryClient c;
  c.url_ = std::move(url);
  c.retries_ = retries;
  c.chunk_ = chunk;
  return c;
}

LabelledDataset QueryClient::query(const Dataset& messages) {
  LabelledDataset out = url_.empty() ? validate_batch(messages, *rules_) : query_http(messages);
  counter_->fetch_add(messages.size());
  return out;
}

LabelledDataset QueryClient::query_http(const Dataset& messages) {
  httplib::Client client(url_);
  client.set_connection_timeout(5);
  client.set_read_timeout(120);
  LabelledDataset out{messages, {}, {}};
  out.labels.reserve(messages.size());
  for (std::size_t start = 0; start < messages.size(); start += chunk_) {
    const std::size_t end = std::min(messages.size(), start + chunk_);
    Json body;
    body["messages"] = Json::array();
    for (std::size_t i = start; i < end; ++i) body["messages"].push_back(message_to_json(*messages.schema, messages.messages[i]));
    const std::string payload = body.dump();

    httplib::Result res{nullptr, httplib::Error::Unknown};
    for (int attempt = 0; attempt <= retries_; ++attempt) {
      res = client.Post("/validate-batch", payload, "application/json");
      if (res) break;
    }
    if (!res) throw TransportError("POST " + url_ + "/validate-batch failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      std::string what = res->body;
      try {
        what = Json::parse(res->body).at("error").get<std::string>();
      } catch (...) {
      }
      throw FormatError("service rejected batch (HTTP " + std::to_string(res->status) + "): " + what);
    }
    try {
      auto doc = Json::parse(res->body);
      const auto& results = doc.at("results");
      if (results.size() != end - start) throw FormatError("service returned the wrong number of results");
      for (const auto& row : results) {
        std::vector<std::string> ids;
        std::vector<ResultCode> codes;
        for (const auto& r : row) {
          ids.push_back(r.at("rule_id").get<std::string>());
          codes.push_back(parse_result_code(r.at("code").get<std::string>()));
        }
        if (out.rule_ids.empty() && out.labels.empty()) out.rule_ids = ids;
        if (ids != out.rule_ids) throw FormatError("service changed its rule ids between messages");
        out.labels.push_back(std::move(codes));
      }
    } catch (const Json::exception& e) {
      throw FormatError(std::string("malformed service response: ") + e.what());
    }
  }
  return out;
}

}  // namespace ccdt
