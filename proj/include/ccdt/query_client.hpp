#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <string>

#include "ccdt/rules.hpp"
#include "ccdt/schema.hpp"

namespace ccdt {

/// Labels messages with a target rule-engine version, either in process or
/// through the HTTP service, and counts every labelled message.
class QueryClient {
 public:
  static QueryClient in_process(RuleSet rules);
  /// `url` like "http://127.0.0.1:8080". Transport failures are retried
  /// `retries` times before a TransportError escapes.
  static QueryClient http(std::string url, int retries = 3, std::size_t chunk = 500);

  /// Throws TransportError (retriable) or FormatError when the labels do not
  /// match the request.
  LabelledDataset query(const Dataset& messages);

  std::size_t count() const noexcept { return counter_->load(); }
  bool remote() const noexcept { return !url_.empty(); }

 private:
  QueryClient() = default;
  LabelledDataset query_http(const Dataset& messages);

  std::shared_ptr<const RuleSet> rules_;
  std::string url_;
  int retries_ = 3;
  std::size_t chunk_ = 500;
  std::shared_ptr<std::atomic<std::size_t>> counter_ = std::make_shared<std::atomic<std::size_t>>(0);
};

}  // namespace ccdt
