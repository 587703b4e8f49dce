#pragma once

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#include "ccdt/schema.hpp"

namespace ccdt::test {

/// A typical registry record plus the extra "basis" field.
inline CancerMessage sample_message(const MessageSchema& schema) {
  Json j = {{"gender", "M"},           {"topography", "809"},          {"morphology", "405"},
            {"basis", "1"},            {"chemotherapy", 3},            {"birth_date", "2000-01-01"},
            {"diagnosis_date", "2019-07-09"}, {"ct", "gvEQyqbV46"}, {"message_version", "tNJP2eAMEd"}};
  return message_from_json(schema, j);
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("ccdt_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace ccdt::test
