// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace rewritelab {

inline constexpr std::string_view kRunRecordName = "run.json";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// SHA-256 of every regular file under `dir` except run.json, keyed by
/// generic relative path.
std::map<std::string, std::string> hash_artifacts(const std::filesystem::path& dir);

struct RunRecord {
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::string config_sha256;
  std::map<std::string, std::string> artifacts;
};

/// Hashes the artifacts currently in `dir` and writes run.json there. Called
/// last, so an interrupted run leaves no record.
RunRecord write_run_record(const std::filesystem::path& dir, std::vector<std::string> argv, std::uint64_t seed,
                           nlohmann::json config);
RunRecord read_run_record(const std::filesystem::path& path);

}  // namespace rewritelab
