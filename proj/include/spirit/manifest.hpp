#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace spirit {

struct FileRecord {
  std::string path;
  std::string sha256;
};

// Everything needed to reproduce a run: written next to its outputs as
// <out>.manifest.json.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  nlohmann::json config;  // redacted resolved config
  std::vector<FileRecord> inputs;
  std::vector<FileRecord> outputs;
  std::map<std::string, std::string> backends;
  std::map<std::string, std::uint64_t> seeds;
  std::string version;
  std::string started_at;
  std::string finished_at;

  void add_input(const std::string& path);
  void add_output(const std::string& path);
};

inline constexpr const char* kManifestSchema = "spirit.manifest.v1";

std::string tool_version();
std::string utc_timestamp();

nlohmann::json to_json(const RunManifest& m);
// Stamps finished_at and writes the manifest as pretty JSON.
void write_manifest(RunManifest& m, const std::string& path);

}  // namespace spirit
