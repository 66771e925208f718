#include "spirit/manifest.hpp"

#include <chrono>
#include <ctime>

#include "spirit/hash.hpp"
#include "spirit/text.hpp"

#ifndef SPIRIT_VERSION
#define SPIRIT_VERSION "dev"
#endif

namespace spirit {

void RunManifest::add_input(const std::string& path) { inputs.push_back({path, sha256_file(path)}); }
void RunManifest::add_output(const std::string& path) { outputs.push_back({path, sha256_file(path)}); }

std::string tool_version() { return SPIRIT_VERSION; }

std::string utc_timestamp() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json to_json(const RunManifest& m) {
  auto files = [](const std::vector<FileRecord>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& f : v) out.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return out;
  };
  return {{"schema", kManifestSchema},
          {"command", m.command},
          {"args", m.args},
          {"config", m.config},
          {"inputs", files(m.inputs)},
          {"outputs", files(m.outputs)},
          {"backends", m.backends},
          {"seeds", m.seeds},
          {"version", m.version},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at}};
}

void write_manifest(RunManifest& m, const std::string& path) {
  m.finished_at = utc_timestamp();
  text::write_file(path, to_json(m).dump(2) + "\n");
}

}  // namespace spirit
