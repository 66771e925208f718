#pragma once

#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "spirit/corpus.hpp"
#include "spirit/http_backend.hpp"
#include "spirit/refine_fs.hpp"
#include "spirit/refine_ft.hpp"

namespace spirit {

// Every setting the command line understands, after merging
//   flags > environment > config file > defaults.
//
// Config file: one "key = value" per line; '#' starts a comment. Keys are the
// names listed by config_keys(). Tokens are only read from the environment.
struct RunConfig {
  FtConfig ft;
  FsConfig fs;
  std::size_t calib_size = kDefaultCalibrationSize;
  SegmentMode segment = SegmentMode::newline;
  std::size_t parallelism = 1;
  bool strict = false;
  bool append_answer_suffix = false;

  HttpBackendConfig http;
  std::string cache_dir;

  // Resolved string form of every key and where it came from
  // ("default", "file", "env", "flag").
  std::map<std::string, std::string> values;
  std::map<std::string, std::string> sources;
};

using StringMap = std::map<std::string, std::string>;

const std::map<std::string, std::string>& config_defaults();
// Environment variables consulted, mapped to config keys.
const std::map<std::string, std::string>& config_env_vars();

RunConfig load_config(const std::optional<std::string>& path, const StringMap& env,
                      const StringMap& flags);
StringMap parse_config_text(std::string_view text);
StringMap current_environment();

// Resolved values with secrets replaced by "<redacted>".
nlohmann::json redacted_json(const RunConfig& cfg);

}  // namespace spirit
