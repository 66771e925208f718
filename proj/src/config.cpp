#include "spirit/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

#include "spirit/errors.hpp"
#include "spirit/text.hpp"

namespace spirit {

namespace {

bool is_secret(const std::string& key) { return key == "scoring_token" || key == "gen_token"; }

[[noreturn]] void bad(const std::string& key, const std::string& value, std::string_view want) {
  throw Error(ErrorCode::config_error,
              "invalid value '" + value + "' for " + key + " (expected " + std::string(want) + ")");
}

double as_double(const StringMap& m, const std::string& key) {
  const std::string& v = m.at(key);
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad(key, v, "a number");
  return out;
}

std::uint64_t as_uint(const StringMap& m, const std::string& key) {
  const std::string& v = m.at(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

bool as_bool(const StringMap& m, const std::string& key) {
  const std::string v = text::to_lower(m.at(key));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, m.at(key), "true or false");
}

std::optional<std::string> opt(const StringMap& m, const std::string& key) {
  const std::string& v = m.at(key);
  if (v.empty()) return std::nullopt;
  return v;
}

}  // namespace

const std::map<std::string, std::string>& config_defaults() {
  static const std::map<std::string, std::string> d = {
      {"t1", "1.0"},
      {"t2", "1.2"},
      {"strategy", "min_ppl"},
      {"merge_policy", "standard"},
      {"disable_t1", "false"},
      {"min_steps", "1"},
      {"seed", "0"},
      {"skip_first_token", "true"},
      {"recompute_orig", "false"},
      {"score_answer_line", "true"},
      {"append_answer_suffix", "false"},
      {"target_steps", ""},
      {"max_removals", ""},
      {"ppl_stop_ratio", ""},
      {"fs_strategy", "min_ppl"},
      {"fs_merge", "true"},
      {"calib_size", "32"},
      {"max_tokens", "512"},
      {"stop", "Q:"},
      {"segment", "newline"},
      {"parallelism", "1"},
      {"strict", "false"},
      {"scoring_url", ""},
      {"scoring_token", ""},
      {"gen_url", ""},
      {"gen_token", ""},
      {"model", ""},
      {"echo_mode", "false"},
      {"retries", "3"},
      {"timeout_s", "60"},
      {"verify_repeats", "0"},
      {"cache_dir", ""},
  };
  return d;
}

const std::map<std::string, std::string>& config_env_vars() {
  static const std::map<std::string, std::string> e = {
      {"SPIRIT_SCORING_URL", "scoring_url"},
      {"SPIRIT_SCORING_TOKEN", "scoring_token"},
      {"SPIRIT_GEN_URL", "gen_url"},
      {"SPIRIT_GEN_TOKEN", "gen_token"},
      {"SPIRIT_CACHE_DIR", "cache_dir"},
  };
  return e;
}

StringMap parse_config_text(std::string_view text) {
  StringMap out;
  std::size_t line_no = 0;
  for (const auto& raw : text::split_lines(text)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::config_error,
                  "config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(text::trim(line.substr(0, eq)));
    std::replace(key.begin(), key.end(), '-', '_');
    out[key] = std::string(text::trim(line.substr(eq + 1)));
  }
  return out;
}

StringMap current_environment() {
  StringMap out;
  for (const auto& [var, key] : config_env_vars()) {
    if (const char* v = std::getenv(var.c_str())) out[var] = v;
  }
  return out;
}

RunConfig load_config(const std::optional<std::string>& path, const StringMap& env,
                      const StringMap& flags) {
  RunConfig cfg;
  StringMap& v = cfg.values;
  for (const auto& [k, d] : config_defaults()) {
    v[k] = d;
    cfg.sources[k] = "default";
  }
  auto set = [&](const std::string& key, const std::string& value, const char* source) {
    if (!config_defaults().contains(key)) {
      throw Error(ErrorCode::config_error, std::string("unknown config key '") + key + "' from " + source);
    }
    v[key] = value;
    cfg.sources[key] = source;
  };

  if (path) {
    for (const auto& [k, val] : parse_config_text(text::read_file(*path))) {
      if (is_secret(k)) {
        throw Error(ErrorCode::config_error,
                    "config file must not contain '" + k + "'; pass secrets via the environment");
      }
      set(k, val, "file");
    }
  }
  for (const auto& [var, key] : config_env_vars()) {
    if (auto it = env.find(var); it != env.end()) set(key, it->second, "env");
  }
  for (const auto& [k, val] : flags) set(k, val, "flag");

  FtConfig& ft = cfg.ft;
  ft.t1 = as_double(v, "t1");
  ft.t2 = as_double(v, "t2");
  ft.strategy = parse_strategy(v.at("strategy"));
  ft.merge_policy = parse_merge_policy(v.at("merge_policy"));
  ft.disable_t1 = as_bool(v, "disable_t1");
  ft.min_steps = as_uint(v, "min_steps");
  ft.seed = as_uint(v, "seed");
  ft.ppl.skip_first_token = as_bool(v, "skip_first_token");
  ft.recompute_orig = as_bool(v, "recompute_orig");
  ft.score_answer_line = as_bool(v, "score_answer_line");
  validate(ft);
  cfg.append_answer_suffix = as_bool(v, "append_answer_suffix");

  FsConfig& fs = cfg.fs;
  if (opt(v, "target_steps")) fs.target_steps = as_uint(v, "target_steps");
  if (opt(v, "max_removals")) fs.max_removals = as_uint(v, "max_removals");
  if (opt(v, "ppl_stop_ratio")) fs.ppl_stop_ratio = as_double(v, "ppl_stop_ratio");
  const int stops = int(fs.target_steps.has_value()) + int(fs.max_removals.has_value()) +
                    int(fs.ppl_stop_ratio.has_value());
  if (stops > 1) {
    throw Error(ErrorCode::config_error,
                "conflicting stop criteria: set only one of target_steps, max_removals, ppl_stop_ratio");
  }
  if (fs.target_steps && *fs.target_steps < 1) throw Error(ErrorCode::config_error, "target_steps must be >= 1");
  fs.strategy = parse_fs_strategy(v.at("fs_strategy"));
  fs.merge_policy = as_bool(v, "fs_merge") ? FsMergePolicy::merge : FsMergePolicy::remove_only;
  fs.seed = ft.seed;
  fs.ppl = ft.ppl;
  fs.gen.max_tokens = static_cast<int>(as_uint(v, "max_tokens"));
  fs.gen.stop.clear();
  for (auto& s : text::split_whitespace(v.at("stop"))) fs.gen.stop.push_back(s);

  cfg.calib_size = as_uint(v, "calib_size");
  if (cfg.calib_size == 0) throw Error(ErrorCode::config_error, "calib_size must be >= 1");
  try {
    cfg.segment = parse_segment_mode(v.at("segment"));
  } catch (const Error&) {
    bad("segment", v.at("segment"), "newline or sentence");
  }
  cfg.parallelism = as_uint(v, "parallelism");
  if (cfg.parallelism == 0) throw Error(ErrorCode::config_error, "parallelism must be >= 1");
  cfg.strict = as_bool(v, "strict");
  fs.strict = cfg.strict;
  fs.parallelism = cfg.parallelism;

  HttpBackendConfig& h = cfg.http;
  h.scoring = {v.at("scoring_url"), v.at("scoring_token")};
  h.generation = {v.at("gen_url"), v.at("gen_token")};
  h.model = v.at("model");
  h.echo_mode = as_bool(v, "echo_mode");
  h.retries = static_cast<int>(as_uint(v, "retries"));
  h.timeout_s = static_cast<int>(as_uint(v, "timeout_s"));
  h.verify_repeats = static_cast<int>(as_uint(v, "verify_repeats"));
  cfg.cache_dir = v.at("cache_dir");
  return cfg;
}

nlohmann::json redacted_json(const RunConfig& cfg) {
  nlohmann::json values = nlohmann::json::object();
  for (const auto& [k, val] : cfg.values) {
    values[k] = is_secret(k) && !val.empty() ? "<redacted>" : val;
  }
  return {{"values", values}, {"sources", cfg.sources}};
}

}  // namespace spirit
