#include "spirit/cache.hpp"

#include <mutex>

#include "json.hpp"
#include "spirit/errors.hpp"
#include "spirit/hash.hpp"
#include "spirit/text.hpp"

namespace spirit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {
constexpr const char* kScoreFile = "scores.jsonl";
constexpr const char* kGenFile = "generations.jsonl";

std::string keyed(std::initializer_list<std::string_view> parts) {
  std::string blob;
  for (auto p : parts) {
    blob.append(p);
    blob.push_back('\0');
  }
  return sha256_hex(blob);
}
}  // namespace

std::shared_ptr<ResultCache> ResultCache::in_memory() {
  return std::shared_ptr<ResultCache>(new ResultCache());
}

std::shared_ptr<ResultCache> ResultCache::open(const fs::path& dir) {
  std::shared_ptr<ResultCache> c(new ResultCache());
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create cache directory " + dir.string());
  c->dir_ = dir;
  c->load_from_disk();
  c->score_log_.open(dir / kScoreFile, std::ios::app | std::ios::binary);
  c->gen_log_.open(dir / kGenFile, std::ios::app | std::ios::binary);
  if (!c->score_log_ || !c->gen_log_) throw Error(ErrorCode::io_error, "cannot open cache files in " + dir.string());
  return c;
}

void ResultCache::load_from_disk() {
  // Partially written trailing lines are skipped.
  if (fs::exists(*dir_ / kScoreFile)) {
    for (const auto& line : text::split_lines(text::read_file((*dir_ / kScoreFile).string()))) {
      if (line.empty()) continue;
      try {
        auto j = json::parse(line);
        ScoreResult r;
        r.backend_id = j.at("backend_id").get<std::string>();
        r.prompt_echo = j.at("prompt_echo").get<std::string>();
        for (const auto& t : j.at("tokens")) r.tokens.push_back({t.at(0).get<std::string>(), t.at(1).get<double>()});
        scores_[j.at("key").get<std::string>()] = std::move(r);
      } catch (const json::exception&) {
      }
    }
  }
  if (fs::exists(*dir_ / kGenFile)) {
    for (const auto& line : text::split_lines(text::read_file((*dir_ / kGenFile).string()))) {
      if (line.empty()) continue;
      try {
        auto j = json::parse(line);
        generations_[j.at("key").get<std::string>()] = j.at("text").get<std::string>();
      } catch (const json::exception&) {
      }
    }
  }
}

std::string ResultCache::score_key(std::string_view backend_id, std::string_view prompt,
                                   std::string_view continuation) {
  return keyed({"score", backend_id, prompt, continuation});
}

std::string ResultCache::generation_key(std::string_view backend_id, std::string_view prompt,
                                        const GenParams& params) {
  std::string p = std::to_string(params.max_tokens) + "|" + text::format_double(params.temperature);
  for (const auto& s : params.stop) p += "|" + s;
  return keyed({"generate", backend_id, prompt, p});
}

std::optional<ScoreResult> ResultCache::get_score(const std::string& key) const {
  std::shared_lock lock(mu_);
  if (auto it = scores_.find(key); it != scores_.end()) return it->second;
  return std::nullopt;
}

void ResultCache::append(std::ofstream& out, const std::string& line) {
  if (!out.is_open()) return;
  out << line << '\n';
  out.flush();
}

void ResultCache::put_score(const std::string& key, const ScoreResult& result) {
  std::unique_lock lock(mu_);
  if (!scores_.emplace(key, result).second) return;
  json toks = json::array();
  for (const auto& t : result.tokens) toks.push_back(json::array({t.token, t.logprob}));
  append(score_log_, json{{"key", key},
                          {"backend_id", result.backend_id},
                          {"prompt_echo", result.prompt_echo},
                          {"tokens", toks}}
                         .dump());
}

std::optional<std::string> ResultCache::get_generation(const std::string& key) const {
  std::shared_lock lock(mu_);
  if (auto it = generations_.find(key); it != generations_.end()) return it->second;
  return std::nullopt;
}

void ResultCache::put_generation(const std::string& key, const std::string& text) {
  std::unique_lock lock(mu_);
  if (!generations_.emplace(key, text).second) return;
  append(gen_log_, json{{"key", key}, {"text", text}}.dump());
}

ResultCache::Stats ResultCache::stats() const {
  std::shared_lock lock(mu_);
  return {scores_.size(), generations_.size()};
}

void ResultCache::clear() {
  std::unique_lock lock(mu_);
  scores_.clear();
  generations_.clear();
  if (dir_) {
    score_log_.close();
    gen_log_.close();
    score_log_.open(*dir_ / kScoreFile, std::ios::trunc | std::ios::binary);
    gen_log_.open(*dir_ / kGenFile, std::ios::trunc | std::ios::binary);
  }
}

ScoreResult CachedScorer::score(std::string_view prompt, std::string_view continuation) const {
  const std::string key = ResultCache::score_key(inner_.id(), prompt, continuation);
  if (auto hit = cache_->get_score(key)) return *hit;
  ScoreResult r = inner_.score(prompt, continuation);
  cache_->put_score(key, r);
  return r;
}

std::string CachedGenerator::generate(std::string_view prompt, const GenParams& params) const {
  const std::string key = ResultCache::generation_key(inner_.id(), prompt, params);
  if (auto hit = cache_->get_generation(key)) return *hit;
  std::string text = inner_.generate(prompt, params);
  cache_->put_generation(key, text);
  return text;
}

}  // namespace spirit
