#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "spirit/scoring.hpp"

namespace spirit {

// Content-addressed store for score and generation results. Entries are kept
// in memory and, when opened on a directory, appended to
// <dir>/scores.jsonl and <dir>/generations.jsonl. Reads are concurrent,
// writes are serialized.
class ResultCache {
 public:
  static std::shared_ptr<ResultCache> open(const std::filesystem::path& dir);
  static std::shared_ptr<ResultCache> in_memory();

  static std::string score_key(std::string_view backend_id, std::string_view prompt,
                               std::string_view continuation);
  static std::string generation_key(std::string_view backend_id, std::string_view prompt,
                                    const GenParams& params);

  std::optional<ScoreResult> get_score(const std::string& key) const;
  void put_score(const std::string& key, const ScoreResult& result);
  std::optional<std::string> get_generation(const std::string& key) const;
  void put_generation(const std::string& key, const std::string& text);

  struct Stats {
    std::size_t scores = 0;
    std::size_t generations = 0;
  };
  Stats stats() const;

  // Drops every entry, including the files on disk.
  void clear();

  const std::optional<std::filesystem::path>& directory() const { return dir_; }

 private:
  ResultCache() = default;
  void load_from_disk();
  void append(std::ofstream& out, const std::string& line);

  std::optional<std::filesystem::path> dir_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, ScoreResult> scores_;
  std::unordered_map<std::string, std::string> generations_;
  std::ofstream score_log_;
  std::ofstream gen_log_;
};

class CachedScorer final : public Scorer {
 public:
  CachedScorer(const Scorer& inner, std::shared_ptr<ResultCache> cache)
      : inner_(inner), cache_(std::move(cache)) {}

  std::string id() const override { return inner_.id(); }
  ScoreResult score(std::string_view prompt, std::string_view continuation) const override;
  std::optional<std::vector<std::string>> tokenize(std::string_view text) const override {
    return inner_.tokenize(text);
  }

 private:
  const Scorer& inner_;
  std::shared_ptr<ResultCache> cache_;
};

class CachedGenerator final : public Generator {
 public:
  CachedGenerator(const Generator& inner, std::shared_ptr<ResultCache> cache)
      : inner_(inner), cache_(std::move(cache)) {}

  std::string id() const override { return inner_.id(); }
  std::string generate(std::string_view prompt, const GenParams& params) const override;

 private:
  const Generator& inner_;
  std::shared_ptr<ResultCache> cache_;
};

}  // namespace spirit
