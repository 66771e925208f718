#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spirit/scoring.hpp"

namespace spirit {

// Lookup-table backend for tests and offline replay. Populate it before
// sharing it across threads; lookups are read-only afterwards.
//
// Fixture file: one JSON object per line, either
//   {"kind":"score", "prompt":..., "continuation":..., "logprobs":[...], "tokens":[...]}
//   {"kind":"generate", "prompt":... | "prompt_sha256":..., "reply":...}
//   {"kind":"generate", "prompt":..., "error":"..."}
// A score entry without "prompt" matches the continuation under any prompt.
class ScriptedBackend final : public Scorer, public Generator {
 public:
  explicit ScriptedBackend(std::string name = "default");

  static ScriptedBackend parse(std::string_view fixtures, std::string name = "default");
  static ScriptedBackend load(const std::string& path);

  void add_score(std::optional<std::string> prompt, std::string continuation,
                 std::vector<double> logprobs, std::vector<std::string> tokens = {});
  void add_reply(std::string prompt, std::string reply);
  void add_reply_by_hash(std::string prompt_sha256, std::string reply);
  void add_failure(std::string prompt, std::string message = "scripted failure");

  std::string id() const override { return "scripted:" + name_; }
  ScoreResult score(std::string_view prompt, std::string_view continuation) const override;
  std::string generate(std::string_view prompt, const GenParams& params) const override;

 private:
  struct ScoreEntry {
    std::vector<double> logprobs;
    std::vector<std::string> tokens;
  };
  struct ReplyEntry {
    std::optional<std::string> reply;
    std::string error;
  };

  std::string name_;
  std::map<std::pair<std::string, std::string>, ScoreEntry> exact_scores_;
  std::map<std::string, ScoreEntry> any_prompt_scores_;
  std::map<std::string, ReplyEntry> replies_;         // keyed by prompt
  std::map<std::string, ReplyEntry> hashed_replies_;  // keyed by sha256(prompt)
};

// Wraps a generator and keeps every (prompt, reply) pair so a live run can be
// replayed later through ScriptedBackend.
class RecordingGenerator final : public Generator {
 public:
  explicit RecordingGenerator(const Generator& inner) : inner_(inner) {}

  std::string id() const override { return inner_.id(); }
  std::string generate(std::string_view prompt, const GenParams& params) const override;

  // Fixture lines in first-seen order, duplicates dropped.
  std::string fixtures_jsonl() const;

 private:
  const Generator& inner_;
  mutable std::mutex mu_;
  mutable std::vector<std::pair<std::string, std::string>> records_;
};

}  // namespace spirit
