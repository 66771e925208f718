#include "spirit/scripted.hpp"

#include <set>

#include "json.hpp"
#include "spirit/errors.hpp"
#include "spirit/hash.hpp"
#include "spirit/text.hpp"

namespace spirit {

using nlohmann::json;

ScriptedBackend::ScriptedBackend(std::string name) : name_(std::move(name)) {}

void ScriptedBackend::add_score(std::optional<std::string> prompt, std::string continuation,
                                std::vector<double> logprobs, std::vector<std::string> tokens) {
  if (logprobs.empty()) throw Error(ErrorCode::invalid_input, "scripted score needs logprobs");
  if (!tokens.empty() && tokens.size() != logprobs.size()) {
    throw Error(ErrorCode::invalid_input, "scripted tokens and logprobs differ in length");
  }
  ScoreEntry e{std::move(logprobs), std::move(tokens)};
  if (prompt) {
    exact_scores_[{std::move(*prompt), std::move(continuation)}] = std::move(e);
  } else {
    any_prompt_scores_[std::move(continuation)] = std::move(e);
  }
}

void ScriptedBackend::add_reply(std::string prompt, std::string reply) {
  replies_[std::move(prompt)] = {std::move(reply), {}};
}

void ScriptedBackend::add_reply_by_hash(std::string prompt_sha256, std::string reply) {
  hashed_replies_[std::move(prompt_sha256)] = {std::move(reply), {}};
}

void ScriptedBackend::add_failure(std::string prompt, std::string message) {
  replies_[std::move(prompt)] = {std::nullopt, std::move(message)};
}

ScoreResult ScriptedBackend::score(std::string_view prompt, std::string_view continuation) const {
  const ScoreEntry* entry = nullptr;
  if (auto it = exact_scores_.find({std::string(prompt), std::string(continuation)});
      it != exact_scores_.end()) {
    entry = &it->second;
  } else if (auto jt = any_prompt_scores_.find(std::string(continuation));
             jt != any_prompt_scores_.end()) {
    entry = &jt->second;
  }
  if (!entry) {
    if (text::trim(continuation).empty()) {
      throw Error(ErrorCode::empty_continuation, "continuation has no tokens");
    }
    throw Error(ErrorCode::script_miss, "no scripted score for continuation '" +
                                            std::string(continuation.substr(0, 80)) + "'");
  }
  ScoreResult r;
  r.prompt_echo = std::string(prompt);
  r.backend_id = id();
  std::vector<std::string> toks = entry->tokens;
  if (toks.empty()) {
    toks = text::split_whitespace(continuation);
    if (toks.size() != entry->logprobs.size()) {
      toks.clear();
      for (std::size_t i = 0; i < entry->logprobs.size(); ++i) toks.push_back("<t" + std::to_string(i) + ">");
    }
  }
  for (std::size_t i = 0; i < toks.size(); ++i) r.tokens.push_back({toks[i], entry->logprobs[i]});
  return r;
}

std::string ScriptedBackend::generate(std::string_view prompt, const GenParams&) const {
  const ReplyEntry* entry = nullptr;
  if (auto it = replies_.find(std::string(prompt)); it != replies_.end()) {
    entry = &it->second;
  } else if (auto jt = hashed_replies_.find(sha256_hex(prompt)); jt != hashed_replies_.end()) {
    entry = &jt->second;
  }
  if (!entry) {
    throw Error(ErrorCode::script_miss, "no scripted reply for prompt sha256 " + sha256_hex(prompt));
  }
  if (!entry->reply) throw Error(ErrorCode::backend_error, entry->error);
  return *entry->reply;
}

ScriptedBackend ScriptedBackend::parse(std::string_view fixtures, std::string name) {
  ScriptedBackend b(std::move(name));
  const auto lines = text::split_lines(fixtures);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const std::size_t line_no = i + 1;
    json rec;
    try {
      rec = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed fixture: ") + e.what());
    }
    try {
      const std::string kind = rec.at("kind").get<std::string>();
      if (kind == "score") {
        std::optional<std::string> prompt;
        if (rec.contains("prompt")) prompt = rec["prompt"].get<std::string>();
        std::vector<std::string> tokens;
        if (rec.contains("tokens")) tokens = rec["tokens"].get<std::vector<std::string>>();
        b.add_score(prompt, rec.at("continuation").get<std::string>(),
                    rec.at("logprobs").get<std::vector<double>>(), tokens);
      } else if (kind == "generate") {
        if (rec.contains("error")) {
          b.add_failure(rec.at("prompt").get<std::string>(), rec["error"].get<std::string>());
        } else if (rec.contains("prompt_sha256")) {
          b.add_reply_by_hash(rec["prompt_sha256"].get<std::string>(), rec.at("reply").get<std::string>());
        } else {
          b.add_reply(rec.at("prompt").get<std::string>(), rec.at("reply").get<std::string>());
        }
      } else {
        throw ParseError(line_no, "unknown fixture kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("bad fixture: ") + e.what());
    }
  }
  return b;
}

ScriptedBackend ScriptedBackend::load(const std::string& path) {
  return parse(text::read_file(path), sha256_file(path).substr(0, 12));
}

std::string RecordingGenerator::generate(std::string_view prompt, const GenParams& params) const {
  std::string reply = inner_.generate(prompt, params);
  std::lock_guard lock(mu_);
  records_.emplace_back(std::string(prompt), reply);
  return reply;
}

std::string RecordingGenerator::fixtures_jsonl() const {
  std::lock_guard lock(mu_);
  std::string out;
  std::set<std::string> seen;
  for (const auto& [prompt, reply] : records_) {
    if (!seen.insert(prompt).second) continue;
    json rec{{"kind", "generate"}, {"prompt", prompt}, {"reply", reply}};
    out += rec.dump() + "\n";
  }
  return out;
}

}  // namespace spirit
