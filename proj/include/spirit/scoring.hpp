#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spirit {

struct TokenScore {
  std::string token;
  double logprob = 0.0;  // natural log, <= 0

  bool operator==(const TokenScore&) const = default;
};

// Teacher-forced log-probabilities of a continuation given a prompt. Only the
// continuation's tokens are present.
struct ScoreResult {
  std::string prompt_echo;
  std::vector<TokenScore> tokens;
  std::string backend_id;

  std::vector<double> logprobs() const;
  bool operator==(const ScoreResult&) const = default;
};

struct PplConfig {
  // The first continuation token is often an outlier; it is dropped from the
  // average unless this is turned off.
  bool skip_first_token = true;
};

// exp(-mean(logprob)) over the included tokens.
double perplexity(std::span<const double> logprobs, const PplConfig& cfg = {});
double perplexity(const ScoreResult& result, const PplConfig& cfg = {});

struct GenParams {
  int max_tokens = 512;
  double temperature = 0.0;
  std::vector<std::string> stop;

  bool operator==(const GenParams&) const = default;
};

// A backend able to score a fixed continuation. Implementations must be safe
// to call concurrently.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string id() const = 0;
  virtual ScoreResult score(std::string_view prompt, std::string_view continuation) const = 0;
  // Backend tokenization, when the backend exposes one.
  virtual std::optional<std::vector<std::string>> tokenize(std::string_view) const {
    return std::nullopt;
  }
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string id() const = 0;
  virtual std::string generate(std::string_view prompt, const GenParams& params) const = 0;
};

enum class TokenSource { backend, whitespace };
std::string_view to_string(TokenSource src);
TokenSource parse_token_source(std::string_view s);

struct TokenCount {
  std::size_t count = 0;
  TokenSource source = TokenSource::whitespace;
};

// Counts with the backend tokenizer when available, else whitespace tokens.
TokenCount count_tokens(std::string_view text, const Scorer* backend);

// Cuts `text` at the earliest occurrence of any stop sequence.
std::string apply_stop(std::string text, const std::vector<std::string>& stop);

}  // namespace spirit
