#pragma once

#include <string>

#include "json.hpp"
#include "spirit/scoring.hpp"

namespace spirit {

struct HttpEndpoint {
  std::string url;    // http(s)://host[:port]/path
  std::string token;  // bearer token, may be empty
};

struct HttpBackendConfig {
  HttpEndpoint scoring;
  HttpEndpoint generation;
  std::string model;
  // Send prompt+continuation as one echoed text (OpenAI-style completions)
  // instead of separate prompt/continuation fields.
  bool echo_mode = false;
  int retries = 3;
  int backoff_ms = 200;
  int timeout_s = 60;
  // Re-issue each scoring request this many times and require identical
  // answers; any difference raises BackendInconsistency.
  int verify_repeats = 0;
};

// Remote scoring and generation over HTTP with JSON bodies.
//
// Scoring request:  {"model","prompt","continuation","logprobs":true,"temperature":0}
//   or in echo mode {"model","prompt":<prompt+continuation>,"echo":true,
//                    "max_tokens":0,"logprobs":1,"temperature":0}
// Scoring response: {"tokens":[{"token":..,"logprob":..},...]} covering only the
//   continuation, or an OpenAI completions body whose choices[0].logprobs has
//   tokens/token_logprobs/text_offset; entries at offsets before the end of
//   the prompt are dropped.
// Generation request:  {"model","prompt","max_tokens","temperature","stop"}
// Generation response: {"text":..} or {"choices":[{"text":..}]}
class HttpBackend final : public Scorer, public Generator {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);

  std::string id() const override;
  ScoreResult score(std::string_view prompt, std::string_view continuation) const override;
  std::string generate(std::string_view prompt, const GenParams& params) const override;

  const HttpBackendConfig& config() const { return cfg_; }

 private:
  nlohmann::json post(const HttpEndpoint& ep, const nlohmann::json& body) const;

  HttpBackendConfig cfg_;
};

// Exposed for tests.
nlohmann::json scoring_request_body(const HttpBackendConfig& cfg, std::string_view prompt,
                                    std::string_view continuation);
std::vector<TokenScore> parse_scoring_response(const nlohmann::json& body, std::size_t prompt_bytes);

}  // namespace spirit
