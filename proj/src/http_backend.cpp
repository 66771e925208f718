#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "spirit/http_backend.hpp"

#include <chrono>
#include <thread>

#include "spirit/errors.hpp"

namespace spirit {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorCode::config_error, "backend URL needs a scheme: '" + url + "'");
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

// Server-side failures worth retrying.
bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {}

std::string HttpBackend::id() const {
  return "http:" + cfg_.model + "@" + (cfg_.scoring.url.empty() ? cfg_.generation.url : cfg_.scoring.url);
}

json HttpBackend::post(const HttpEndpoint& ep, const json& body) const {
  if (ep.url.empty()) throw Error(ErrorCode::config_error, "backend URL is not configured");
  const auto [origin, path] = split_url(ep.url);
  httplib::Headers headers;
  if (!ep.token.empty()) headers.emplace("Authorization", "Bearer " + ep.token);
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
    }
    httplib::Client client(origin);
    client.set_connection_timeout(cfg_.timeout_s, 0);
    client.set_read_timeout(cfg_.timeout_s, 0);
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::backend_error, std::string("response is not JSON: ") + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    if (!retryable_status(res->status)) break;
  }
  throw Error(ErrorCode::backend_error, ep.url + ": " + last_error);
}

json scoring_request_body(const HttpBackendConfig& cfg, std::string_view prompt,
                          std::string_view continuation) {
  if (cfg.echo_mode) {
    return json{{"model", cfg.model},
                {"prompt", std::string(prompt) + std::string(continuation)},
                {"echo", true},
                {"max_tokens", 0},
                {"logprobs", 1},
                {"temperature", 0}};
  }
  return json{{"model", cfg.model},
              {"prompt", std::string(prompt)},
              {"continuation", std::string(continuation)},
              {"logprobs", true},
              {"temperature", 0}};
}

std::vector<TokenScore> parse_scoring_response(const json& body, std::size_t prompt_bytes) {
  std::vector<TokenScore> out;
  auto check = [](double lp) {
    if (lp > 1e-9) throw Error(ErrorCode::backend_error, "backend returned a positive logprob");
    return std::min(lp, 0.0);
  };
  try {
    if (body.contains("tokens")) {
      for (const auto& t : body.at("tokens")) {
        out.push_back({t.at("token").get<std::string>(), check(t.at("logprob").get<double>())});
      }
      return out;
    }
    const auto& lp = body.at("choices").at(0).at("logprobs");
    const auto& toks = lp.at("tokens");
    const auto& vals = lp.at("token_logprobs");
    const auto& offs = lp.at("text_offset");
    if (toks.size() != vals.size() || toks.size() != offs.size()) {
      throw Error(ErrorCode::backend_error, "logprob arrays differ in length");
    }
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (offs[i].get<std::size_t>() < prompt_bytes) continue;
      if (vals[i].is_null()) throw Error(ErrorCode::backend_error, "missing logprob for continuation token");
      out.push_back({toks[i].get<std::string>(), check(vals[i].get<double>())});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::backend_error, std::string("malformed scoring response: ") + e.what());
  }
  return out;
}

ScoreResult HttpBackend::score(std::string_view prompt, std::string_view continuation) const {
  if (continuation.empty()) throw Error(ErrorCode::empty_continuation, "continuation is empty");
  const json body = scoring_request_body(cfg_, prompt, continuation);
  const std::size_t prompt_bytes = cfg_.echo_mode ? prompt.size() : 0;
  auto tokens = parse_scoring_response(post(cfg_.scoring, body), prompt_bytes);
  for (int i = 0; i < cfg_.verify_repeats; ++i) {
    if (parse_scoring_response(post(cfg_.scoring, body), prompt_bytes) != tokens) {
      throw Error(ErrorCode::backend_inconsistency,
                  "repeated scoring request returned different logprobs");
    }
  }
  if (tokens.empty()) throw Error(ErrorCode::empty_continuation, "backend returned no continuation tokens");
  return ScoreResult{std::string(prompt), std::move(tokens), id()};
}

std::string HttpBackend::generate(std::string_view prompt, const GenParams& params) const {
  json body{{"model", cfg_.model},
            {"prompt", std::string(prompt)},
            {"max_tokens", params.max_tokens},
            {"temperature", params.temperature},
            {"stop", params.stop}};
  const json res = post(cfg_.generation, body);
  std::string text;
  try {
    if (res.contains("text")) {
      text = res.at("text").get<std::string>();
    } else {
      text = res.at("choices").at(0).at("text").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::backend_error, std::string("malformed generation response: ") + e.what());
  }
  return apply_stop(std::move(text), params.stop);
}

}  // namespace spirit
