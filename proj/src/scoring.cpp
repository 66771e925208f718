#include "spirit/scoring.hpp"

#include <cmath>

#include "spirit/errors.hpp"
#include "spirit/text.hpp"

namespace spirit {

std::vector<double> ScoreResult::logprobs() const {
  std::vector<double> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.logprob);
  return out;
}

double perplexity(std::span<const double> logprobs, const PplConfig& cfg) {
  const std::size_t skip = cfg.skip_first_token ? 1 : 0;
  if (logprobs.size() < skip + 1) {
    throw Error(ErrorCode::insufficient_tokens,
                "perplexity needs at least " + std::to_string(skip + 1) + " token(s), got " +
                    std::to_string(logprobs.size()));
  }
  double sum = 0.0;
  for (std::size_t i = skip; i < logprobs.size(); ++i) sum += logprobs[i];
  const double n = static_cast<double>(logprobs.size() - skip);
  return std::exp(-sum / n);
}

double perplexity(const ScoreResult& result, const PplConfig& cfg) {
  const auto lp = result.logprobs();
  return perplexity(std::span<const double>(lp), cfg);
}

std::string_view to_string(TokenSource src) {
  return src == TokenSource::backend ? "backend" : "whitespace";
}

TokenSource parse_token_source(std::string_view s) {
  if (s == "backend") return TokenSource::backend;
  if (s == "whitespace") return TokenSource::whitespace;
  throw Error(ErrorCode::parse_error, "unknown token source '" + std::string(s) + "'");
}

TokenCount count_tokens(std::string_view text, const Scorer* backend) {
  if (backend) {
    if (auto toks = backend->tokenize(text)) return {toks->size(), TokenSource::backend};
  }
  return {text::split_whitespace(text).size(), TokenSource::whitespace};
}

std::string apply_stop(std::string text, const std::vector<std::string>& stop) {
  std::size_t cut = std::string::npos;
  for (const auto& s : stop) {
    if (s.empty()) continue;
    cut = std::min(cut, text.find(s));
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

}  // namespace spirit
