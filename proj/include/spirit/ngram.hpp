#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spirit/scoring.hpp"

namespace spirit {

struct NgramOptions {
  int order = 2;
  double alpha = 1.0;
  bool add_unk = false;    // reserve "<unk>" for out-of-vocabulary tokens
  bool end_token = false;  // append "</s>" to every training document
};

// Deterministic add-alpha smoothed n-gram model over whitespace tokens:
//
//   p(v | ctx) = (count(ctx -> v) + alpha) / (count(ctx -> *) + alpha * |V|)
//
// Contexts are the previous order-1 tokens, left-padded with "<s>". Used as a
// fully reproducible stand-in for a hosted language model.
class NgramOracle final : public Scorer, public Generator {
 public:
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kEos = "</s>";

  static NgramOracle train(const std::vector<std::string>& documents, const NgramOptions& opts);

  // Plain-text counts file:
  //   order <k>
  //   alpha <a>
  //   vocab <tok> <tok> ...
  //   count <ctx_1> ... <ctx_{k-1}> <next> <n>
  // Blank lines and lines starting with '#' are ignored.
  static NgramOracle parse(std::string_view counts_text);
  static NgramOracle load(const std::string& path);
  std::string serialize() const;
  void save(const std::string& path) const;

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }

  // `context` holds exactly order-1 tokens.
  double prob(std::span<const std::string> context, std::string_view token) const;

  std::string id() const override { return id_; }
  ScoreResult score(std::string_view prompt, std::string_view continuation) const override;
  std::optional<std::vector<std::string>> tokenize(std::string_view text) const override;

  // Greedy decoding; ties go to the lexicographically smallest token. The
  // model is deterministic, so `temperature` is ignored.
  std::string generate(std::string_view prompt, const GenParams& params) const override;

 private:
  struct Context {
    std::map<std::string, std::uint64_t> next;
    std::uint64_t total = 0;
  };

  NgramOracle() = default;
  void finalize();
  std::string map_token(std::string_view token, bool predicted) const;
  std::vector<std::string> initial_history(std::string_view prompt) const;
  static std::string context_key(std::span<const std::string> context);

  int order_ = 2;
  double alpha_ = 1.0;
  std::vector<std::string> vocab_;  // sorted
  bool has_unk_ = false;
  bool has_eos_ = false;
  std::map<std::string, Context> counts_;
  std::string id_;
};

}  // namespace spirit
