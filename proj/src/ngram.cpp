#include "spirit/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "spirit/errors.hpp"
#include "spirit/hash.hpp"
#include "spirit/text.hpp"

namespace spirit {

std::string NgramOracle::context_key(std::span<const std::string> context) {
  std::string key;
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i) key += '\x1f';
    key += context[i];
  }
  return key;
}

void NgramOracle::finalize() {
  std::sort(vocab_.begin(), vocab_.end());
  vocab_.erase(std::unique(vocab_.begin(), vocab_.end()), vocab_.end());
  has_unk_ = std::binary_search(vocab_.begin(), vocab_.end(), std::string(kUnk));
  has_eos_ = std::binary_search(vocab_.begin(), vocab_.end(), std::string(kEos));
  id_ = "ngram:" + sha256_hex(serialize()).substr(0, 12);
}

NgramOracle NgramOracle::train(const std::vector<std::string>& documents, const NgramOptions& opts) {
  if (opts.order < 1) throw Error(ErrorCode::config_error, "n-gram order must be >= 1");
  if (!(opts.alpha > 0.0)) throw Error(ErrorCode::config_error, "smoothing alpha must be > 0");
  NgramOracle m;
  m.order_ = opts.order;
  m.alpha_ = opts.alpha;
  std::set<std::string> vocab;
  if (opts.add_unk) vocab.insert(std::string(kUnk));
  const std::size_t ctx_len = static_cast<std::size_t>(opts.order - 1);
  for (const auto& doc : documents) {
    auto toks = text::split_whitespace(doc);
    if (opts.end_token) toks.emplace_back(kEos);
    std::vector<std::string> history(ctx_len, std::string(kBos));
    for (const auto& t : toks) {
      vocab.insert(t);
      std::span<const std::string> ctx(history.data() + history.size() - ctx_len, ctx_len);
      auto& c = m.counts_[context_key(ctx)];
      ++c.next[t];
      ++c.total;
      history.push_back(t);
    }
  }
  vocab.erase(std::string(kBos));
  m.vocab_.assign(vocab.begin(), vocab.end());
  if (m.vocab_.empty()) throw Error(ErrorCode::invalid_input, "n-gram training corpus is empty");
  m.finalize();
  return m;
}

NgramOracle NgramOracle::parse(std::string_view counts_text) {
  NgramOracle m;
  bool have_order = false, have_alpha = false, have_vocab = false;
  const auto lines = text::split_lines(counts_text);
  std::vector<std::tuple<std::size_t, std::vector<std::string>, std::uint64_t>> pending;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    auto t = text::trim(lines[i]);
    if (t.empty() || t.front() == '#') continue;
    auto f = text::split_whitespace(t);
    const auto& kw = f[0];
    try {
      if (kw == "order" && f.size() == 2) {
        m.order_ = std::stoi(f[1]);
        if (m.order_ < 1) throw ParseError(line_no, "order must be >= 1");
        have_order = true;
      } else if (kw == "alpha" && f.size() == 2) {
        m.alpha_ = std::stod(f[1]);
        if (!(m.alpha_ > 0.0)) throw ParseError(line_no, "alpha must be > 0");
        have_alpha = true;
      } else if (kw == "vocab" && f.size() >= 2) {
        m.vocab_.insert(m.vocab_.end(), f.begin() + 1, f.end());
        have_vocab = true;
      } else if (kw == "count" && f.size() >= 3) {
        std::vector<std::string> toks(f.begin() + 1, f.end() - 1);
        pending.emplace_back(line_no, std::move(toks), std::stoull(f.back()));
      } else {
        throw ParseError(line_no, "unrecognized line '" + std::string(t) + "'");
      }
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "bad number in '" + std::string(t) + "'");
    }
  }
  if (!have_order || !have_alpha || !have_vocab) {
    throw ParseError(0, "counts file needs 'order', 'alpha' and 'vocab' lines");
  }
  std::set<std::string> vocab(m.vocab_.begin(), m.vocab_.end());
  if (vocab.count(std::string(kBos))) throw ParseError(0, "'<s>' cannot be in the vocabulary");
  const std::size_t ctx_len = static_cast<std::size_t>(m.order_ - 1);
  for (auto& [line_no, toks, n] : pending) {
    if (toks.size() != ctx_len + 1) {
      throw ParseError(line_no, "count line needs " + std::to_string(ctx_len) +
                                    " context token(s), a next token and a count");
    }
    if (!vocab.count(toks.back())) throw ParseError(line_no, "'" + toks.back() + "' is not in vocab");
    std::span<const std::string> ctx(toks.data(), ctx_len);
    auto& c = m.counts_[context_key(ctx)];
    c.next[toks.back()] += n;
    c.total += n;
  }
  m.finalize();
  return m;
}

NgramOracle NgramOracle::load(const std::string& path) { return parse(text::read_file(path)); }

std::string NgramOracle::serialize() const {
  std::string out = "# spirit n-gram counts v1\n";
  out += "order " + std::to_string(order_) + "\n";
  out += "alpha " + text::format_double(alpha_) + "\n";
  out += "vocab " + text::join(vocab_, " ") + "\n";
  for (const auto& [key, ctx] : counts_) {
    std::string prefix = key;
    std::replace(prefix.begin(), prefix.end(), '\x1f', ' ');
    for (const auto& [tok, n] : ctx.next) {
      out += "count ";
      if (!prefix.empty()) out += prefix + " ";
      out += tok + " " + std::to_string(n) + "\n";
    }
  }
  return out;
}

void NgramOracle::save(const std::string& path) const { text::write_file(path, serialize()); }

std::string NgramOracle::map_token(std::string_view token, bool predicted) const {
  std::string t(token);
  if (t == kBos && !predicted) return t;
  if (std::binary_search(vocab_.begin(), vocab_.end(), t)) return t;
  if (has_unk_) return std::string(kUnk);
  if (predicted) throw Error(ErrorCode::out_of_vocabulary, "token '" + t + "' is not in the vocabulary");
  return t;
}

double NgramOracle::prob(std::span<const std::string> context, std::string_view token) const {
  const std::size_t ctx_len = static_cast<std::size_t>(order_ - 1);
  if (context.size() != ctx_len) {
    throw Error(ErrorCode::invalid_input, "context must hold " + std::to_string(ctx_len) + " tokens");
  }
  std::vector<std::string> mapped;
  mapped.reserve(ctx_len);
  for (const auto& c : context) mapped.push_back(map_token(c, false));
  const std::string tok = map_token(token, true);
  const double v = static_cast<double>(vocab_.size());
  std::uint64_t num = 0, den = 0;
  if (auto it = counts_.find(context_key(mapped)); it != counts_.end()) {
    den = it->second.total;
    if (auto jt = it->second.next.find(tok); jt != it->second.next.end()) num = jt->second;
  }
  return (static_cast<double>(num) + alpha_) / (static_cast<double>(den) + alpha_ * v);
}

std::vector<std::string> NgramOracle::initial_history(std::string_view prompt) const {
  std::vector<std::string> history(static_cast<std::size_t>(order_ - 1), std::string(kBos));
  for (auto& t : text::split_whitespace(prompt)) history.push_back(std::move(t));
  return history;
}

ScoreResult NgramOracle::score(std::string_view prompt, std::string_view continuation) const {
  const auto cont = text::split_whitespace(continuation);
  if (cont.empty()) throw Error(ErrorCode::empty_continuation, "continuation has no tokens");
  const std::size_t ctx_len = static_cast<std::size_t>(order_ - 1);
  auto history = initial_history(prompt);
  ScoreResult r;
  r.prompt_echo = std::string(prompt);
  r.backend_id = id_;
  r.tokens.reserve(cont.size());
  for (const auto& t : cont) {
    std::span<const std::string> ctx(history.data() + history.size() - ctx_len, ctx_len);
    r.tokens.push_back({t, std::log(prob(ctx, t))});
    history.push_back(t);
  }
  return r;
}

std::optional<std::vector<std::string>> NgramOracle::tokenize(std::string_view text) const {
  return text::split_whitespace(text);
}

std::string NgramOracle::generate(std::string_view prompt, const GenParams& params) const {
  const std::size_t ctx_len = static_cast<std::size_t>(order_ - 1);
  auto history = initial_history(prompt);
  std::string out;
  for (int n = 0; n < params.max_tokens; ++n) {
    std::span<const std::string> ctx(history.data() + history.size() - ctx_len, ctx_len);
    const std::string* best = nullptr;
    double best_p = -1.0;
    for (const auto& v : vocab_) {
      if (v == kUnk) continue;
      const double p = prob(ctx, v);
      if (p > best_p) {
        best_p = p;
        best = &v;
      }
    }
    if (!best || *best == kEos) break;
    if (!out.empty()) out += ' ';
    out += *best;
    history.push_back(*best);
    const std::string cut = apply_stop(out, params.stop);
    if (cut.size() != out.size()) {
      out = std::string(text::trim(cut));
      break;
    }
  }
  return out;
}

}  // namespace spirit
