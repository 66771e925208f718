#include "spirit/merge.hpp"

#include <cctype>

#include "spirit/answer.hpp"
#include "spirit/errors.hpp"
#include "spirit/text.hpp"

namespace spirit {

std::string_view to_string(MergeMethod m) { return m == MergeMethod::rule ? "rule" : "prompted"; }

ReasoningSample MergeResult::apply_to(const ReasoningSample& sample) const {
  std::vector<std::string> texts;
  texts.reserve(merged_steps.size());
  for (const auto& s : merged_steps) texts.push_back(s.text);
  return with_steps(sample, texts, answer_line);
}

void validate_merge(const MergeRequest& req, const MergeResult& result) {
  if (result.merged_steps.size() + 1 != req.sample.steps.size()) {
    throw MergeRejected(MergeRejectReason::bad_step_count,
                        "expected " + std::to_string(req.sample.steps.size() - 1) + " steps, got " +
                            std::to_string(result.merged_steps.size()));
  }
  const auto before = extract_answer(req.sample.answer_line);
  const auto after = extract_answer(result.answer_line);
  if (!after || !before || !answers_match(*before, *after) ||
      !answers_match(*after, req.sample.answer_value)) {
    throw MergeRejected(MergeRejectReason::answer_changed,
                        "answer became '" + after.value_or("<none>") + "'");
  }
  for (std::size_t i = 0; i < result.merged_steps.size(); ++i) {
    const auto& s = result.merged_steps[i];
    if (s.index != i || text::trim(s.text).empty() || contains_answer_marker(s.text)) {
      throw MergeRejected(MergeRejectReason::bad_step_count, "malformed merged step " + std::to_string(i));
    }
  }
}

namespace {

bool is_expr_char(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) || c == ' ' || c == '.' || c == '+' ||
         c == '-' || c == '*' || c == '/' || c == '(' || c == ')' || c == 'x' || c == '^';
}

struct Equation {
  std::string lhs;
  std::string value;
};

// "<prose> <lhs> = <value>": lhs is the arithmetic run right before the last
// '=', value the number right after it.
std::optional<Equation> parse_equation(std::string_view step) {
  const auto eq = step.rfind('=');
  if (eq == std::string_view::npos) return std::nullopt;

  std::size_t v = eq + 1;
  while (v < step.size() && step[v] == ' ') ++v;
  std::size_t ve = v;
  if (ve < step.size() && step[ve] == '-') ++ve;
  while (ve < step.size() &&
         (std::isdigit(static_cast<unsigned char>(step[ve])) ||
          (step[ve] == '.' && ve + 1 < step.size() && std::isdigit(static_cast<unsigned char>(step[ve + 1]))))) {
    ++ve;
  }
  std::string value(step.substr(v, ve - v));
  if (value.empty() || value == "-") return std::nullopt;

  std::size_t ls = eq;
  while (ls > 0 && is_expr_char(step[ls - 1])) --ls;
  // A lone 'x' at the start is a variable name, not part of the expression.
  std::string lhs(text::trim(step.substr(ls, eq - ls)));
  while (!lhs.empty() && (lhs.front() == 'x' || lhs.front() == ' ' || lhs.front() == ')')) lhs.erase(lhs.begin());
  lhs = std::string(text::trim(lhs));
  bool has_digit = false;
  for (char c : lhs) has_digit |= std::isdigit(static_cast<unsigned char>(c)) != 0;
  if (!has_digit) return std::nullopt;
  return Equation{lhs, value};
}

bool is_number_char(char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '.'; }

// First occurrence of `value` not embedded in a longer number.
std::size_t find_number(std::string_view hay, std::string_view value) {
  std::size_t pos = hay.find(value);
  while (pos != std::string_view::npos) {
    const bool left_ok = pos == 0 || !is_number_char(hay[pos - 1]);
    const std::size_t end = pos + value.size();
    const bool right_ok = end >= hay.size() || !std::isdigit(static_cast<unsigned char>(hay[end]));
    const bool decimal_tail = end + 1 < hay.size() && hay[end] == '.' &&
                              std::isdigit(static_cast<unsigned char>(hay[end + 1]));
    if (left_ok && right_ok && !decimal_tail) return pos;
    pos = hay.find(value, pos + 1);
  }
  return std::string_view::npos;
}

std::vector<Step> reindex(std::vector<std::string> texts) {
  std::vector<Step> out;
  for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({i, std::move(texts[i])});
  return out;
}

}  // namespace

MergeResult merge_rule(const MergeRequest& req) {
  const auto& steps = req.sample.steps;
  if (req.removed_index >= steps.size()) {
    throw Error(ErrorCode::invalid_input, "removed_index out of range");
  }
  const auto eq = parse_equation(steps[req.removed_index].text);
  if (!eq) throw MergeRejected(MergeRejectReason::no_rule, "removed step has no '<expr> = <value>'");

  auto texts = req.sample.step_texts();
  auto substitute = [&](std::size_t target) -> bool {
    const auto pos = find_number(texts[target], eq->value);
    if (pos == std::string::npos) return false;
    texts[target].replace(pos, eq->value.size(), "(" + eq->lhs + ")");
    return true;
  };
  const std::size_t i = req.removed_index;
  const bool merged = (i + 1 < texts.size() && substitute(i + 1)) || (i > 0 && substitute(i - 1));
  if (!merged) {
    throw MergeRejected(MergeRejectReason::no_rule, "value " + eq->value + " not found in a neighbouring step");
  }
  texts.erase(texts.begin() + static_cast<std::ptrdiff_t>(i));

  MergeResult r{reindex(std::move(texts)), req.sample.answer_line, MergeMethod::rule, true};
  validate_merge(req, r);
  return r;
}

MergeResult RuleMerger::merge(const MergeRequest& req) const { return merge_rule(req); }

std::string build_merge_prompt(const std::string& tmpl, const MergeRequest& req) {
  auto replace_all = [](std::string s, std::string_view slot, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = s.find(slot, pos)) != std::string::npos) {
      s.replace(pos, slot.size(), value);
      pos += value.size();
    }
    return s;
  };
  std::string out = tmpl;
  // Fill {removed_step} and {question} before {reasoning}: reasoning text is
  // user data and must not be scanned for slots.
  out = replace_all(out, "{removed_step}", "\x01RS\x01");
  out = replace_all(out, "{question}", "\x01Q\x01");
  out = replace_all(out, "{reasoning}", "\x01R\x01");
  out = replace_all(out, "\x01RS\x01", req.sample.steps.at(req.removed_index).text);
  out = replace_all(out, "\x01Q\x01", req.sample.question);
  out = replace_all(out, "\x01R\x01", render_reasoning(req.sample));
  return out;
}

MergeResult parse_merge_reply(std::string_view reply, const ReasoningSample& original) {
  std::string_view body = text::trim(reply);
  if (body.substr(0, 2) == "A:") body = text::trim(body.substr(2));
  // Stop at anything that looks like the start of another example.
  for (std::string_view marker : {"\nQ:", "\nAfter removing", "\nExample "}) {
    if (auto p = body.find(marker); p != std::string_view::npos) body = body.substr(0, p);
  }
  std::vector<std::string> lines;
  for (const auto& l : text::split_lines(body)) {
    auto t = text::trim(l);
    if (!t.empty()) lines.emplace_back(t);
  }
  if (lines.empty()) throw MergeRejected(MergeRejectReason::empty_reply, "");

  MergeResult r;
  r.method = MergeMethod::prompted;
  std::size_t answer_at = lines.size();
  for (std::size_t i = lines.size(); i-- > 0;) {
    if (contains_answer_marker(lines[i])) {
      answer_at = i;
      break;
    }
  }
  if (answer_at == lines.size()) {
    r.answer_line = original.answer_line;
  } else {
    r.answer_line = lines[answer_at];
    lines.resize(answer_at);
  }
  r.merged_steps = reindex(std::move(lines));
  return r;
}

PromptedMerger::PromptedMerger(const Generator& generator, std::string tmpl, GenParams params)
    : generator_(generator), tmpl_(std::move(tmpl)), params_(std::move(params)) {
  params_.temperature = 0.0;
  if (params_.stop.empty()) params_.stop = {"\nQ:", "\nExample "};
}

MergeResult PromptedMerger::merge(const MergeRequest& req) const {
  if (req.removed_index >= req.sample.steps.size()) {
    throw Error(ErrorCode::invalid_input, "removed_index out of range");
  }
  const std::string reply = generator_.generate(build_merge_prompt(tmpl_, req), params_);
  MergeResult r = parse_merge_reply(reply, req.sample);
  validate_merge(req, r);
  r.answer_preserved = true;
  return r;
}

}  // namespace spirit
