#include "spirit/answer.hpp"

#include <cctype>

#include "spirit/text.hpp"

namespace spirit {
namespace {

bool is_terminal_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

std::string strip_terminal(std::string_view s) {
  s = text::trim(s);
  while (!s.empty() && is_terminal_punct(s.back())) {
    s.remove_suffix(1);
    s = text::trim(s);
  }
  return std::string(s);
}

bool is_plain_decimal(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  if (i < s.size() && s[i] == '.') {
    ++i;
    std::size_t frac = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++frac;
    if (frac == 0) return false;
  } else if (digits == 0) {
    return false;
  }
  return i == s.size();
}

std::string canonical_decimal(std::string_view s) {
  bool negative = false;
  if (s.front() == '+' || s.front() == '-') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  std::string int_part, frac_part;
  auto dot = s.find('.');
  int_part = std::string(s.substr(0, dot));
  if (dot != std::string_view::npos) frac_part = std::string(s.substr(dot + 1));
  while (int_part.size() > 1 && int_part.front() == '0') int_part.erase(int_part.begin());
  if (int_part.empty()) int_part = "0";
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();
  std::string out = int_part;
  if (!frac_part.empty()) out += "." + frac_part;
  if (negative && out != "0") out = "-" + out;
  return out;
}

}  // namespace

std::optional<std::string> extract_answer(std::string_view generation) {
  const std::size_t pos = text::rfind_icase(generation, kAnswerMarker);
  if (pos == std::string_view::npos) return std::nullopt;
  std::string_view rest = generation.substr(pos + kAnswerMarker.size());
  if (auto nl = rest.find('\n'); nl != std::string_view::npos) rest = rest.substr(0, nl);
  if (auto eq = rest.rfind('='); eq != std::string_view::npos) rest = rest.substr(eq + 1);
  std::string value = strip_terminal(rest);
  if (value.empty()) return std::nullopt;
  return value;
}

std::string normalize_answer(std::string_view answer) {
  std::string out;
  for (std::size_t i = 0; i < answer.size(); ++i) {
    const auto c = static_cast<unsigned char>(answer[i]);
    if (c == ',' || c == '$') continue;
    if (answer.substr(i, 3) == "\xE2\x82\xAC") {  // euro
      i += 2;
      continue;
    }
    if (answer.substr(i, 2) == "\xC2\xA3") {  // pound
      i += 1;
      continue;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  std::string s = strip_terminal(out);
  if (is_plain_decimal(s)) return canonical_decimal(s);
  return s;
}

bool answers_match(std::string_view a, std::string_view b) {
  return normalize_answer(a) == normalize_answer(b);
}

bool contains_answer_marker(std::string_view line) {
  return text::rfind_icase(line, kAnswerMarker) != std::string_view::npos;
}

}  // namespace spirit
