#include "spirit/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "spirit/answer.hpp"
#include "spirit/errors.hpp"
#include "spirit/hash.hpp"
#include "spirit/text.hpp"

namespace spirit {

using nlohmann::json;

std::string_view to_string(SegmentMode mode) {
  return mode == SegmentMode::newline ? "newline" : "sentence";
}

SegmentMode parse_segment_mode(std::string_view s) {
  if (s == "newline") return SegmentMode::newline;
  if (s == "sentence") return SegmentMode::sentence;
  throw Error(ErrorCode::config_error, "unknown segmentation mode '" + std::string(s) + "'");
}

namespace {

constexpr std::array<std::string_view, 18> kAbbreviations = {
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs",
    "etc", "e.g", "i.e", "no", "approx", "fig", "eq", "cf", "inc"};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '?' || c == '!'; }

bool ends_with_abbreviation(std::string_view s, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && !is_space(s[start - 1])) --start;
  std::string word = text::to_lower(s.substr(start, dot - start));
  while (!word.empty() && (word.front() == '(' || word.front() == '"')) word.erase(word.begin());
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

// Collapses whitespace runs containing a newline to one space.
std::string flatten(std::string_view s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_space(s[i])) {
      std::size_t j = i;
      bool newline = false;
      while (j < s.size() && is_space(s[j])) newline |= (s[j++] == '\n');
      if (newline) {
        out.push_back(' ');
      } else {
        out.append(s.substr(i, j - i));
      }
      i = j;
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  auto emit = [&](std::size_t end) {
    auto piece = text::trim(s.substr(start, end - start));
    if (!piece.empty()) out.push_back(flatten(piece));
    start = end;
  };
  while (i < s.size()) {
    if (!is_terminal(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_terminal(s[j])) ++j;
    while (j < s.size() && (s[j] == '"' || s[j] == '\'' || s[j] == ')')) ++j;
    const bool at_boundary = j == s.size() || is_space(s[j]);
    if (at_boundary && !(s[i] == '.' && j == i + 1 && ends_with_abbreviation(s, i))) emit(j);
    i = j;
  }
  emit(s.size());
  return out;
}

std::vector<std::string> trimmed_nonblank_lines(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& line : text::split_lines(s)) {
    auto t = text::trim(line);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::vector<Step> to_steps(const std::vector<std::string>& texts) {
  std::vector<Step> steps;
  steps.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) steps.push_back({i, texts[i]});
  return steps;
}

std::string required_string(const json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) return it->dump();
  throw ParseError(line, std::string("field '") + key + "' must be text");
}

}  // namespace

std::vector<Step> segment_steps(std::string_view reasoning, SegmentMode mode) {
  if (text::trim(reasoning).empty()) {
    throw Error(ErrorCode::empty_reasoning, "reasoning text is empty");
  }
  if (mode == SegmentMode::newline) return to_steps(trimmed_nonblank_lines(reasoning));
  return to_steps(split_sentences(reasoning));
}

std::vector<std::string> ReasoningSample::step_texts() const {
  std::vector<std::string> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.text);
  return out;
}

void validate(const ReasoningSample& sample) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::invalid_sample, "sample '" + sample.id + "': " + what);
  };
  for (std::size_t i = 0; i < sample.steps.size(); ++i) {
    const auto& step = sample.steps[i];
    if (step.index != i) fail("step indices are not contiguous from 0");
    if (text::trim(step.text).empty()) fail("step " + std::to_string(i) + " is blank");
    if (step.text.find('\n') != std::string::npos) fail("step " + std::to_string(i) + " spans lines");
    if (contains_answer_marker(step.text)) fail("answer statement stored as a step");
  }
  if (text::trim(sample.answer_value).empty()) fail("empty answer value");
  if (sample.answer_line.find(sample.answer_value) == std::string::npos) {
    fail("answer line '" + sample.answer_line + "' does not contain '" + sample.answer_value + "'");
  }
  if (sample.answer_line.find('\n') != std::string::npos) fail("answer line spans lines");
}

ReasoningSample make_sample(std::string id, std::string question,
                            const std::vector<std::string>& steps, std::string answer_line,
                            std::string answer_value) {
  ReasoningSample s;
  s.question = std::move(question);
  s.steps = to_steps(steps);
  s.answer_line = std::move(answer_line);
  s.answer_value = std::move(answer_value);
  s.id = id.empty() ? content_id(s.question, steps, s.answer_value) : std::move(id);
  validate(s);
  return s;
}

ReasoningSample with_steps(const ReasoningSample& base, const std::vector<std::string>& steps,
                           std::optional<std::string> answer_line) {
  ReasoningSample s = base;
  s.steps = to_steps(steps);
  if (answer_line) s.answer_line = std::move(*answer_line);
  return s;
}

ReasoningSample without_step(const ReasoningSample& sample, std::size_t index) {
  if (index >= sample.steps.size()) {
    throw Error(ErrorCode::invalid_input, "step index " + std::to_string(index) + " out of range");
  }
  auto texts = sample.step_texts();
  texts.erase(texts.begin() + static_cast<std::ptrdiff_t>(index));
  return with_steps(sample, texts);
}

std::string render_steps(const std::vector<std::string>& steps, std::string_view answer_line) {
  std::string out;
  for (const auto& s : steps) {
    out += s;
    out += '\n';
  }
  out += answer_line;
  return out;
}

std::string render_reasoning(const ReasoningSample& sample) {
  return render_steps(sample.step_texts(), sample.answer_line);
}

std::string content_id(std::string_view question, const std::vector<std::string>& steps,
                       std::string_view answer) {
  std::string blob(question);
  blob += '\x1f';
  blob += text::join(steps, "\x1e");
  blob += '\x1f';
  blob += answer;
  return sha256_hex(blob).substr(0, 16);
}

ReasoningSample sample_from_json(const json& rec, std::size_t line, const LoadOptions& opts) {
  if (!rec.is_object()) throw ParseError(line, "record is not an object");
  ReasoningSample s;
  s.question = required_string(rec, "question", line);
  s.answer_value = std::string(text::trim(required_string(rec, "answer", line)));
  if (s.answer_value.empty()) throw ParseError(line, "empty 'answer'");

  const bool has_reasoning = rec.contains("reasoning");
  const bool has_steps = rec.contains("steps");
  if (has_reasoning == has_steps) {
    throw ParseError(line, "exactly one of 'reasoning' or 'steps' is required");
  }
  std::vector<std::string> texts;
  if (has_reasoning) {
    const std::string reasoning = required_string(rec, "reasoning", line);
    try {
      for (auto& st : segment_steps(reasoning, opts.mode)) texts.push_back(std::move(st.text));
    } catch (const Error& e) {
      throw ParseError(line, e.what());
    }
  } else {
    const auto& arr = rec.at("steps");
    if (!arr.is_array()) throw ParseError(line, "'steps' must be an array");
    for (const auto& el : arr) {
      if (!el.is_string()) throw ParseError(line, "'steps' entries must be text");
      auto t = text::trim(el.get<std::string>());
      if (t.empty()) throw ParseError(line, "blank entry in 'steps'");
      if (std::string(t).find('\n') != std::string::npos) {
        throw ParseError(line, "'steps' entries must be single lines");
      }
      texts.emplace_back(t);
    }
  }

  // Split off the answer statement; it must be the last step when present.
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (!contains_answer_marker(texts[i])) continue;
    if (i + 1 != texts.size()) throw ParseError(line, "answer statement must be the final step");
    s.answer_line = texts[i];
    texts.pop_back();
    break;
  }
  if (s.answer_line.empty()) {
    s.answer_line = "The answer is " + s.answer_value;
  } else if (s.answer_line.find(s.answer_value) == std::string::npos) {
    throw ParseError(line, "answer statement does not contain the answer '" + s.answer_value + "'");
  }
  s.steps = to_steps(texts);

  if (auto it = rec.find("id"); it != rec.end() && !it->is_null()) {
    if (!it->is_string() && !it->is_number()) throw ParseError(line, "'id' must be text");
    s.id = it->is_string() ? it->get<std::string>() : it->dump();
  } else {
    s.id = content_id(s.question, texts, s.answer_value);
  }
  if (auto it = rec.find("trace_ref"); it != rec.end() && it->is_string()) {
    s.trace_ref = it->get<std::string>();
  }
  try {
    validate(s);
  } catch (const Error& e) {
    throw ParseError(line, e.what());
  }
  return s;
}

json sample_to_json(const ReasoningSample& sample) {
  json j;
  j["id"] = sample.id;
  j["question"] = sample.question;
  j["reasoning"] = render_reasoning(sample);
  j["answer"] = sample.answer_value;
  if (sample.trace_ref) j["trace_ref"] = *sample.trace_ref;
  return j;
}

std::vector<ReasoningSample> parse_samples(std::string_view jsonl, const LoadOptions& opts) {
  std::vector<ReasoningSample> out;
  std::set<std::string> seen;
  const auto lines = text::split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (text::trim(lines[i]).empty()) continue;
    json rec;
    try {
      rec = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    auto sample = sample_from_json(rec, line_no, opts);
    if (!seen.insert(sample.id).second) {
      throw Error(ErrorCode::duplicate_id,
                  "line " + std::to_string(line_no) + ": duplicate id '" + sample.id + "'");
    }
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<ReasoningSample> load_samples(const std::string& path, const LoadOptions& opts) {
  return parse_samples(text::read_file(path), opts);
}

std::string serialize_samples(const std::vector<ReasoningSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

void save_samples(const std::vector<ReasoningSample>& samples, const std::string& path) {
  text::write_file(path, serialize_samples(samples));
}

void validate(const DemonstrationSet& set) {
  if (set.demos.empty()) throw Error(ErrorCode::invalid_input, "demonstration set is empty");
  const std::size_t n = set.demos.front().steps.size();
  for (const auto& d : set.demos) {
    validate(d);
    if (d.steps.size() != n) {
      throw Error(ErrorCode::invalid_input,
                  "demo '" + d.id + "' has " + std::to_string(d.steps.size()) +
                      " steps; the schema has " + std::to_string(n));
    }
  }
  if (!set.schema.empty() && set.schema.size() != n) {
    throw Error(ErrorCode::invalid_input, "schema labels do not match the step count");
  }
}

DemonstrationSet make_demo_set(std::vector<ReasoningSample> demos, std::vector<std::string> schema) {
  DemonstrationSet set{std::move(demos), std::move(schema)};
  validate(set);
  return set;
}

DemonstrationSet remove_schema_step(const DemonstrationSet& set, std::size_t index) {
  if (index >= set.schema_len()) {
    throw Error(ErrorCode::invalid_input, "schema index " + std::to_string(index) + " out of range");
  }
  DemonstrationSet out;
  out.demos.reserve(set.demos.size());
  for (const auto& d : set.demos) out.demos.push_back(without_step(d, index));
  out.schema = set.schema;
  if (!out.schema.empty()) out.schema.erase(out.schema.begin() + static_cast<std::ptrdiff_t>(index));
  return out;
}

DemonstrationSet parse_demo_set(std::string_view json_text, const LoadOptions& opts) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("malformed demonstration file: ") + e.what());
  }
  if (!root.is_object() || !root.contains("demos") || !root["demos"].is_array()) {
    throw ParseError(0, "demonstration file needs a 'demos' array");
  }
  DemonstrationSet set;
  std::set<std::string> seen;
  std::size_t k = 0;
  for (const auto& rec : root["demos"]) {
    auto d = sample_from_json(rec, 0, opts);
    if (!seen.insert(d.id).second) {
      throw Error(ErrorCode::duplicate_id, "demo " + std::to_string(k) + ": duplicate id '" + d.id + "'");
    }
    set.demos.push_back(std::move(d));
    ++k;
  }
  if (root.contains("schema")) {
    for (const auto& label : root["schema"]) set.schema.push_back(label.get<std::string>());
  }
  validate(set);
  return set;
}

DemonstrationSet load_demo_set(const std::string& path, const LoadOptions& opts) {
  return parse_demo_set(text::read_file(path), opts);
}

std::string serialize_demo_set(const DemonstrationSet& set) {
  json root;
  root["demos"] = json::array();
  for (const auto& d : set.demos) root["demos"].push_back(sample_to_json(d));
  if (!set.schema.empty()) root["schema"] = set.schema;
  return root.dump(2) + "\n";
}

void save_demo_set(const DemonstrationSet& set, const std::string& path) {
  text::write_file(path, serialize_demo_set(set));
}

CalibrationSet load_calibration(const std::string& path, std::size_t m) {
  if (m == 0) throw Error(ErrorCode::config_error, "calibration size must be positive");
  CalibrationSet calib;
  const auto lines = text::split_lines(text::read_file(path));
  for (std::size_t i = 0; i < lines.size() && calib.questions.size() < m; ++i) {
    if (text::trim(lines[i]).empty()) continue;
    json rec;
    try {
      rec = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw ParseError(i + 1, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(i + 1, "record is not an object");
    calib.questions.push_back(required_string(rec, "question", i + 1));
  }
  if (calib.questions.empty()) throw Error(ErrorCode::invalid_input, "calibration set is empty");
  return calib;
}

}  // namespace spirit
