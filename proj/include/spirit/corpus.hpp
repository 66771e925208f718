#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace spirit {

struct Step {
  std::size_t index = 0;
  std::string text;

  bool operator==(const Step&) const = default;
};

enum class SegmentMode { newline, sentence };

std::string_view to_string(SegmentMode mode);
SegmentMode parse_segment_mode(std::string_view s);

// Splits reasoning into steps. Newline mode: one step per non-blank line.
// Sentence mode: boundaries at terminal punctuation followed by whitespace,
// skipping common abbreviations; decimals never split because their '.' is
// followed by a digit.
std::vector<Step> segment_steps(std::string_view reasoning, SegmentMode mode = SegmentMode::newline);

// A question, its reasoning steps, and the final answer statement, which is
// kept apart from the steps and is never a removal candidate.
struct ReasoningSample {
  std::string id;
  std::string question;
  std::vector<Step> steps;
  std::string answer_line;
  std::string answer_value;
  std::optional<std::string> trace_ref;

  std::vector<std::string> step_texts() const;
  bool operator==(const ReasoningSample&) const = default;
};

// Throws Error(invalid_sample) when an invariant does not hold.
void validate(const ReasoningSample& sample);

ReasoningSample make_sample(std::string id, std::string question,
                            const std::vector<std::string>& steps, std::string answer_line,
                            std::string answer_value);

// Copy of `base` with its steps (and optionally the answer line) replaced.
ReasoningSample with_steps(const ReasoningSample& base, const std::vector<std::string>& steps,
                           std::optional<std::string> answer_line = std::nullopt);
ReasoningSample without_step(const ReasoningSample& sample, std::size_t index);

// Steps joined by newlines, followed by the answer line.
std::string render_reasoning(const ReasoningSample& sample);
std::string render_steps(const std::vector<std::string>& steps, std::string_view answer_line);

std::string content_id(std::string_view question, const std::vector<std::string>& steps,
                       std::string_view answer);

struct LoadOptions {
  SegmentMode mode = SegmentMode::newline;
};

ReasoningSample sample_from_json(const nlohmann::json& record, std::size_t line,
                                 const LoadOptions& opts = {});
nlohmann::json sample_to_json(const ReasoningSample& sample);

std::vector<ReasoningSample> parse_samples(std::string_view jsonl, const LoadOptions& opts = {});
std::vector<ReasoningSample> load_samples(const std::string& path, const LoadOptions& opts = {});
std::string serialize_samples(const std::vector<ReasoningSample>& samples);
void save_samples(const std::vector<ReasoningSample>& samples, const std::string& path);

// Demonstrations sharing one positional step schema.
struct DemonstrationSet {
  std::vector<ReasoningSample> demos;
  std::vector<std::string> schema;  // optional role labels, one per step

  std::size_t schema_len() const { return demos.empty() ? 0 : demos.front().steps.size(); }
  bool operator==(const DemonstrationSet&) const = default;
};

DemonstrationSet make_demo_set(std::vector<ReasoningSample> demos,
                               std::vector<std::string> schema = {});
void validate(const DemonstrationSet& set);
DemonstrationSet remove_schema_step(const DemonstrationSet& set, std::size_t index);

DemonstrationSet parse_demo_set(std::string_view json_text, const LoadOptions& opts = {});
DemonstrationSet load_demo_set(const std::string& path, const LoadOptions& opts = {});
std::string serialize_demo_set(const DemonstrationSet& set);
void save_demo_set(const DemonstrationSet& set, const std::string& path);

inline constexpr std::size_t kDefaultCalibrationSize = 32;

struct CalibrationSet {
  std::vector<std::string> questions;
  std::size_t size() const { return questions.size(); }
};

// Reads the first `m` questions of a dataset file; `answer` is optional here.
CalibrationSet load_calibration(const std::string& path, std::size_t m = kDefaultCalibrationSize);

}  // namespace spirit
