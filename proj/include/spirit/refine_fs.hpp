#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spirit/corpus.hpp"
#include "spirit/merge.hpp"
#include "spirit/scoring.hpp"

namespace spirit {

enum class FsStrategy { min_ppl, random };
enum class FsMergePolicy { merge, remove_only };

std::string_view to_string(FsStrategy s);
std::string_view to_string(FsMergePolicy p);
FsStrategy parse_fs_strategy(std::string_view s);

struct FsConfig {
  // Exactly one stop criterion must be set.
  std::optional<std::size_t> target_steps;
  std::optional<std::size_t> max_removals;
  std::optional<double> ppl_stop_ratio;  // stop once the best mean exceeds ratio * initial mean

  FsMergePolicy merge_policy = FsMergePolicy::merge;
  FsStrategy strategy = FsStrategy::min_ppl;
  std::uint64_t seed = 0;
  GenParams gen = default_gen_params();
  PplConfig ppl;
  bool strict = false;          // abort on the first failed calibration question
  std::size_t parallelism = 1;  // workers per candidate evaluation

  static GenParams default_gen_params();
};

void validate(const FsConfig& cfg);

// "Q: <question>\nA: <reasoning>\n\n" for each demo, then "Q: <question>\nA:".
std::string build_fewshot_prompt(const DemonstrationSet* demos, std::string_view question);

struct QuestionEval {
  std::size_t question_index = 0;
  std::optional<double> ppl;
  std::string generation_ref;  // sha256 of the generated text
  std::vector<double> logprobs;
  std::optional<std::string> error;

  bool operator==(const QuestionEval&) const = default;
};

struct DemoEval {
  double mean_ppl = 0.0;
  std::vector<QuestionEval> per_question;
};

// Mean generation perplexity over the calibration questions: generate a
// completion for each few-shot prompt, then score that completion.
DemoEval eval_demo_set(const DemonstrationSet& demos, const CalibrationSet& calib,
                       const Generator& generator, const Scorer& scorer, const FsConfig& cfg);

struct CandidateEval {
  std::size_t schema_index = 0;
  double mean_ppl = 0.0;
  std::vector<QuestionEval> per_question;

  bool operator==(const CandidateEval&) const = default;
};

enum class FsDecision { removed, merged, stopped };
std::string_view to_string(FsDecision d);

struct FsIteration {
  std::vector<CandidateEval> candidates;
  std::optional<std::size_t> chosen_index;
  std::optional<double> ppl_best;
  FsDecision decision = FsDecision::stopped;
  std::optional<std::string> merge_error;
  std::size_t schema_len = 0;  // after this round

  bool operator==(const FsIteration&) const = default;
};

struct FsTrace {
  std::optional<double> ppl_initial;  // only computed for ppl_stop_ratio
  std::vector<FsIteration> iterations;

  bool operator==(const FsTrace&) const = default;
};

struct FsOutcome {
  DemonstrationSet refined;
  FsTrace trace;
};

FsOutcome refine_demos(const DemonstrationSet& demos, const CalibrationSet& calib,
                       const Generator& generator, const Scorer& scorer, const Merger* merger,
                       const FsConfig& cfg);

inline constexpr const char* kFsTraceSchema = "spirit.fs_trace.v1";
nlohmann::json to_json(const FsTrace& trace);
nlohmann::json to_json(const FsConfig& cfg);

}  // namespace spirit
