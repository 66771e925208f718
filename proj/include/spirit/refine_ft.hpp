#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "spirit/corpus.hpp"
#include "spirit/merge.hpp"
#include "spirit/scoring.hpp"

namespace spirit {

enum class Strategy { min_ppl, max_ppl, random };
enum class MergePolicy { standard, remove_only, always_merge };

std::string_view to_string(Strategy s);
std::string_view to_string(MergePolicy p);
Strategy parse_strategy(std::string_view s);
MergePolicy parse_merge_policy(std::string_view s);

// Per-sample refinement of fine-tuning reasoning.
//
// Each round picks a step (lowest, highest or random removal perplexity) and
// compares PPL_rem, the perplexity without it, to the reference PPL_orig:
//   PPL_rem >  t2 * PPL_orig  -> stop
//   PPL_rem <  t1 * PPL_orig  -> remove the step
//   otherwise                 -> merge it into a neighbour and keep the merge
//                                only if it scores below PPL_rem
struct FtConfig {
  double t1 = 1.0;
  double t2 = 1.2;
  Strategy strategy = Strategy::min_ppl;
  MergePolicy merge_policy = MergePolicy::standard;
  bool disable_t1 = false;      // always try merging in the lower band too
  std::size_t min_steps = 1;
  std::uint64_t seed = 0;
  PplConfig ppl;
  bool recompute_orig = false;  // refresh PPL_orig after every accepted edit
  bool score_answer_line = true;
};

// Throws Error(config_error) on t1 <= 0, t1 > t2, or min_steps == 0.
void validate(const FtConfig& cfg);

struct ScanEntry {
  std::size_t step_index = 0;
  double ppl_without = 0.0;
  double ratio = 0.0;  // ppl_without / reference perplexity

  bool operator==(const ScanEntry&) const = default;
};

enum class Decision { removed, merged, stopped };
enum class StopReason { none, t2, min_steps };

std::string_view to_string(Decision d);
std::string_view to_string(StopReason r);

struct FtIteration {
  std::vector<ScanEntry> scan;
  std::optional<std::size_t> chosen_index;
  Decision decision = Decision::stopped;
  StopReason stop_reason = StopReason::none;
  double ppl_ref = 0.0;                 // PPL_orig in force for this round
  std::optional<double> ppl_rem;
  std::optional<double> ppl_merge;
  std::optional<std::string> merge_error;  // why a merge attempt fell back to removal
  std::size_t step_count = 0;           // steps after this round

  bool operator==(const FtIteration&) const = default;
};

struct RefinementTrace {
  std::string sample_id;
  double ppl_orig = 0.0;
  std::vector<FtIteration> iterations;
  std::optional<std::string> error;  // set when the sample could not be refined

  bool operator==(const RefinementTrace&) const = default;
};

// Scoring text for the fine-tuning objective: prompt "Q: <question>\nA:",
// continuation the reasoning (plus answer line when configured).
std::string ft_prompt(const ReasoningSample& sample);
std::string ft_continuation(const ReasoningSample& sample, const FtConfig& cfg);
double ft_perplexity(const ReasoningSample& sample, const Scorer& scorer, const FtConfig& cfg);

// Removal perplexity for every step, sorted by step index. `reference`
// defaults to the perplexity of the sample as given.
std::vector<ScanEntry> scan_removals(const ReasoningSample& sample, const Scorer& scorer,
                                     const FtConfig& cfg, std::optional<double> reference = std::nullopt);

// The per-sample generator used by Strategy::random, seeded from the global
// seed and the sample id so results do not depend on batch order.
std::mt19937_64 sample_rng(std::uint64_t seed, std::string_view sample_id);

struct FtOutcome {
  ReasoningSample refined;
  RefinementTrace trace;
};

// `merger` may be null, in which case merges fall back to removal.
FtOutcome refine_sample(const ReasoningSample& sample, const Scorer& scorer, const Merger* merger,
                        const FtConfig& cfg);

struct FtSummary {
  std::size_t samples = 0;
  std::size_t removed = 0;
  std::size_t merged = 0;
  std::size_t stopped = 0;
  std::size_t merge_fallbacks = 0;
  std::size_t failed = 0;
  std::size_t steps_before = 0;
  std::size_t steps_after = 0;
  std::size_t tokens_before = 0;
  std::size_t tokens_after = 0;
  TokenSource token_source = TokenSource::whitespace;

  bool operator==(const FtSummary&) const = default;
};

struct FtDatasetOutcome {
  std::vector<ReasoningSample> refined;
  std::vector<RefinementTrace> traces;
  FtSummary summary;
};

// Refines samples independently; a failing sample is emitted unchanged and
// its trace carries the error.
FtDatasetOutcome refine_dataset(const std::vector<ReasoningSample>& samples, const Scorer& scorer,
                                const Merger* merger, const FtConfig& cfg, std::size_t parallelism = 1);

// Adds the fixed alignment phrase "Answer should end with 'The answer is'"
// to every question.
std::vector<ReasoningSample> append_answer_suffix(std::vector<ReasoningSample> samples);

inline constexpr const char* kTraceSchema = "spirit.ft_trace.v1";
inline constexpr const char* kSummarySchema = "spirit.ft_summary.v1";

nlohmann::json to_json(const RefinementTrace& trace);
RefinementTrace ft_trace_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FtSummary& summary);
nlohmann::json to_json(const FtConfig& cfg);

}  // namespace spirit
