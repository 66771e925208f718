#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "spirit/corpus.hpp"
#include "spirit/ngram.hpp"
#include "spirit/scoring.hpp"

// Synthetic arithmetic corpus with planted filler steps, and a rule-based
// generator that follows the step layout of its few-shot demonstrations.
// Together with an n-gram oracle trained on the corpus this gives a fully
// deterministic stand-in for a language model.
namespace spirit::synth {

struct Problem {
  int a = 1, b = 1, c = 2, d = 1;

  int sum() const { return a + b; }
  int product() const { return sum() * c; }
  int result() const { return product() - d; }
  std::string question() const;
  bool operator==(const Problem&) const = default;
};

// Every problem in the parameter grid: a, b, d in 1..9 and c in 2..5.
const std::vector<Problem>& all_problems();
Problem random_problem(std::mt19937_64& rng);
std::optional<Problem> parse_question(std::string_view question);

enum class Role { filler, start, add, multiply, subtract };
std::string_view to_string(Role r);
std::optional<Role> role_of(std::string_view step);

inline const std::vector<Role> kCriticalRoles = {Role::start, Role::add, Role::multiply,
                                                 Role::subtract};

const std::vector<std::string>& lexicon();
std::string filler_step(std::mt19937_64& rng);
// `value` is the running total entering the step.
std::string critical_step(Role role, const Problem& p, int value);
std::string answer_line(int value);

// Sample whose steps follow `roles`; operations absent from `roles` are
// skipped, so the answer may be wrong.
ReasoningSample sample_for_roles(const Problem& p, const std::vector<Role>& roles,
                                 std::mt19937_64& rng, std::string id);

struct PlantedSample {
  ReasoningSample sample;
  std::vector<bool> is_filler;  // one per step
};

// The four critical steps with `n_fillers` filler steps dropped into random
// gaps (before, between or after them).
PlantedSample planted_sample(const Problem& p, std::size_t n_fillers, std::mt19937_64& rng,
                             std::string id);
std::vector<PlantedSample> planted_corpus(std::size_t n, std::uint64_t seed,
                                          std::size_t max_fillers = 3);

// One "Q: ...\nA: ..." document per grid problem, each with 0-3 fillers.
std::vector<std::string> training_documents(std::uint64_t seed);
NgramOptions oracle_options();
NgramOracle train_oracle(std::uint64_t seed);

DemonstrationSet demo_set(std::size_t n_demos, const std::vector<Role>& roles, std::uint64_t seed);
std::vector<ReasoningSample> eval_set(std::size_t n, std::uint64_t seed, std::string id_prefix = "q");

// Answers the last question in the prompt by replaying the step roles found
// in the first demonstration (all critical steps for zero-shot prompts).
// Filler words are derived from a hash of the question, so output is a pure
// function of the prompt.
class SchemaFollower final : public Generator {
 public:
  std::string id() const override { return "synthetic:schema-follower-v1"; }
  std::string generate(std::string_view prompt, const GenParams& params) const override;
};

// Comma-separated role names, e.g. "filler,start,add".
std::vector<Role> parse_roles(std::string_view csv);

struct FileSetOptions {
  std::uint64_t seed = 1;
  std::size_t samples = 200;
  std::size_t demos = 4;
  std::size_t calib = 8;
  std::size_t test = 50;
  std::vector<Role> roles = {Role::filler,   Role::start,  Role::add,     Role::filler,
                             Role::multiply, Role::filler, Role::subtract};
};

// Writes oracle.counts, corpus.jsonl (with "filler_steps"), demos.json,
// calib.jsonl and test.jsonl into `dir`.
void write_file_set(const std::filesystem::path& dir, const FileSetOptions& opts);

}  // namespace spirit::synth
