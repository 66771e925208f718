#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spirit/corpus.hpp"
#include "spirit/scoring.hpp"

namespace spirit {

struct MergeRequest {
  ReasoningSample sample;
  std::size_t removed_index = 0;
};

enum class MergeMethod { prompted, rule };
std::string_view to_string(MergeMethod m);

struct MergeResult {
  std::vector<Step> merged_steps;
  std::string answer_line;  // may be rewritten by a prompted merge
  MergeMethod method = MergeMethod::rule;
  bool answer_preserved = false;

  // The request's sample with the merged reasoning in place.
  ReasoningSample apply_to(const ReasoningSample& sample) const;
};

// Checks that a merge dropped exactly one step and kept the extracted
// answer. Throws MergeRejected otherwise.
void validate_merge(const MergeRequest& req, const MergeResult& result);

class Merger {
 public:
  virtual ~Merger() = default;
  virtual std::string id() const = 0;
  // Throws MergeRejected when no acceptable merge exists.
  virtual MergeResult merge(const MergeRequest& req) const = 0;
};

// Deterministic merger: a removed step shaped like "<prose> <expr> = <value>"
// is folded into the next step that mentions <value> (else the previous one)
// by substituting "(<expr>)" for the first whole-number occurrence.
class RuleMerger final : public Merger {
 public:
  std::string id() const override { return "rule"; }
  MergeResult merge(const MergeRequest& req) const override;
};

MergeResult merge_rule(const MergeRequest& req);

// Few-shot template with {question}, {reasoning} and {removed_step} slots.
const std::string& default_merge_template();

std::string build_merge_prompt(const std::string& tmpl, const MergeRequest& req);

// Asks a generation backend to rewrite the reasoning without the removed
// step, then re-segments and validates the reply.
class PromptedMerger final : public Merger {
 public:
  explicit PromptedMerger(const Generator& generator, std::string tmpl = default_merge_template(),
                          GenParams params = {});

  std::string id() const override { return "prompted:" + generator_.id(); }
  MergeResult merge(const MergeRequest& req) const override;

  std::string prompt_for(const MergeRequest& req) const { return build_merge_prompt(tmpl_, req); }

 private:
  const Generator& generator_;
  std::string tmpl_;
  GenParams params_;
};

// Parses a merge reply into steps and the final answer statement.
MergeResult parse_merge_reply(std::string_view reply, const ReasoningSample& original);

}  // namespace spirit
