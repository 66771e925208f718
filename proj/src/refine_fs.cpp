#include "spirit/refine_fs.hpp"

#include <random>

#include "spirit/errors.hpp"
#include "spirit/hash.hpp"
#include "spirit/parallel.hpp"
#include "spirit/text.hpp"

namespace spirit {

using nlohmann::json;

std::string_view to_string(FsStrategy s) { return s == FsStrategy::min_ppl ? "min_ppl" : "random"; }
std::string_view to_string(FsMergePolicy p) { return p == FsMergePolicy::merge ? "merge" : "remove_only"; }

FsStrategy parse_fs_strategy(std::string_view s) {
  if (s == "min_ppl" || s == "min-ppl") return FsStrategy::min_ppl;
  if (s == "random") return FsStrategy::random;
  throw Error(ErrorCode::config_error, "unknown few-shot strategy '" + std::string(s) + "'");
}

std::string_view to_string(FsDecision d) {
  switch (d) {
    case FsDecision::removed: return "removed";
    case FsDecision::merged: return "merged";
    case FsDecision::stopped: return "stopped";
  }
  return "?";
}

GenParams FsConfig::default_gen_params() {
  GenParams p;
  p.max_tokens = 512;
  p.temperature = 0.0;
  p.stop = {"Q:"};
  return p;
}

void validate(const FsConfig& cfg) {
  const int active = int(cfg.target_steps.has_value()) + int(cfg.max_removals.has_value()) +
                     int(cfg.ppl_stop_ratio.has_value());
  if (active != 1) {
    throw Error(ErrorCode::config_error,
                "exactly one of target_steps, max_removals, ppl_stop_ratio must be set");
  }
  if (cfg.target_steps && *cfg.target_steps < 1) {
    throw Error(ErrorCode::config_error, "target_steps must be >= 1");
  }
  if (cfg.ppl_stop_ratio && !(*cfg.ppl_stop_ratio > 0.0)) {
    throw Error(ErrorCode::config_error, "ppl_stop_ratio must be > 0");
  }
}

std::string build_fewshot_prompt(const DemonstrationSet* demos, std::string_view question) {
  std::string out;
  if (!demos) {
    out += "Q: ";
    out += question;
    out += " Let's think step by step.\nA:";
    return out;
  }
  for (const auto& d : demos->demos) {
    out += "Q: " + d.question + "\nA: " + render_reasoning(d) + "\n\n";
  }
  out += "Q: ";
  out += question;
  out += "\nA:";
  return out;
}

DemoEval eval_demo_set(const DemonstrationSet& demos, const CalibrationSet& calib,
                       const Generator& generator, const Scorer& scorer, const FsConfig& cfg) {
  if (calib.questions.empty()) throw Error(ErrorCode::invalid_input, "calibration set is empty");
  DemoEval out;
  out.per_question.resize(calib.size());
  parallel_for(calib.size(), cfg.parallelism, [&](std::size_t i) {
    QuestionEval& q = out.per_question[i];
    q.question_index = i;
    try {
      const std::string prompt = build_fewshot_prompt(&demos, calib.questions[i]);
      const std::string gen = generator.generate(prompt, cfg.gen);
      q.generation_ref = sha256_hex(gen);
      if (text::trim(gen).empty()) throw Error(ErrorCode::empty_continuation, "empty generation");
      const ScoreResult r = scorer.score(prompt, gen);
      q.logprobs = r.logprobs();
      q.ppl = perplexity(r, cfg.ppl);
    } catch (const Error& e) {
      if (cfg.strict) throw;
      q.error = e.what();
    }
  });
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& q : out.per_question) {
    if (q.ppl) {
      sum += *q.ppl;
      ++n;
    }
  }
  if (n == 0) {
    throw Error(ErrorCode::invalid_input,
                "no calibration question could be evaluated: " + out.per_question.front().error.value_or(""));
  }
  out.mean_ppl = sum / static_cast<double>(n);
  return out;
}

namespace {

bool limit_reached(const FsConfig& cfg, std::size_t schema_len, std::size_t removals) {
  if (cfg.target_steps && schema_len <= *cfg.target_steps) return true;
  if (cfg.max_removals && removals >= *cfg.max_removals) return true;
  return schema_len <= 1;
}

// Applies the merger to every demo; nullopt when any demo cannot be merged.
std::optional<DemonstrationSet> merge_all(const DemonstrationSet& set, std::size_t index,
                                          const Merger& merger, std::string& error) {
  DemonstrationSet out;
  out.schema = set.schema;
  if (!out.schema.empty()) out.schema.erase(out.schema.begin() + static_cast<std::ptrdiff_t>(index));
  for (const auto& d : set.demos) {
    try {
      out.demos.push_back(merger.merge({d, index}).apply_to(d));
    } catch (const MergeRejected& e) {
      error = "demo '" + d.id + "': " + e.what();
      return std::nullopt;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::backend) throw;
      error = "demo '" + d.id + "': " + e.what();
      return std::nullopt;
    }
  }
  return out;
}

}  // namespace

FsOutcome refine_demos(const DemonstrationSet& demos, const CalibrationSet& calib,
                       const Generator& generator, const Scorer& scorer, const Merger* merger,
                       const FsConfig& cfg) {
  validate(demos);
  validate(cfg);
  FsOutcome out{demos, {}};
  DemonstrationSet& state = out.refined;
  std::mt19937_64 rng(cfg.seed);
  if (cfg.ppl_stop_ratio) {
    out.trace.ppl_initial = eval_demo_set(state, calib, generator, scorer, cfg).mean_ppl;
  }

  std::size_t removals = 0;
  while (!limit_reached(cfg, state.schema_len(), removals)) {
    FsIteration it;
    const std::size_t len = state.schema_len();
    auto evaluate = [&](std::size_t j) {
      auto ev = eval_demo_set(remove_schema_step(state, j), calib, generator, scorer, cfg);
      it.candidates.push_back({j, ev.mean_ppl, std::move(ev.per_question)});
    };
    if (cfg.strategy == FsStrategy::random) {
      evaluate(std::uniform_int_distribution<std::size_t>(0, len - 1)(rng));
    } else {
      for (std::size_t j = 0; j < len; ++j) evaluate(j);
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < it.candidates.size(); ++k) {
      if (it.candidates[k].mean_ppl < it.candidates[best].mean_ppl) best = k;
    }
    const std::size_t chosen = it.candidates[best].schema_index;
    it.chosen_index = chosen;
    it.ppl_best = it.candidates[best].mean_ppl;

    if (cfg.ppl_stop_ratio && *it.ppl_best > *cfg.ppl_stop_ratio * *out.trace.ppl_initial) {
      it.decision = FsDecision::stopped;
      it.schema_len = len;
      out.trace.iterations.push_back(std::move(it));
      break;
    }

    std::optional<DemonstrationSet> merged;
    if (cfg.merge_policy == FsMergePolicy::merge) {
      std::string error;
      if (merger) {
        merged = merge_all(state, chosen, *merger, error);
      } else {
        error = "no merger configured";
      }
      if (!merged) it.merge_error = error;
    }
    if (merged) {
      state = std::move(*merged);
      it.decision = FsDecision::merged;
    } else {
      state = remove_schema_step(state, chosen);
      it.decision = FsDecision::removed;
    }
    validate(state);
    ++removals;
    it.schema_len = state.schema_len();
    out.trace.iterations.push_back(std::move(it));
  }
  return out;
}

json to_json(const FsTrace& trace) {
  json j;
  j["schema"] = kFsTraceSchema;
  if (trace.ppl_initial) j["ppl_initial"] = *trace.ppl_initial;
  j["iterations"] = json::array();
  for (const auto& it : trace.iterations) {
    json ji;
    ji["candidates"] = json::array();
    for (const auto& c : it.candidates) {
      json jc{{"schema_index", c.schema_index}, {"mean_ppl", c.mean_ppl}};
      jc["questions"] = json::array();
      for (const auto& q : c.per_question) {
        json jq{{"question_index", q.question_index}, {"generation_ref", q.generation_ref}};
        if (q.ppl) jq["ppl"] = *q.ppl;
        jq["logprobs"] = q.logprobs;
        if (q.error) jq["error"] = *q.error;
        jc["questions"].push_back(std::move(jq));
      }
      ji["candidates"].push_back(std::move(jc));
    }
    if (it.chosen_index) ji["chosen_index"] = *it.chosen_index;
    if (it.ppl_best) ji["ppl_best"] = *it.ppl_best;
    ji["decision"] = to_string(it.decision);
    if (it.merge_error) ji["merge_error"] = *it.merge_error;
    ji["schema_len"] = it.schema_len;
    j["iterations"].push_back(std::move(ji));
  }
  return j;
}

json to_json(const FsConfig& c) {
  json j{{"merge_policy", to_string(c.merge_policy)},
         {"strategy", to_string(c.strategy)},
         {"seed", c.seed},
         {"max_tokens", c.gen.max_tokens},
         {"temperature", c.gen.temperature},
         {"stop", c.gen.stop},
         {"skip_first_token", c.ppl.skip_first_token},
         {"strict", c.strict}};
  if (c.target_steps) j["target_steps"] = *c.target_steps;
  if (c.max_removals) j["max_removals"] = *c.max_removals;
  if (c.ppl_stop_ratio) j["ppl_stop_ratio"] = *c.ppl_stop_ratio;
  return j;
}

}  // namespace spirit
