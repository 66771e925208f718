#include "spirit/refine_ft.hpp"

#include <algorithm>

#include "spirit/errors.hpp"
#include "spirit/hash.hpp"
#include "spirit/parallel.hpp"

namespace spirit {

using nlohmann::json;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::min_ppl: return "min_ppl";
    case Strategy::max_ppl: return "max_ppl";
    case Strategy::random: return "random";
  }
  return "?";
}

std::string_view to_string(MergePolicy p) {
  switch (p) {
    case MergePolicy::standard: return "standard";
    case MergePolicy::remove_only: return "remove_only";
    case MergePolicy::always_merge: return "always_merge";
  }
  return "?";
}

Strategy parse_strategy(std::string_view s) {
  if (s == "min_ppl" || s == "min-ppl") return Strategy::min_ppl;
  if (s == "max_ppl" || s == "max-ppl") return Strategy::max_ppl;
  if (s == "random") return Strategy::random;
  throw Error(ErrorCode::config_error, "unknown strategy '" + std::string(s) + "'");
}

MergePolicy parse_merge_policy(std::string_view s) {
  if (s == "standard") return MergePolicy::standard;
  if (s == "remove_only" || s == "remove-only") return MergePolicy::remove_only;
  if (s == "always_merge" || s == "always-merge") return MergePolicy::always_merge;
  throw Error(ErrorCode::config_error, "unknown merge policy '" + std::string(s) + "'");
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::removed: return "removed";
    case Decision::merged: return "merged";
    case Decision::stopped: return "stopped";
  }
  return "?";
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::none: return "none";
    case StopReason::t2: return "t2";
    case StopReason::min_steps: return "min_steps";
  }
  return "?";
}

namespace {
Decision parse_decision(std::string_view s) {
  if (s == "removed") return Decision::removed;
  if (s == "merged") return Decision::merged;
  if (s == "stopped") return Decision::stopped;
  throw Error(ErrorCode::parse_error, "unknown decision '" + std::string(s) + "'");
}

StopReason parse_stop_reason(std::string_view s) {
  if (s == "none") return StopReason::none;
  if (s == "t2") return StopReason::t2;
  if (s == "min_steps") return StopReason::min_steps;
  throw Error(ErrorCode::parse_error, "unknown stop reason '" + std::string(s) + "'");
}
}  // namespace

void validate(const FtConfig& cfg) {
  if (!(cfg.t1 > 0.0)) throw Error(ErrorCode::config_error, "t1 must be > 0");
  if (!(cfg.t1 <= cfg.t2)) throw Error(ErrorCode::config_error, "t1 must not exceed t2");
  if (cfg.min_steps == 0) throw Error(ErrorCode::config_error, "min_steps must be >= 1");
}

std::string ft_prompt(const ReasoningSample& sample) { return "Q: " + sample.question + "\nA:"; }

std::string ft_continuation(const ReasoningSample& sample, const FtConfig& cfg) {
  if (cfg.score_answer_line) return " " + render_reasoning(sample);
  return " " + render_steps(sample.step_texts(), "");
}

double ft_perplexity(const ReasoningSample& sample, const Scorer& scorer, const FtConfig& cfg) {
  return perplexity(scorer.score(ft_prompt(sample), ft_continuation(sample, cfg)), cfg.ppl);
}

std::vector<ScanEntry> scan_removals(const ReasoningSample& sample, const Scorer& scorer,
                                     const FtConfig& cfg, std::optional<double> reference) {
  const double ref = reference ? *reference : ft_perplexity(sample, scorer, cfg);
  std::vector<ScanEntry> out;
  out.reserve(sample.steps.size());
  for (std::size_t j = 0; j < sample.steps.size(); ++j) {
    const double ppl = ft_perplexity(without_step(sample, j), scorer, cfg);
    out.push_back({j, ppl, ppl / ref});
  }
  return out;
}

std::mt19937_64 sample_rng(std::uint64_t seed, std::string_view sample_id) {
  const std::uint64_t h = stable_hash64(sample_id);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

namespace {

std::size_t select_index(const std::vector<ScanEntry>& scan, Strategy strategy) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < scan.size(); ++k) {
    const bool better = strategy == Strategy::max_ppl ? scan[k].ppl_without > scan[best].ppl_without
                                                      : scan[k].ppl_without < scan[best].ppl_without;
    if (better) best = k;
  }
  return best;
}

bool wants_merge(const FtConfig& cfg, bool lower_band) {
  switch (cfg.merge_policy) {
    case MergePolicy::remove_only: return false;
    case MergePolicy::always_merge: return true;
    case MergePolicy::standard: return cfg.disable_t1 || !lower_band;
  }
  return false;
}

}  // namespace

FtOutcome refine_sample(const ReasoningSample& sample, const Scorer& scorer, const Merger* merger,
                        const FtConfig& cfg) {
  validate(cfg);
  ReasoningSample state = sample;
  RefinementTrace trace;
  trace.sample_id = sample.id;
  trace.ppl_orig = ft_perplexity(state, scorer, cfg);
  double ref = trace.ppl_orig;
  auto rng = sample_rng(cfg.seed, sample.id);

  for (;;) {
    FtIteration it;
    it.ppl_ref = ref;
    const std::size_t n = state.steps.size();
    if (n <= cfg.min_steps) {
      it.stop_reason = StopReason::min_steps;
      it.step_count = n;
      trace.iterations.push_back(std::move(it));
      break;
    }

    std::size_t chosen = 0;
    if (cfg.strategy == Strategy::random) {
      chosen = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      const double ppl = ft_perplexity(without_step(state, chosen), scorer, cfg);
      it.scan.push_back({chosen, ppl, ppl / ref});
      it.chosen_index = chosen;
      it.ppl_rem = ppl;
    } else {
      it.scan = scan_removals(state, scorer, cfg, ref);
      chosen = select_index(it.scan, cfg.strategy);
      it.chosen_index = chosen;
      it.ppl_rem = it.scan[chosen].ppl_without;
    }
    const double ppl_rem = *it.ppl_rem;

    if (ppl_rem > cfg.t2 * ref) {
      it.stop_reason = StopReason::t2;
      it.step_count = n;
      trace.iterations.push_back(std::move(it));
      break;
    }

    ReasoningSample removed = without_step(state, chosen);
    double accepted_ppl = ppl_rem;
    it.decision = Decision::removed;
    if (wants_merge(cfg, ppl_rem < cfg.t1 * ref)) {
      std::optional<ReasoningSample> merged;
      if (!merger) {
        it.merge_error = "no merger configured";
      } else {
        try {
          merged = merger->merge({state, chosen}).apply_to(state);
        } catch (const MergeRejected& e) {
          it.merge_error = e.what();
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::backend) throw;
          it.merge_error = e.what();
        }
      }
      if (merged) {
        it.ppl_merge = ft_perplexity(*merged, scorer, cfg);
        const bool accept = cfg.merge_policy == MergePolicy::always_merge || *it.ppl_merge < ppl_rem;
        if (accept) {
          it.decision = Decision::merged;
          accepted_ppl = *it.ppl_merge;
          removed = std::move(*merged);
        }
      }
    }
    state = std::move(removed);
    it.step_count = state.steps.size();
    trace.iterations.push_back(std::move(it));
    if (cfg.recompute_orig) ref = accepted_ppl;
  }
  return {std::move(state), std::move(trace)};
}

FtDatasetOutcome refine_dataset(const std::vector<ReasoningSample>& samples, const Scorer& scorer,
                                const Merger* merger, const FtConfig& cfg, std::size_t parallelism) {
  validate(cfg);
  FtDatasetOutcome out;
  out.refined.resize(samples.size());
  out.traces.resize(samples.size());
  parallel_for(samples.size(), parallelism, [&](std::size_t i) {
    try {
      auto r = refine_sample(samples[i], scorer, merger, cfg);
      out.refined[i] = std::move(r.refined);
      out.traces[i] = std::move(r.trace);
    } catch (const Error& e) {
      out.refined[i] = samples[i];
      out.traces[i] = RefinementTrace{samples[i].id, 0.0, {}, std::string(e.what())};
    }
  });

  auto& s = out.summary;
  s.samples = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& tr = out.traces[i];
    if (tr.error) ++s.failed;
    for (const auto& it : tr.iterations) {
      if (it.decision == Decision::removed) ++s.removed;
      if (it.decision == Decision::merged) ++s.merged;
      if (it.decision == Decision::stopped) ++s.stopped;
      if (it.merge_error) ++s.merge_fallbacks;
    }
    s.steps_before += samples[i].steps.size();
    s.steps_after += out.refined[i].steps.size();
    const auto before = count_tokens(render_reasoning(samples[i]), &scorer);
    const auto after = count_tokens(render_reasoning(out.refined[i]), &scorer);
    s.tokens_before += before.count;
    s.tokens_after += after.count;
    s.token_source = before.source;
  }
  if (samples.empty()) s.token_source = count_tokens("", &scorer).source;
  return out;
}

std::vector<ReasoningSample> append_answer_suffix(std::vector<ReasoningSample> samples) {
  for (auto& s : samples) s.question += " Answer should end with 'The answer is'";
  return samples;
}

json to_json(const RefinementTrace& trace) {
  json j;
  j["schema"] = kTraceSchema;
  j["sample_id"] = trace.sample_id;
  j["ppl_orig"] = trace.ppl_orig;
  if (trace.error) j["error"] = *trace.error;
  j["iterations"] = json::array();
  for (const auto& it : trace.iterations) {
    json ji;
    ji["scan"] = json::array();
    for (const auto& e : it.scan) {
      ji["scan"].push_back({{"step_index", e.step_index}, {"ppl_without", e.ppl_without}, {"ratio", e.ratio}});
    }
    if (it.chosen_index) ji["chosen_index"] = *it.chosen_index;
    ji["decision"] = to_string(it.decision);
    ji["stop_reason"] = to_string(it.stop_reason);
    ji["ppl_ref"] = it.ppl_ref;
    if (it.ppl_rem) ji["ppl_rem"] = *it.ppl_rem;
    if (it.ppl_merge) ji["ppl_merge"] = *it.ppl_merge;
    if (it.merge_error) ji["merge_error"] = *it.merge_error;
    ji["step_count"] = it.step_count;
    j["iterations"].push_back(std::move(ji));
  }
  return j;
}

RefinementTrace ft_trace_from_json(const json& j) {
  RefinementTrace t;
  try {
    t.sample_id = j.at("sample_id").get<std::string>();
    t.ppl_orig = j.at("ppl_orig").get<double>();
    if (j.contains("error")) t.error = j["error"].get<std::string>();
    for (const auto& ji : j.at("iterations")) {
      FtIteration it;
      for (const auto& e : ji.at("scan")) {
        it.scan.push_back({e.at("step_index").get<std::size_t>(), e.at("ppl_without").get<double>(),
                           e.at("ratio").get<double>()});
      }
      if (ji.contains("chosen_index")) it.chosen_index = ji["chosen_index"].get<std::size_t>();
      it.decision = parse_decision(ji.at("decision").get<std::string>());
      it.stop_reason = parse_stop_reason(ji.at("stop_reason").get<std::string>());
      it.ppl_ref = ji.at("ppl_ref").get<double>();
      if (ji.contains("ppl_rem")) it.ppl_rem = ji["ppl_rem"].get<double>();
      if (ji.contains("ppl_merge")) it.ppl_merge = ji["ppl_merge"].get<double>();
      if (ji.contains("merge_error")) it.merge_error = ji["merge_error"].get<std::string>();
      it.step_count = ji.at("step_count").get<std::size_t>();
      t.iterations.push_back(std::move(it));
    }
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed trace: ") + e.what());
  }
  return t;
}

json to_json(const FtSummary& s) {
  return json{{"schema", kSummarySchema},
              {"samples", s.samples},
              {"removed", s.removed},
              {"merged", s.merged},
              {"stopped", s.stopped},
              {"merge_fallbacks", s.merge_fallbacks},
              {"failed", s.failed},
              {"steps_before", s.steps_before},
              {"steps_after", s.steps_after},
              {"tokens_before", s.tokens_before},
              {"tokens_after", s.tokens_after},
              {"token_source", to_string(s.token_source)}};
}

json to_json(const FtConfig& c) {
  return json{{"t1", c.t1},
              {"t2", c.t2},
              {"strategy", to_string(c.strategy)},
              {"merge_policy", to_string(c.merge_policy)},
              {"disable_t1", c.disable_t1},
              {"min_steps", c.min_steps},
              {"seed", c.seed},
              {"skip_first_token", c.ppl.skip_first_token},
              {"recompute_orig", c.recompute_orig},
              {"score_answer_line", c.score_answer_line}};
}

}  // namespace spirit
