#include "spirit/cli.hpp"

#include <filesystem>
#include <iostream>
#include <memory>
#include <random>

#include "CLI11.hpp"
#include "spirit/analysis.hpp"
#include "spirit/cache.hpp"
#include "spirit/errors.hpp"
#include "spirit/http_backend.hpp"
#include "spirit/manifest.hpp"
#include "spirit/parallel.hpp"
#include "spirit/ngram.hpp"
#include "spirit/scripted.hpp"
#include "spirit/synthetic.hpp"
#include "spirit/text.hpp"

namespace spirit::cli {

using nlohmann::json;

namespace {

// Collects the options a user actually passed, keyed by config name, so they
// can be layered over the environment and config file.
class FlagSink {
 public:
  void option(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    auto& slot = values_[key];
    opts_.emplace_back(key, app->add_option(name, slot, help));
  }
  void flag(CLI::App* app, const std::string& name, const std::string& key, const std::string& value,
            const std::string& help) {
    switches_.emplace_back(key, value, app->add_flag(name, help));
  }
  StringMap collect() const {
    StringMap out;
    for (const auto& [key, opt] : opts_) {
      if (opt->count() > 0) out[key] = values_.at(key);
    }
    for (const auto& [key, value, opt] : switches_) {
      if (opt->count() > 0) out[key] = value;
    }
    for (const auto& kv : sets_) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::config_error, "--set expects key=value");
      std::string key = kv.substr(0, eq);
      std::replace(key.begin(), key.end(), '-', '_');
      if (key.ends_with("_token")) {
        throw Error(ErrorCode::config_error, "tokens are only read from the environment");
      }
      out[key] = kv.substr(eq + 1);
    }
    return out;
  }
  std::vector<std::string>& sets() { return sets_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option*>> opts_;
  std::vector<std::tuple<std::string, std::string, CLI::Option*>> switches_;
  std::vector<std::string> sets_;
};

struct Backend {
  std::string spec;
  std::shared_ptr<void> owner;
  std::shared_ptr<void> cache_scorer, cache_generator;
  const Scorer* scorer = nullptr;
  const Generator* generator = nullptr;
};

// ngram:PATH | scripted:PATH | http | synthetic
Backend open_backend(const std::string& spec, const RunConfig& cfg,
                     const std::shared_ptr<ResultCache>& cache) {
  Backend b;
  b.spec = spec;
  if (spec.starts_with("ngram:")) {
    auto o = std::make_shared<NgramOracle>(NgramOracle::load(spec.substr(6)));
    b.scorer = o.get();
    b.generator = o.get();
    b.owner = o;
  } else if (spec.starts_with("scripted:")) {
    auto s = std::make_shared<ScriptedBackend>(ScriptedBackend::load(spec.substr(9)));
    b.scorer = s.get();
    b.generator = s.get();
    b.owner = s;
  } else if (spec == "http") {
    auto h = std::make_shared<HttpBackend>(cfg.http);
    if (!cfg.http.scoring.url.empty()) b.scorer = h.get();
    if (!cfg.http.generation.url.empty()) b.generator = h.get();
    if (!b.scorer && !b.generator) {
      throw Error(ErrorCode::config_error, "http backend needs scoring_url and/or gen_url");
    }
    b.owner = h;
  } else if (spec == "synthetic") {
    auto g = std::make_shared<synth::SchemaFollower>();
    b.generator = g.get();
    b.owner = g;
  } else {
    throw Error(ErrorCode::config_error,
                "unknown backend '" + spec + "' (expected ngram:PATH, scripted:PATH, http or synthetic)");
  }
  if (cache) {
    if (b.scorer) {
      auto cs = std::make_shared<CachedScorer>(*b.scorer, cache);
      b.scorer = cs.get();
      b.cache_scorer = cs;
    }
    if (b.generator) {
      auto cg = std::make_shared<CachedGenerator>(*b.generator, cache);
      b.generator = cg.get();
      b.cache_generator = cg;
    }
  }
  return b;
}

const Scorer& need_scorer(const Backend& b) {
  if (!b.scorer) throw Error(ErrorCode::config_error, "backend '" + b.spec + "' cannot score");
  return *b.scorer;
}

const Generator& need_generator(const Backend& b) {
  if (!b.generator) throw Error(ErrorCode::config_error, "backend '" + b.spec + "' cannot generate");
  return *b.generator;
}

std::unique_ptr<Merger> make_merger(const std::string& kind, const Backend* gen) {
  std::string k = kind;
  if (k == "auto") {
    k = gen && gen->generator && !gen->spec.starts_with("synthetic") ? "prompted" : "rule";
  }
  if (k == "rule") return std::make_unique<RuleMerger>();
  if (k == "none") return nullptr;
  if (k == "prompted") {
    if (!gen || !gen->generator) {
      throw Error(ErrorCode::config_error, "--merger prompted needs --gen-backend");
    }
    return std::make_unique<PromptedMerger>(*gen->generator);
  }
  throw Error(ErrorCode::config_error, "unknown merger '" + kind + "' (auto, rule, prompted, none)");
}

std::string with_suffix(const std::string& path, const std::string& suffix) { return path + suffix; }

// out.jsonl + "t2-1.5" -> out.t2-1.5.jsonl
std::string variant_path(const std::string& path, const std::string& tag) {
  std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + "." + tag + p.extension().string())).string();
}

std::vector<double> parse_sweep(const std::string& s) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto t = std::string(text::trim(item));
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(t, &pos));
      if (pos != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw Error(ErrorCode::config_error, "--t2-sweep: not a number: '" + t + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::config_error, "--t2-sweep needs at least one value");
  return out;
}

std::vector<std::vector<std::size_t>> parse_plan(std::string_view textv) {
  std::vector<std::vector<std::size_t>> plan;
  std::size_t line_no = 0;
  for (const auto& raw : text::split_lines(textv)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.starts_with('#')) continue;
    std::vector<std::size_t> subset;
    if (line != "-") {
      std::string item;
      std::istringstream in{std::string(line)};
      while (std::getline(in, item, ',')) {
        const auto t = std::string(text::trim(item));
        if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
          throw ParseError(line_no, "removal plan: expected comma-separated step indices");
        }
        subset.push_back(std::stoul(t));
      }
    }
    plan.push_back(std::move(subset));
  }
  return plan;
}

std::vector<std::vector<std::size_t>> random_plan(std::size_t k, std::size_t schema_len,
                                                  std::uint64_t seed) {
  if (schema_len < 2) throw Error(ErrorCode::invalid_input, "random plan needs at least 2 schema steps");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> plan;
  for (std::size_t i = 0; i < k; ++i) {
    const auto size = std::uniform_int_distribution<std::size_t>(1, schema_len - 1)(rng);
    std::vector<std::size_t> all(schema_len);
    for (std::size_t j = 0; j < schema_len; ++j) all[j] = j;
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(size);
    std::sort(all.begin(), all.end());
    plan.push_back(std::move(all));
  }
  return plan;
}

std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

struct Context {
  RunConfig cfg;
  std::shared_ptr<ResultCache> cache;
  RunManifest manifest;
  std::ostream& out;
  std::ostream& err;
};

void note_backend(RunManifest& m, const std::string& role, const Backend& b) {
  m.backends[role] = b.scorer ? b.scorer->id() : b.generator->id();
}

struct FtRunFiles {
  std::string out, trace, summary;
};

FtSummary run_ft_once(Context& ctx, const std::vector<ReasoningSample>& samples, const Scorer& scorer,
                      const Merger* merger, const FtRunFiles& files) {
  auto result = refine_dataset(samples, scorer, merger, ctx.cfg.ft, ctx.cfg.parallelism);
  auto refined = ctx.cfg.append_answer_suffix ? append_answer_suffix(result.refined) : result.refined;
  save_samples(refined, files.out);
  std::vector<json> rows;
  for (const auto& t : result.traces) rows.push_back(to_json(t));
  text::write_file(files.trace, jsonl(rows));
  json summary = to_json(result.summary);
  summary["config"] = to_json(ctx.cfg.ft);
  text::write_file(files.summary, summary.dump(2) + "\n");
  for (const auto* f : {&files.out, &files.trace, &files.summary}) ctx.manifest.add_output(*f);
  ctx.err << "refine-ft: " << result.summary.samples << " samples, " << result.summary.removed
          << " removed, " << result.summary.merged << " merged, " << result.summary.failed
          << " failed -> " << files.out << "\n";
  return result.summary;
}

}  // namespace

int run(const std::vector<std::string>& args, const StringMap& env, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Refine chain-of-thought data and few-shot demonstrations by perplexity", "spirit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());
  FlagSink flags;

  std::optional<std::string> config_path;
  std::string backend_spec, gen_spec, score_spec, acc_gen_spec, tok_spec, merger_kind = "auto";
  std::string in_path, out_path, demos_path, calib_path, eval_path, plan_path, sided = "two",
                                                                                 label = "eval",
                                                                                 sweep;
  std::vector<std::string> report_inputs;
  std::size_t random_plan_k = 0;
  std::string cache_action;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    flags.option(sub, "--parallelism", "parallelism", "worker threads");
    flags.option(sub, "--seed", "seed", "random seed");
    flags.option(sub, "--cache-dir", "cache_dir", "persistent result cache directory");
    flags.option(sub, "--scoring-url", "scoring_url", "HTTP scoring endpoint");
    flags.option(sub, "--gen-url", "gen_url", "HTTP generation endpoint");
    flags.option(sub, "--model", "model", "model name sent to HTTP backends");
    flags.option(sub, "--skip-first-token", "skip_first_token", "exclude the first token (true/false)");
    flags.flag(sub, "--strict", "strict", "true", "abort on the first failed question");
    flags.option(sub, "--segment", "segment", "newline or sentence");
    sub->add_option("--set", flags.sets(), "override any config key (key=value)");
  };
  auto ft_opts = [&](CLI::App* sub) {
    flags.option(sub, "--t1", "t1", "removal threshold ratio");
    flags.option(sub, "--t2", "t2", "stop threshold ratio");
    flags.option(sub, "--strategy", "strategy", "min_ppl, max_ppl or random");
    flags.option(sub, "--merge-policy", "merge_policy", "standard, remove_only or always_merge");
    flags.flag(sub, "--disable-t1", "disable_t1", "true", "try merging below t1 as well");
    flags.option(sub, "--min-steps", "min_steps", "never go below this many steps");
    flags.flag(sub, "--recompute-orig", "recompute_orig", "true", "refresh the reference perplexity after each edit");
    flags.flag(sub, "--no-answer-line", "score_answer_line", "false", "score the steps without the answer line");
  };

  auto* ft = app.add_subcommand("refine-ft", "refine fine-tuning reasoning sample by sample");
  common(ft);
  ft_opts(ft);
  ft->add_option("--in", in_path, "input JSONL")->required();
  ft->add_option("--out", out_path, "output JSONL")->required();
  ft->add_option("--backend", backend_spec, "scoring backend")->required();
  ft->add_option("--gen-backend", gen_spec, "generation backend for prompted merging");
  ft->add_option("--merger", merger_kind, "auto, rule, prompted or none");
  ft->add_option("--t2-sweep", sweep, "comma-separated t2 values; one output per value");
  flags.flag(ft, "--append-answer-suffix", "append_answer_suffix", "true",
             "append the answer-format instruction to every question");

  auto* scan = app.add_subcommand("scan", "report the removal perplexity of every step");
  common(scan);
  flags.flag(scan, "--no-answer-line", "score_answer_line", "false", "score the steps without the answer line");
  scan->add_option("--in", in_path, "input JSONL")->required();
  scan->add_option("--out", out_path, "output JSONL")->required();
  scan->add_option("--backend", backend_spec, "scoring backend")->required();

  auto* fs = app.add_subcommand("refine-fs", "refine a shared demonstration schema");
  common(fs);
  fs->add_option("--demos", demos_path, "demonstration set JSON")->required();
  fs->add_option("--calib", calib_path, "calibration questions JSONL")->required();
  fs->add_option("--out", out_path, "refined demonstration set JSON")->required();
  fs->add_option("--gen-backend", gen_spec, "generation backend")->required();
  fs->add_option("--score-backend", score_spec, "scoring backend")->required();
  fs->add_option("--merger", merger_kind, "auto, rule, prompted or none");
  flags.option(fs, "--target-steps", "target_steps", "stop at this schema length");
  flags.option(fs, "--max-removals", "max_removals", "stop after this many removals");
  flags.option(fs, "--ppl-stop-ratio", "ppl_stop_ratio", "stop when the best mean exceeds ratio * initial");
  flags.option(fs, "--calib-size", "calib_size", "calibration questions used");
  flags.option(fs, "--fs-strategy", "fs_strategy", "min_ppl or random");
  flags.option(fs, "--max-tokens", "max_tokens", "generation cap");
  flags.flag(fs, "--merge", "fs_merge", "true", "merge removed steps into neighbours");
  flags.flag(fs, "--no-merge", "fs_merge", "false", "remove steps without merging");

  auto* corr = app.add_subcommand("correlate", "correlate demo perplexity with accuracy");
  common(corr);
  corr->add_option("--demos", demos_path, "demonstration set JSON")->required();
  corr->add_option("--eval", eval_path, "questions with gold answers (JSONL)")->required();
  corr->add_option("--plan", plan_path, "removal plan: one comma-separated index set per line");
  corr->add_option("--random-plan", random_plan_k, "draw this many random removal sets instead");
  corr->add_option("--out", out_path, "output JSON")->required();
  corr->add_option("--gen-backend", gen_spec, "generation backend")->required();
  corr->add_option("--score-backend", score_spec, "scoring backend")->required();
  corr->add_option("--acc-gen-backend", acc_gen_spec, "generation backend for accuracy");
  corr->add_option("--sided", sided, "two, less or greater");
  flags.option(corr, "--max-tokens", "max_tokens", "generation cap");

  auto* ev = app.add_subcommand("eval", "accuracy and generated tokens on a test set");
  common(ev);
  ev->add_option("--demos", demos_path, "demonstration set JSON (zero-shot when absent)");
  ev->add_option("--test", eval_path, "test JSONL with gold answers")->required();
  ev->add_option("--out", out_path, "output JSON")->required();
  ev->add_option("--gen-backend", gen_spec, "generation backend")->required();
  ev->add_option("--tokenizer-backend", tok_spec, "backend whose tokenizer counts tokens");
  ev->add_option("--label", label, "row label in reports");
  flags.option(ev, "--max-tokens", "max_tokens", "generation cap");

  auto* rep = app.add_subcommand("report", "accuracy/token trade-off table from eval outputs");
  common(rep);
  rep->add_option("--in", report_inputs, "eval output JSON files")->required();
  rep->add_option("--out", out_path, "output CSV")->required();

  auto* cache = app.add_subcommand("cache", "inspect or clear the result cache");
  common(cache);
  cache->add_option("action", cache_action, "stats or clear")->required()->check(CLI::IsMember({"stats", "clear"}));

  std::vector<const char*> argv{"spirit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    Context ctx{load_config(config_path, env, flags.collect()), nullptr, {}, out, err};
    RunConfig& cfg = ctx.cfg;
    if (!cfg.cache_dir.empty()) ctx.cache = ResultCache::open(cfg.cache_dir);
    RunManifest& m = ctx.manifest;
    m.args = args;
    m.version = tool_version();
    m.started_at = utc_timestamp();
    m.config = redacted_json(cfg);
    m.seeds["seed"] = cfg.ft.seed;
    const LoadOptions load{cfg.segment};

    if (ft->parsed()) {
      m.command = "refine-ft";
      const auto samples = load_samples(in_path, load);
      m.add_input(in_path);
      const Backend scorer = open_backend(backend_spec, cfg, ctx.cache);
      note_backend(m, "scoring", scorer);
      std::optional<Backend> gen;
      if (!gen_spec.empty()) {
        gen = open_backend(gen_spec, cfg, ctx.cache);
        note_backend(m, "generation", *gen);
      }
      const auto merger = make_merger(merger_kind, gen ? &*gen : nullptr);
      m.backends["merger"] = merger ? merger->id() : "none";
      m.config["ft"] = to_json(cfg.ft);
      if (sweep.empty()) {
        run_ft_once(ctx, samples, need_scorer(scorer), merger.get(),
                    {out_path, with_suffix(out_path, ".trace.jsonl"), with_suffix(out_path, ".summary.json")});
      } else {
        std::string csv =
            "t2,output,samples,removed,merged,stopped,steps_before,steps_after,tokens_before,tokens_after\n";
        for (double t2 : parse_sweep(sweep)) {
          cfg.ft.t2 = t2;
          validate(cfg.ft);
          const std::string tag = "t2-" + text::format_double(t2);
          const std::string o = variant_path(out_path, tag);
          const auto s = run_ft_once(ctx, samples, need_scorer(scorer), merger.get(),
                                     {o, with_suffix(o, ".trace.jsonl"), with_suffix(o, ".summary.json")});
          csv += text::format_double(t2) + "," + o + "," + std::to_string(s.samples) + "," +
                 std::to_string(s.removed) + "," + std::to_string(s.merged) + "," +
                 std::to_string(s.stopped) + "," + std::to_string(s.steps_before) + "," +
                 std::to_string(s.steps_after) + "," + std::to_string(s.tokens_before) + "," +
                 std::to_string(s.tokens_after) + "\n";
        }
        const std::string csv_path = with_suffix(out_path, ".sweep.csv");
        text::write_file(csv_path, csv);
        m.add_output(csv_path);
      }
      write_manifest(m, with_suffix(out_path, ".manifest.json"));
    } else if (scan->parsed()) {
      m.command = "scan";
      const auto samples = load_samples(in_path, load);
      m.add_input(in_path);
      const Backend b = open_backend(backend_spec, cfg, ctx.cache);
      note_backend(m, "scoring", b);
      const Scorer& scorer = need_scorer(b);
      std::vector<json> rows(samples.size());
      parallel_for(samples.size(), cfg.parallelism, [&](std::size_t i) {
        const double ppl = ft_perplexity(samples[i], scorer, cfg.ft);
        json row{{"id", samples[i].id}, {"ppl_orig", ppl}, {"scan", json::array()}};
        for (const auto& e : scan_removals(samples[i], scorer, cfg.ft, ppl)) {
          row["scan"].push_back({{"step_index", e.step_index}, {"ppl_without", e.ppl_without}, {"ratio", e.ratio}});
        }
        rows[i] = std::move(row);
      });
      text::write_file(out_path, jsonl(rows));
      m.add_output(out_path);
      write_manifest(m, with_suffix(out_path, ".manifest.json"));
    } else if (fs->parsed()) {
      m.command = "refine-fs";
      if (!cfg.fs.target_steps && !cfg.fs.max_removals && !cfg.fs.ppl_stop_ratio) {
        throw Error(ErrorCode::config_error,
                    "refine-fs needs one of --target-steps, --max-removals, --ppl-stop-ratio");
      }
      const auto demos = load_demo_set(demos_path, load);
      m.add_input(demos_path);
      const auto calib = load_calibration(calib_path, cfg.calib_size);
      m.add_input(calib_path);
      const Backend gen = open_backend(gen_spec, cfg, ctx.cache);
      const Backend sc = open_backend(score_spec, cfg, ctx.cache);
      note_backend(m, "generation", gen);
      note_backend(m, "scoring", sc);
      m.backends["generation"] = need_generator(gen).id();
      const auto merger = make_merger(merger_kind, &gen);
      m.backends["merger"] = merger ? merger->id() : "none";
      m.config["fs"] = to_json(cfg.fs);
      const auto result = refine_demos(demos, calib, need_generator(gen), need_scorer(sc), merger.get(), cfg.fs);
      save_demo_set(result.refined, out_path);
      const std::string trace_path = with_suffix(out_path, ".trace.json");
      text::write_file(trace_path, to_json(result.trace).dump(2) + "\n");
      m.add_output(out_path);
      m.add_output(trace_path);
      write_manifest(m, with_suffix(out_path, ".manifest.json"));
      err << "refine-fs: schema " << demos.schema_len() << " -> " << result.refined.schema_len()
          << " steps in " << result.trace.iterations.size() << " iterations -> " << out_path << "\n";
    } else if (corr->parsed()) {
      m.command = "correlate";
      const auto demos = load_demo_set(demos_path, load);
      m.add_input(demos_path);
      const auto questions = load_samples(eval_path, load);
      m.add_input(eval_path);
      std::vector<std::vector<std::size_t>> plan;
      if (!plan_path.empty()) {
        plan = parse_plan(text::read_file(plan_path));
        m.add_input(plan_path);
      } else if (random_plan_k > 0) {
        plan = random_plan(random_plan_k, demos.schema_len(), cfg.ft.seed);
      } else {
        throw Error(ErrorCode::config_error, "correlate needs --plan or --random-plan");
      }
      const Backend gen = open_backend(gen_spec, cfg, ctx.cache);
      const Backend sc = open_backend(score_spec, cfg, ctx.cache);
      m.backends["generation"] = need_generator(gen).id();
      m.backends["scoring"] = need_scorer(sc).id();
      std::optional<Backend> acc;
      StudyConfig scfg;
      scfg.fs = cfg.fs;
      scfg.sided = parse_sided(sided);
      if (!acc_gen_spec.empty()) {
        acc = open_backend(acc_gen_spec, cfg, ctx.cache);
        scfg.accuracy_generator = &need_generator(*acc);
        m.backends["accuracy_generation"] = scfg.accuracy_generator->id();
      }
      const auto result = correlation_study(demos, questions, plan, need_generator(gen), need_scorer(sc), scfg);
      text::write_file(out_path, to_json(result).dump(2) + "\n");
      m.add_output(out_path);
      write_manifest(m, with_suffix(out_path, ".manifest.json"));
    } else if (ev->parsed()) {
      m.command = "eval";
      std::optional<DemonstrationSet> demos;
      if (!demos_path.empty()) {
        demos = load_demo_set(demos_path, load);
        m.add_input(demos_path);
      }
      const auto test = load_samples(eval_path, load);
      m.add_input(eval_path);
      const Backend gen = open_backend(gen_spec, cfg, ctx.cache);
      m.backends["generation"] = need_generator(gen).id();
      std::optional<Backend> tok;
      EvalConfig ecfg;
      ecfg.label = label;
      ecfg.gen = cfg.fs.gen;
      ecfg.parallelism = cfg.parallelism;
      ecfg.strict = cfg.strict;
      if (!tok_spec.empty()) {
        tok = open_backend(tok_spec, cfg, ctx.cache);
        ecfg.tokenizer = &need_scorer(*tok);
        m.backends["tokenizer"] = ecfg.tokenizer->id();
      }
      const auto result = evaluate(demos ? &*demos : nullptr, test, need_generator(gen), ecfg);
      json j{{"point", to_json(result.point)}, {"records", json::array()}};
      for (const auto& r : result.records) {
        json jr{{"id", r.id}, {"correct", r.correct}, {"tokens", r.tokens}};
        jr["predicted"] = r.predicted ? json(*r.predicted) : json(nullptr);
        if (r.error) jr["error"] = *r.error;
        j["records"].push_back(std::move(jr));
      }
      text::write_file(out_path, j.dump(2) + "\n");
      m.add_output(out_path);
      write_manifest(m, with_suffix(out_path, ".manifest.json"));
      out << result.point.label << ": accuracy " << text::format_double(result.point.accuracy())
          << ", mean tokens " << text::format_double(result.point.mean_tokens) << "\n";
    } else if (rep->parsed()) {
      m.command = "report";
      std::vector<TradeoffPoint> points;
      for (const auto& path : report_inputs) {
        json j;
        try {
          j = json::parse(text::read_file(path)).at("point");
          TradeoffPoint p;
          p.label = j.at("label").get<std::string>();
          p.n_correct = j.at("n_correct").get<std::size_t>();
          p.n_eval = j.at("n_eval").get<std::size_t>();
          p.mean_tokens = j.at("mean_tokens").get<double>();
          p.token_source = parse_token_source(j.at("token_source").get<std::string>());
          points.push_back(std::move(p));
        } catch (const json::exception& e) {
          throw Error(ErrorCode::parse_error, path + ": not an eval output (" + e.what() + ")");
        }
        m.add_input(path);
      }
      write_report(points, out_path);
      m.add_output(out_path);
      write_manifest(m, with_suffix(out_path, ".manifest.json"));
    } else if (cache->parsed()) {
      if (!ctx.cache) throw Error(ErrorCode::config_error, "cache needs --cache-dir or SPIRIT_CACHE_DIR");
      if (cache_action == "clear") ctx.cache->clear();
      const auto s = ctx.cache->stats();
      out << json{{"directory", cfg.cache_dir}, {"scores", s.scores}, {"generations", s.generations}}.dump()
          << "\n";
    }
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::usage: return kUsage;
      case ErrorKind::backend: return kBackend;
      case ErrorKind::data: return kData;
    }
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, current_environment(), std::cout, std::cerr);
}

}  // namespace spirit::cli
