#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "spirit/errors.hpp"
#include "spirit/hash.hpp"
#include "spirit/ngram.hpp"
#include "spirit/refine_fs.hpp"
#include "spirit/scripted.hpp"
#include "spirit/text.hpp"

using namespace spirit;

namespace {

DemonstrationSet demos_of(std::size_t n_steps, std::size_t n_demos = 2) {
  std::vector<ReasoningSample> ds;
  for (std::size_t d = 0; d < n_demos; ++d) {
    std::vector<std::string> steps;
    for (std::size_t k = 0; k < n_steps; ++k) steps.push_back("d" + std::to_string(d) + " step " + std::to_string(k));
    ds.push_back(make_sample("demo-" + std::to_string(d), "question " + std::to_string(d), steps,
                             "The answer is 1", "1"));
  }
  return make_demo_set(std::move(ds));
}

// Replies are a digest of the prompt; the scorer turns a reply into a
// perplexity in [1, e^3), so every distinct prompt gets its own value.
class DigestGen final : public Generator {
 public:
  std::string id() const override { return "digest"; }
  std::string generate(std::string_view prompt, const GenParams&) const override {
    return "r " + sha256_hex(prompt).substr(0, 12);
  }
};

class DigestScorer final : public Scorer {
 public:
  std::string id() const override { return "digest"; }
  ScoreResult score(std::string_view, std::string_view continuation) const override {
    const double x = static_cast<double>(stable_hash64(continuation) % 1000000) / 1000000.0;
    return {"", {{"r", 0.0}, {"h", -3.0 * x}}, id()};
  }
};

FsConfig target(std::size_t n) {
  FsConfig c;
  c.target_steps = n;
  c.merge_policy = FsMergePolicy::remove_only;
  return c;
}

}  // namespace

TEST_SUITE("refine_fs") {

TEST_CASE("config needs exactly one stop criterion") {
  FsConfig c;
  CHECK_THROWS_AS(validate(c), Error);
  c.target_steps = 3;
  CHECK_NOTHROW(validate(c));
  c.max_removals = 1;
  CHECK_THROWS_AS(validate(c), Error);
  c = {};
  c.target_steps = 0;
  CHECK_THROWS_AS(validate(c), Error);
  c = {};
  c.ppl_stop_ratio = -1.0;
  CHECK_THROWS_AS(validate(c), Error);
  CHECK(FsConfig::default_gen_params().stop == std::vector<std::string>{"Q:"});
}

TEST_CASE("few-shot prompt layout") {
  const auto d = demos_of(2, 1);
  CHECK(build_fewshot_prompt(&d, "new?") ==
        "Q: question 0\nA: d0 step 0\nd0 step 1\nThe answer is 1\n\nQ: new?\nA:");
  CHECK(build_fewshot_prompt(nullptr, "new?") == "Q: new? Let's think step by step.\nA:");
}

TEST_CASE("eval: certainty and arithmetic mean") {
  const auto d = demos_of(2);
  FsConfig c = target(1);
  ScriptedBackend b;
  b.add_reply(build_fewshot_prompt(&d, "c1"), " x y");
  b.add_score(std::nullopt, " x y", {0.0, 0.0});
  CHECK(eval_demo_set(d, {{"c1"}}, b, b, c).mean_ppl == 1.0);

  b.add_reply(build_fewshot_prompt(&d, "c2"), " u v");
  ScriptedBackend s;
  s.add_score(std::nullopt, " x y", {0.0, std::log(0.5)});
  s.add_score(std::nullopt, " u v", {0.0, std::log(0.25)});
  const auto ev = eval_demo_set(d, {{"c1", "c2"}}, b, s, c);
  CHECK(ev.mean_ppl == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(ev.per_question[1].generation_ref == sha256_hex(" u v"));
}

TEST_CASE("eval: failures are excluded unless strict") {
  const auto d = demos_of(2);
  FsConfig c = target(1);
  ScriptedBackend b;
  b.add_reply(build_fewshot_prompt(&d, "ok"), " x y");
  b.add_score(std::nullopt, " x y", {0.0, std::log(0.5)});
  b.add_failure(build_fewshot_prompt(&d, "bad"));
  b.add_reply(build_fewshot_prompt(&d, "blank"), "  ");
  const auto ev = eval_demo_set(d, {{"ok", "bad", "blank"}}, b, b, c);
  CHECK(ev.mean_ppl == doctest::Approx(2.0));
  CHECK(ev.per_question[1].error.has_value());
  CHECK(ev.per_question[2].error.has_value());
  c.strict = true;
  CHECK_THROWS_AS(eval_demo_set(d, {{"ok", "bad"}}, b, b, c), Error);
  c.strict = false;
  CHECK_THROWS_AS(eval_demo_set(d, {{"bad"}}, b, b, c), Error);
}

TEST_CASE("eval: n-gram generator and scorer against hand evaluation") {
  const std::string counts =
      "order 3\nalpha 1\nvocab A: Q: q1 q2 q3 q4 x y z\n"
      "count q1 A: x 3\ncount q2 A: y 2\ncount q3 A: z 1\ncount A: x y 2\ncount A: y z 1\n"
      "count x y z 2\ncount y z x 1\ncount A: z x 1\n";
  const auto oracle = NgramOracle::parse(counts);
  const std::vector<std::string> vocab{"A:", "Q:", "q1", "q2", "q3", "q4", "x", "y", "z"};
  std::map<std::vector<std::string>, double> cnt;
  for (const auto& line : text::split_lines(counts)) {
    const auto t = text::split_whitespace(line);
    if (!t.empty() && t[0] == "count") cnt[{t[1], t[2], t[3]}] = std::stod(t[4]);
  }
  auto p = [&](const std::string& a, const std::string& b, const std::string& v) {
    double tot = 0.0;
    for (const auto& w : vocab) {
      const auto it = cnt.find({a, b, w});
      if (it != cnt.end()) tot += it->second;
    }
    const auto it = cnt.find({a, b, v});
    return ((it == cnt.end() ? 0.0 : it->second) + 1.0) / (tot + 9.0);
  };
  FsConfig c = target(1);
  c.gen = {4, 0.0, {}};
  const auto d = demos_of(1);
  const CalibrationSet calib{{"q1", "q2", "q3", "q4"}};
  const auto ev = eval_demo_set(d, calib, oracle, oracle, c);
  double sum = 0.0;
  for (const auto& q : calib.questions) {
    std::vector<std::string> hist{q, "A:"};
    double lp = 0.0;
    for (int k = 0; k < 4; ++k) {
      std::string best;
      double best_p = -1.0;
      for (const auto& v : vocab) {
        const double pv = p(hist[hist.size() - 2], hist.back(), v);
        if (pv > best_p) {
          best_p = pv;
          best = v;
        }
      }
      if (k > 0) lp += std::log(best_p);
      hist.push_back(best);
    }
    sum += std::exp(-lp / 3.0);
  }
  CHECK(ev.mean_ppl == doctest::Approx(sum / 4.0).epsilon(1e-12));
}

TEST_CASE("zero removals leave the demos alone") {
  const auto d = demos_of(3);
  FsConfig c;
  c.max_removals = 0;
  ScriptedBackend b;
  const auto out = refine_demos(d, {{"c"}}, b, b, nullptr, c);
  CHECK(out.refined == d);
  CHECK(out.trace.iterations.empty());
}

TEST_CASE("lowest mean wins in every demo") {
  const auto d = demos_of(3);
  const CalibrationSet calib{{"c1", "c2"}};
  ScriptedBackend b;
  const double ppl[3][2] = {{3.0, 5.0}, {2.0, 6.0}, {2.0, 3.0}};
  for (std::size_t j = 0; j < 3; ++j) {
    const auto cand = remove_schema_step(d, j);
    for (std::size_t i = 0; i < 2; ++i) {
      const std::string reply = " r" + std::to_string(j) + std::to_string(i);
      b.add_reply(build_fewshot_prompt(&cand, calib.questions[i]), reply);
      b.add_score(std::nullopt, reply, {0.0, -std::log(ppl[j][i])});
    }
  }
  FsConfig c;
  c.max_removals = 1;
  c.merge_policy = FsMergePolicy::remove_only;
  const auto out = refine_demos(d, calib, b, b, nullptr, c);
  REQUIRE(out.trace.iterations.size() == 1);
  const auto& it = out.trace.iterations[0];
  CHECK(it.chosen_index == std::optional<std::size_t>(2));
  CHECK(it.ppl_best == doctest::Approx(2.5));
  CHECK(it.candidates[0].mean_ppl == doctest::Approx(4.0));
  for (const auto& demo : out.refined.demos) {
    CHECK(demo.steps.size() == 2);
    CHECK(demo.steps[1].text.find("step 1") != std::string::npos);
  }
}

TEST_CASE("seven to four takes three rounds and keeps the schema aligned") {
  const auto d = demos_of(7, 3);
  const DigestGen gen;
  const DigestScorer scorer;
  const CalibrationSet calib{{"c1", "c2", "c3"}};
  const auto out = refine_demos(d, calib, gen, scorer, nullptr, target(4));
  CHECK(out.trace.iterations.size() == 3);
  CHECK(out.refined.schema_len() == 4);
  for (const auto& demo : out.refined.demos) CHECK(demo.steps.size() == 4);
  std::size_t len = 7;
  for (const auto& it : out.trace.iterations) {
    CHECK(it.schema_len == --len);
    CHECK(it.candidates.size() == len + 1);
    const auto lowest = std::min_element(it.candidates.begin(), it.candidates.end(),
                                         [](const auto& a, const auto& b) { return a.mean_ppl < b.mean_ppl; });
    CHECK(it.chosen_index == lowest->schema_index);
    CHECK(it.ppl_best == lowest->mean_ppl);
  }
  auto par = target(4);
  par.parallelism = 4;
  CHECK(refine_demos(d, calib, gen, scorer, nullptr, par).trace == out.trace);
}

TEST_CASE("random strategy draws from the seeded generator") {
  const auto d = demos_of(5);
  const DigestGen gen;
  const DigestScorer scorer;
  auto c = target(2);
  c.strategy = FsStrategy::random;
  c.seed = 17;
  const auto out = refine_demos(d, {{"c"}}, gen, scorer, nullptr, c);
  std::mt19937_64 rng(17);
  std::size_t len = 5;
  for (const auto& it : out.trace.iterations) {
    REQUIRE(it.candidates.size() == 1);
    CHECK(it.chosen_index == std::uniform_int_distribution<std::size_t>(0, len - 1)(rng));
    --len;
  }
  CHECK(len == 2);
}

TEST_CASE("perplexity ratio stop") {
  const auto d = demos_of(4);
  const DigestGen gen;
  const DigestScorer scorer;
  FsConfig c;
  c.ppl_stop_ratio = 1e-6;
  c.merge_policy = FsMergePolicy::remove_only;
  auto out = refine_demos(d, {{"c"}}, gen, scorer, nullptr, c);
  REQUIRE(out.trace.iterations.size() == 1);
  CHECK(out.trace.iterations[0].decision == FsDecision::stopped);
  CHECK(out.refined == d);
  REQUIRE(out.trace.ppl_initial.has_value());
  c.ppl_stop_ratio = 1e6;
  out = refine_demos(d, {{"c"}}, gen, scorer, nullptr, c);
  CHECK(out.refined.schema_len() == 1);
}

TEST_CASE("merging across demos, with a failure degrading to removal") {
  auto mk = [](std::string id, std::vector<std::string> steps, std::string ans) {
    return make_sample(std::move(id), "q", steps, "The answer is " + ans, ans);
  };
  const auto good = make_demo_set({mk("a", {"x = 2 + 3 = 5.", "5 * 2 = 10."}, "10"),
                                   mk("b", {"x = 1 + 1 = 2.", "2 * 4 = 8."}, "8")});
  ScriptedBackend b;
  const CalibrationSet calib{{"c"}};
  for (std::size_t j = 0; j < 2; ++j) {
    const auto cand = remove_schema_step(good, j);
    b.add_reply(build_fewshot_prompt(&cand, "c"), " g" + std::to_string(j));
    b.add_score(std::nullopt, " g" + std::to_string(j), {0.0, j == 0 ? -0.1 : -0.2});
  }
  const RuleMerger merger;
  FsConfig c;
  c.target_steps = 1;
  auto out = refine_demos(good, calib, b, b, &merger, c);
  CHECK(out.trace.iterations[0].decision == FsDecision::merged);
  CHECK(out.refined.demos[0].step_texts() == std::vector<std::string>{"(2 + 3) * 2 = 10."});
  CHECK(out.refined.demos[1].step_texts() == std::vector<std::string>{"(1 + 1) * 4 = 8."});

  const auto mixed = make_demo_set({mk("a", {"x = 2 + 3 = 5.", "5 * 2 = 10."}, "10"),
                                    mk("b", {"Start with two.", "2 * 4 = 8."}, "8")});
  ScriptedBackend b2;
  for (std::size_t j = 0; j < 2; ++j) {
    const auto cand = remove_schema_step(mixed, j);
    b2.add_reply(build_fewshot_prompt(&cand, "c"), " g" + std::to_string(j));
    b2.add_score(std::nullopt, " g" + std::to_string(j), {0.0, j == 0 ? -0.1 : -0.2});
  }
  out = refine_demos(mixed, calib, b2, b2, &merger, c);
  CHECK(out.trace.iterations[0].decision == FsDecision::removed);
  CHECK(out.trace.iterations[0].merge_error.has_value());
  CHECK(out.refined.demos[0].step_texts() == std::vector<std::string>{"5 * 2 = 10."});
  CHECK(out.refined.demos[1].step_texts() == std::vector<std::string>{"2 * 4 = 8."});
}

TEST_CASE("trace json") {
  const auto d = demos_of(3);
  const DigestGen gen;
  const DigestScorer scorer;
  const auto out = refine_demos(d, {{"c1", "c2"}}, gen, scorer, nullptr, target(2));
  const auto j = to_json(out.trace);
  CHECK(j.at("schema") == kFsTraceSchema);
  CHECK(j.at("iterations").size() == 1);
  CHECK(to_json(target(2)).at("target_steps") == 2);
}

}
