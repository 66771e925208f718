#include "doctest.h"
#include "spirit/answer.hpp"
#include "spirit/corpus.hpp"
#include "spirit/errors.hpp"
#include "spirit/hash.hpp"
#include "spirit/merge.hpp"
#include "spirit/scripted.hpp"

using namespace spirit;

namespace {

const std::string kFixtures = SPIRIT_FIXTURES;

ReasoningSample sample_of(const std::vector<std::string>& steps, const std::string& answer) {
  return make_sample("s", "q", steps, "The answer is " + answer, answer);
}

std::vector<std::string> texts(const MergeResult& r) {
  std::vector<std::string> out;
  for (const auto& s : r.merged_steps) out.push_back(s.text);
  return out;
}

MergeRejectReason rejection(const Merger& m, const MergeRequest& req) {
  try {
    m.merge(req);
  } catch (const MergeRejected& e) {
    return e.reason();
  }
  FAIL("merge was accepted");
  return MergeRejectReason::no_rule;
}

}  // namespace

TEST_SUITE("merge") {

TEST_CASE("rule merge substitutes into the following step") {
  const auto s = sample_of({"x = 40 - 4 = 36.", "36 * 3/4 = 27."}, "27");
  const auto r = merge_rule({s, 0});
  CHECK(texts(r) == std::vector<std::string>{"(40 - 4) * 3/4 = 27."});
  CHECK(r.method == MergeMethod::rule);
  CHECK(r.answer_preserved);
  CHECK(r.answer_line == s.answer_line);
  // pure function
  CHECK(texts(merge_rule({s, 0})) == texts(r));
}

TEST_CASE("rule merge falls back to the preceding step") {
  const auto s = sample_of({"We have 7 * 2 = 14 apples.", "Then 3 + 4 = 7 pears.", "Done counting."}, "14");
  const auto r = merge_rule({s, 1});
  CHECK(texts(r) == std::vector<std::string>{"We have (3 + 4) * 2 = 14 apples.", "Done counting."});
}

TEST_CASE("rule merge does not match inside longer numbers") {
  const auto s = sample_of({"We get 2 + 4 = 6.", "Then 16 + 6 = 22."}, "22");
  CHECK(texts(merge_rule({s, 0})) == std::vector<std::string>{"Then 16 + (2 + 4) = 22."});
}

TEST_CASE("rule merge rejections") {
  RuleMerger m;
  CHECK(rejection(m, {sample_of({"No equation here.", "5 + 5 = 10."}, "10"), 0}) ==
        MergeRejectReason::no_rule);
  CHECK(rejection(m, {sample_of({"We get 2 + 4 = 6.", "Then 5 + 5 = 10."}, "10"), 0}) ==
        MergeRejectReason::no_rule);
  CHECK_THROWS_AS(merge_rule({sample_of({"a"}, "1"), 3}), Error);
}

TEST_CASE("merge validation") {
  const auto s = sample_of({"a", "b", "c"}, "12");
  MergeResult ok{{{0, "a"}, {1, "c"}}, "The answer is 12", MergeMethod::prompted, false};
  CHECK_NOTHROW(validate_merge({s, 1}, ok));
  auto wrong_count = ok;
  wrong_count.merged_steps.push_back({2, "d"});
  CHECK_THROWS_AS(validate_merge({s, 1}, wrong_count), MergeRejected);
  auto changed = ok;
  changed.answer_line = "The answer is 13";
  try {
    validate_merge({s, 1}, changed);
    FAIL("accepted a changed answer");
  } catch (const MergeRejected& e) {
    CHECK(e.reason() == MergeRejectReason::answer_changed);
  }
  // same value written differently is still the same answer
  auto reformatted = ok;
  reformatted.answer_line = "The answer is 12.0";
  CHECK_NOTHROW(validate_merge({s, 1}, reformatted));
}

TEST_CASE("prompted merge: prompt shape") {
  const auto s = sample_of({"first step", "second step"}, "4");
  const auto p = build_merge_prompt(default_merge_template(), {s, 0});
  CHECK(p.find("Remember not to change the final results") != std::string::npos);
  CHECK(p.find("After removing 'first step', the answer become:\nA:") != std::string::npos);
  CHECK(p.find("A: first step\nsecond step\nThe answer is 4") != std::string::npos);
  // slot markers inside user text are left alone
  const auto tricky = make_sample("t", "What is {reasoning}?", {"x {question} y"}, "The answer is 1", "1");
  const auto p2 = build_merge_prompt("{question}|{reasoning}|{removed_step}", {tricky, 0});
  CHECK(p2 == "What is {reasoning}?|x {question} y\nThe answer is 1|x {question} y");
}

TEST_CASE("prompted merge: replies are validated") {
  const auto s = sample_of({"a is 3.", "b is 4.", "sum is 3 + 4 = 7."}, "7");
  ScriptedBackend b;
  PromptedMerger m(b);
  const MergeRequest req{s, 0};
  b.add_reply(m.prompt_for(req), "A: b is 4.\nsum is 3 + 4 = 7.\nThe answer is 8");
  CHECK(rejection(m, req) == MergeRejectReason::answer_changed);

  ScriptedBackend b2;
  PromptedMerger m2(b2);
  b2.add_reply(m2.prompt_for(req), "A: sum is 3 + 4 = 7.\nThe answer is 7");
  CHECK(rejection(m2, req) == MergeRejectReason::bad_step_count);

  ScriptedBackend b3;
  PromptedMerger m3(b3);
  b3.add_reply(m3.prompt_for(req), "   ");
  CHECK(rejection(m3, req) == MergeRejectReason::empty_reply);

  ScriptedBackend b4;
  PromptedMerger m4(b4);
  b4.add_reply(m4.prompt_for(req),
               "A: b is 4, and a is 3.\nsum is 3 + 4 = 7.\nThe answer is 7\n\nQ: next question");
  const auto r = m4.merge(req);
  CHECK(texts(r) == std::vector<std::string>{"b is 4, and a is 3.", "sum is 3 + 4 = 7."});
  CHECK(r.method == MergeMethod::prompted);
  CHECK(r.apply_to(s).steps.size() == 2);
}

TEST_CASE("replay fixtures reproduce the worked merges") {
  const auto samples = load_samples(kFixtures + "/merge_samples.jsonl");
  const auto replay = ScriptedBackend::load(kFixtures + "/merge_replay.jsonl");
  PromptedMerger m(replay);
  REQUIRE(samples.size() == 2);

  const auto students = m.merge({samples[0], 1});
  REQUIRE(students.merged_steps.size() == 2);
  CHECK(students.merged_steps[1].text.find("(40-4)*3/4 = 27") != std::string::npos);
  CHECK(students.answer_line == "The answer is 27");

  const auto joy = m.merge({samples[1], 2});
  CHECK(joy.merged_steps.size() == 2);
  CHECK(joy.answer_line == "The answer is (300 / 60) = 5");
  CHECK(extract_answer(joy.answer_line) == std::optional<std::string>("5"));
  CHECK(joy.apply_to(samples[1]).answer_value == "5");

  // the same pair replays identically
  CHECK(texts(m.merge({samples[1], 2})) == texts(joy));
  // an unscripted removal is a miss, not a silent success
  CHECK_THROWS_AS(m.merge({samples[1], 0}), Error);
}

}
