#include <filesystem>
#include <random>

#include "doctest.h"
#include "spirit/corpus.hpp"
#include "spirit/errors.hpp"
#include "spirit/text.hpp"

using namespace spirit;

namespace {

std::vector<std::string> texts(const std::vector<Step>& steps) {
  std::vector<std::string> out;
  for (const auto& s : steps) out.push_back(s.text);
  return out;
}

std::string tmp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "spirit_unit";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("sentence segmentation") {
  CHECK(texts(segment_steps("A is 1. B is 2. Done.", SegmentMode::sentence)) ==
        std::vector<std::string>{"A is 1.", "B is 2.", "Done."});
  CHECK(texts(segment_steps("Cost is 3.5 dollars. Pay.", SegmentMode::sentence)) ==
        std::vector<std::string>{"Cost is 3.5 dollars.", "Pay."});
  CHECK(segment_steps("Mr. Smith paid e.g. two coins. Why? Because!", SegmentMode::sentence).size() == 3);
}

TEST_CASE("newline segmentation drops blank lines") {
  const auto steps = segment_steps("step1\nstep2\n\nstep3");
  REQUIRE(steps.size() == 3);
  for (std::size_t i = 0; i < steps.size(); ++i) CHECK(steps[i].index == i);
  CHECK(steps[2].text == "step3");
  CHECK_THROWS_AS(segment_steps("  \n "), Error);
}

TEST_CASE("render_reasoning") {
  auto s = make_sample("x", "q?", {"a", "b"}, "The answer is 12", "12");
  CHECK(render_reasoning(s) == "a\nb\nThe answer is 12");
  auto empty = make_sample("y", "q?", {}, "The answer is 12", "12");
  CHECK(render_reasoning(empty) == "The answer is 12");
  // newline segmentation of the rendered steps gives the steps back
  CHECK(texts(segment_steps(render_steps(s.step_texts(), ""))) == s.step_texts());
}

TEST_CASE("records: answer line split off, ids hashed when absent") {
  const auto s = parse_samples(
      R"({"question":"How many?","reasoning":"2 + 2 = 4 apples.\nThe answer is 4","answer":"4"})" "\n");
  REQUIRE(s.size() == 1);
  CHECK(s[0].steps.size() == 1);
  CHECK(s[0].answer_line == "The answer is 4");
  CHECK(s[0].id.size() == 16);

  const auto t = parse_samples(R"({"id":"a","question":"q","steps":["one","two"],"answer":"7"})" "\n");
  CHECK(t[0].steps.size() == 2);
  CHECK(t[0].answer_line == "The answer is 7");
}

TEST_CASE("malformed records report their line") {
  const std::string text = R"({"id":"a","question":"q","reasoning":"x","answer":"1"})" "\n"
                           R"({"id":"b","question":"q","reasoning":"x"})" "\n";
  try {
    parse_samples(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  const std::string dup = R"({"id":"a","question":"q","reasoning":"x","answer":"1"})" "\n"
                          R"({"id":"a","question":"q","reasoning":"y","answer":"1"})" "\n";
  try {
    parse_samples(dup);
    FAIL("expected DuplicateId");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::duplicate_id);
  }
  CHECK_THROWS_AS(parse_samples("{not json\n"), ParseError);
  // answer marker inside the steps, not last
  CHECK_THROWS_AS(parse_samples(R"({"question":"q","reasoning":"The answer is 1\nmore","answer":"1"})"),
                  ParseError);
}

TEST_CASE("two records keep their order") {
  const auto s = parse_samples(R"({"id":"z","question":"q1","reasoning":"a","answer":"1"})" "\n"
                               R"({"id":"a","question":"q2","reasoning":"b","answer":"2"})" "\n");
  REQUIRE(s.size() == 2);
  CHECK(s[0].id == "z");
  CHECK(s[1].id == "a");
}

TEST_CASE("save/load round trip over a generated corpus") {
  std::mt19937_64 rng(5);
  std::vector<ReasoningSample> samples;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> steps;
    const int n = std::uniform_int_distribution<int>(0, 5)(rng);
    for (int k = 0; k < n; ++k) {
      steps.push_back("step " + std::to_string(k) + " uses " + std::to_string(rng() % 1000) + " \"quoted\" \\ ok");
    }
    const std::string ans = std::to_string(rng() % 100);
    samples.push_back(make_sample("id-" + std::to_string(i), "question " + std::to_string(i) + "?", steps,
                                  "So the answer is " + ans + ".", ans));
  }
  const auto path = tmp_path("roundtrip.jsonl");
  save_samples(samples, path);
  const auto loaded = load_samples(path);
  CHECK(loaded == samples);
  // byte-stable
  CHECK(serialize_samples(loaded) == text::read_file(path));
}

TEST_CASE("validate rejects broken invariants") {
  auto s = make_sample("x", "q", {"a"}, "The answer is 3", "3");
  CHECK_NOTHROW(validate(s));
  auto bad = s;
  bad.steps[0].index = 4;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = s;
  bad.steps[0].text = "  ";
  CHECK_THROWS_AS(validate(bad), Error);
  bad = s;
  bad.answer_line = "The answer is 4";
  CHECK_THROWS_AS(validate(bad), Error);
  bad = s;
  bad.steps[0].text = "so the answer is 3";
  CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("demonstration sets share one schema") {
  auto d1 = make_sample("d1", "q1", {"a1", "b1", "c1"}, "The answer is 1", "1");
  auto d2 = make_sample("d2", "q2", {"a2", "b2", "c2"}, "The answer is 2", "2");
  auto set = make_demo_set({d1, d2}, {"A", "B", "C"});
  CHECK(set.schema_len() == 3);
  auto smaller = remove_schema_step(set, 1);
  CHECK(smaller.schema_len() == 2);
  CHECK(smaller.demos[0].step_texts() == std::vector<std::string>{"a1", "c1"});
  CHECK(smaller.demos[1].step_texts() == std::vector<std::string>{"a2", "c2"});
  CHECK(smaller.schema == std::vector<std::string>{"A", "C"});

  auto d3 = make_sample("d3", "q3", {"a3"}, "The answer is 3", "3");
  CHECK_THROWS_AS(make_demo_set({d1, d3}), Error);

  const auto path = tmp_path("demos.json");
  save_demo_set(set, path);
  CHECK(load_demo_set(path) == set);
}

TEST_CASE("calibration set") {
  const auto path = tmp_path("calib.jsonl");
  std::string body;
  for (int i = 0; i < 40; ++i) body += R"({"question":"q)" + std::to_string(i) + R"("})" "\n";
  text::write_file(path, body);
  CHECK(load_calibration(path).size() == kDefaultCalibrationSize);
  CHECK(load_calibration(path, 3).questions == std::vector<std::string>{"q0", "q1", "q2"});
  CHECK_THROWS_AS(load_calibration(tmp_path("absent.jsonl")), Error);
}

}
