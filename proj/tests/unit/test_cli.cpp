#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "spirit/analysis.hpp"
#include "spirit/cli.hpp"
#include "spirit/config.hpp"
#include "spirit/errors.hpp"
#include "spirit/synthetic.hpp"
#include "spirit/text.hpp"

using namespace spirit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run spirit_run(const std::vector<std::string>& args, const StringMap& env = {}) {
  std::ostringstream out, err;
  const int code = cli::run(args, env, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "spirit_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const fs::path& data_dir() {
  static const fs::path dir = [] {
    const auto d = fresh_dir("data");
    synth::FileSetOptions opts;
    opts.samples = 40;
    opts.demos = 3;
    opts.calib = 4;
    opts.test = 12;
    synth::write_file_set(d, opts);
    return d;
  }();
  return dir;
}

std::string at(const fs::path& dir, const std::string& f) { return (dir / f).string(); }

json without_timestamps(const std::string& path) {
  auto j = json::parse(text::read_file(path));
  j.erase("started_at");
  j.erase("finished_at");
  return j;
}

std::string write_config(const std::string& name, const std::string& body) {
  const auto p = fresh_dir("cfg") / name;
  text::write_file(p.string(), body);
  return p.string();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config defaults") {
  const auto c = load_config(std::nullopt, {}, {});
  CHECK(c.ft.t1 == 1.0);
  CHECK(c.ft.t2 == 1.2);
  CHECK(c.ft.ppl.skip_first_token);
  CHECK(c.fs.ppl.skip_first_token);
  CHECK(c.calib_size == 32);
  CHECK(c.fs.gen.stop == std::vector<std::string>{"Q:"});
  CHECK(c.sources.at("t2") == "default");
}

TEST_CASE("config precedence: flags > env > file > defaults") {
  const auto path = write_config("p.cfg", "# comment\nscoring_url = http://file\nt2 = 1.5\nseed = 3\n");
  const StringMap env{{"SPIRIT_SCORING_URL", "http://env"}};
  auto c = load_config(path, env, {});
  CHECK(c.http.scoring.url == "http://env");
  CHECK(c.ft.t2 == 1.5);
  CHECK(c.sources.at("t2") == "file");
  c = load_config(path, env, {{"scoring_url", "http://flag"}, {"seed", "9"}});
  CHECK(c.http.scoring.url == "http://flag");
  CHECK(c.sources.at("scoring_url") == "flag");
  CHECK(c.ft.seed == 9);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(load_config(write_config("a.cfg", "t1 = 1.5\nt2 = 1.2\n"), {}, {}), Error);
  CHECK_THROWS_AS(load_config(write_config("b.cfg", "scoring_token = abc\n"), {}, {}), Error);
  CHECK_THROWS_AS(load_config(write_config("c.cfg", "no_such_key = 1\n"), {}, {}), Error);
  CHECK_THROWS_AS(load_config(write_config("d.cfg", "target_steps = 4\nmax_removals = 2\n"), {}, {}), Error);
  CHECK_THROWS_AS(load_config(write_config("e.cfg", "t1 1.0\n"), {}, {}), Error);
  CHECK_THROWS_AS(load_config(std::nullopt, {}, {{"t2", "abc"}}), Error);
  try {
    load_config(write_config("f.cfg", "t1 = 2\n"), {}, {});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_error);
  }
}

TEST_CASE("tokens are redacted") {
  const auto c = load_config(std::nullopt, {{"SPIRIT_SCORING_TOKEN", "hunter2"}}, {});
  CHECK(c.http.scoring.token == "hunter2");
  const auto j = redacted_json(c);
  CHECK(j.dump().find("hunter2") == std::string::npos);
  CHECK(j.at("values").at("scoring_token") == "<redacted>");
}

TEST_CASE("usage and exit codes") {
  const auto help = spirit_run({"--help"});
  CHECK(help.code == cli::kOk);
  CHECK(help.out.find("refine-ft") != std::string::npos);
  CHECK(spirit_run({"bogus"}).code == cli::kUsage);
  CHECK(spirit_run({}).code == cli::kUsage);
  CHECK(spirit_run({"refine-ft", "--in", "x"}).code == cli::kUsage);
  const auto missing = spirit_run({"refine-ft", "--in", "/nonexistent/in.jsonl", "--out", "/tmp/x.jsonl",
                                   "--backend", "ngram:" + at(data_dir(), "oracle.counts")});
  CHECK(missing.code == cli::kData);
  CHECK(missing.err.find("/nonexistent/in.jsonl") != std::string::npos);
  const auto out = fresh_dir("codes");
  CHECK(spirit_run({"refine-ft", "--in", at(data_dir(), "corpus.jsonl"), "--out", at(out, "o.jsonl"),
                    "--backend", "nonsense"})
            .code == cli::kUsage);
  CHECK(spirit_run({"refine-fs", "--demos", at(data_dir(), "demos.json"), "--calib", at(data_dir(), "calib.jsonl"),
                    "--out", at(out, "d.json"), "--gen-backend", "synthetic", "--score-backend",
                    "ngram:" + at(data_dir(), "oracle.counts"), "--target-steps", "4", "--max-removals", "2"})
            .code == cli::kUsage);
  // refine-ft records per-sample backend failures; scan surfaces them
  CHECK(spirit_run({"scan", "--in", at(data_dir(), "corpus.jsonl"), "--out", at(out, "o.jsonl"),
                    "--backend", "scripted:" + std::string(SPIRIT_FIXTURES) + "/merge_replay.jsonl"})
            .code == cli::kBackend);
  CHECK(spirit_run({"refine-ft", "--in", at(data_dir(), "corpus.jsonl"), "--out", at(out, "o.jsonl"),
                    "--backend", "ngram:" + at(data_dir(), "oracle.counts"), "--set", "gen_token=x"})
            .code == cli::kUsage);
}

TEST_CASE("the installed binary reports the same codes") {
  const std::string bin = SPIRIT_BIN;
  CHECK(WEXITSTATUS(std::system((bin + " --help > /dev/null").c_str())) == 0);
  CHECK(WEXITSTATUS(std::system((bin + " refine-ft --in /nonexistent --out /tmp/x --backend synthetic 2> /dev/null").c_str())) == 4);
}

TEST_CASE("refine-ft is reproducible and writes a manifest per output") {
  const auto d = data_dir();
  const auto out = fresh_dir("ft");
  const std::string oracle = "ngram:" + at(d, "oracle.counts");
  auto run_ft = [&](const std::string& par) {
    return spirit_run({"refine-ft", "--in", at(d, "corpus.jsonl"), "--out", at(out, "r.jsonl"), "--backend",
                       oracle, "--skip-first-token", "false", "--parallelism", par},
                      {{"SPIRIT_SCORING_TOKEN", "hunter2"}});
  };
  REQUIRE(run_ft("1").code == 0);
  const auto first = text::read_file(at(out, "r.jsonl"));
  const auto trace = text::read_file(at(out, "r.jsonl.trace.jsonl"));
  const auto manifest = without_timestamps(at(out, "r.jsonl.manifest.json"));
  REQUIRE(run_ft("1").code == 0);
  CHECK(text::read_file(at(out, "r.jsonl")) == first);
  CHECK(text::read_file(at(out, "r.jsonl.trace.jsonl")) == trace);
  CHECK(without_timestamps(at(out, "r.jsonl.manifest.json")) == manifest);
  REQUIRE(run_ft("8").code == 0);
  CHECK(text::read_file(at(out, "r.jsonl")) == first);
  CHECK(text::read_file(at(out, "r.jsonl.trace.jsonl")) == trace);

  CHECK(manifest.at("schema") == "spirit.manifest.v1");
  CHECK(manifest.at("command") == "refine-ft");
  CHECK(manifest.at("outputs").size() == 3);
  CHECK(manifest.at("inputs").at(0).at("sha256").get<std::string>().size() == 64);
  CHECK(manifest.dump().find("hunter2") == std::string::npos);
  CHECK(manifest.at("config").at("values").at("skip_first_token") == "false");

  const auto refined = load_samples(at(out, "r.jsonl"));
  const auto original = load_samples(at(d, "corpus.jsonl"));
  REQUIRE(refined.size() == original.size());
  for (std::size_t i = 0; i < refined.size(); ++i) CHECK(refined[i].answer_value == original[i].answer_value);
  const auto summary = json::parse(text::read_file(at(out, "r.jsonl.summary.json")));
  CHECK(summary.at("removed").get<int>() > 0);
}

TEST_CASE("t2 sweep and scan") {
  const auto d = data_dir();
  const auto out = fresh_dir("sweep");
  const std::string oracle = "ngram:" + at(d, "oracle.counts");
  REQUIRE(spirit_run({"refine-ft", "--in", at(d, "corpus.jsonl"), "--out", at(out, "s.jsonl"), "--backend", oracle,
                      "--t2-sweep", "1.1,1.5"})
              .code == 0);
  CHECK(fs::exists(out / "s.t2-1.1.jsonl"));
  CHECK(fs::exists(out / "s.t2-1.5.jsonl.trace.jsonl"));
  CHECK(text::split_lines(text::read_file(at(out, "s.jsonl.sweep.csv"))).size() == 4);
  CHECK(json::parse(text::read_file(at(out, "s.jsonl.manifest.json"))).at("outputs").size() == 7);

  REQUIRE(spirit_run({"scan", "--in", at(d, "corpus.jsonl"), "--out", at(out, "scan.jsonl"), "--backend", oracle})
              .code == 0);
  const auto rows = text::split_lines(text::read_file(at(out, "scan.jsonl")));
  const auto row = json::parse(rows.front());
  CHECK(row.at("scan").size() == load_samples(at(d, "corpus.jsonl")).front().steps.size());
}

TEST_CASE("refine-fs, eval, report and correlate end to end") {
  const auto d = data_dir();
  const auto out = fresh_dir("fs");
  const std::string oracle = "ngram:" + at(d, "oracle.counts");
  auto run_fs = [&](const std::string& par) {
    return spirit_run({"refine-fs", "--demos", at(d, "demos.json"), "--calib", at(d, "calib.jsonl"), "--out",
                       at(out, "demos4.json"), "--gen-backend", "synthetic", "--score-backend", oracle,
                       "--target-steps", "4", "--no-merge", "--skip-first-token", "false", "--parallelism", par});
  };
  REQUIRE(run_fs("1").code == 0);
  const auto refined_text = text::read_file(at(out, "demos4.json"));
  const auto trace_text = text::read_file(at(out, "demos4.json.trace.json"));
  REQUIRE(run_fs("8").code == 0);
  CHECK(text::read_file(at(out, "demos4.json")) == refined_text);
  CHECK(text::read_file(at(out, "demos4.json.trace.json")) == trace_text);
  const auto refined = load_demo_set(at(out, "demos4.json"));
  CHECK(refined.schema_len() == 4);
  CHECK(json::parse(trace_text).at("iterations").size() == 3);

  for (const auto& [label, demos] : {std::pair{"full", at(d, "demos.json")}, {"refined", at(out, "demos4.json")}}) {
    REQUIRE(spirit_run({"eval", "--demos", demos, "--test", at(d, "test.jsonl"), "--gen-backend", "synthetic",
                        "--label", label, "--out", at(out, std::string(label) + ".eval.json")})
                .code == 0);
  }
  REQUIRE(spirit_run({"eval", "--test", at(d, "test.jsonl"), "--gen-backend", "synthetic", "--label", "zero-shot",
                      "--out", at(out, "zero.eval.json")})
              .code == 0);
  REQUIRE(spirit_run({"report", "--in", at(out, "full.eval.json"), at(out, "refined.eval.json"),
                      at(out, "zero.eval.json"), "--out", at(out, "report.csv")})
              .code == 0);
  const auto pts = parse_report(text::read_file(at(out, "report.csv")));
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].mean_tokens <= pts[1].mean_tokens);
  CHECK(pts[1].mean_tokens <= pts[2].mean_tokens);

  text::write_file(at(out, "plan.txt"), "-\n0\n1\n0,3\n2\n");
  REQUIRE(spirit_run({"correlate", "--demos", at(d, "demos.json"), "--eval", at(d, "test.jsonl"), "--plan",
                      at(out, "plan.txt"), "--gen-backend", "synthetic", "--score-backend", oracle, "--out",
                      at(out, "corr.json"), "--skip-first-token", "false"})
              .code == 0);
  const auto corr = json::parse(text::read_file(at(out, "corr.json")));
  CHECK(corr.at("points").size() == 5);
  CHECK(corr.contains("correlation"));
}

TEST_CASE("cache command") {
  const auto d = data_dir();
  const auto out = fresh_dir("cache");
  const std::string cache = at(out, "c");
  REQUIRE(spirit_run({"scan", "--in", at(d, "corpus.jsonl"), "--out", at(out, "scan.jsonl"), "--backend",
                      "ngram:" + at(d, "oracle.counts"), "--cache-dir", cache})
              .code == 0);
  const auto cold = text::read_file(at(out, "scan.jsonl"));
  auto stats = spirit_run({"cache", "stats", "--cache-dir", cache});
  REQUIRE(stats.code == 0);
  CHECK(json::parse(stats.out).at("scores").get<int>() > 0);
  REQUIRE(spirit_run({"scan", "--in", at(d, "corpus.jsonl"), "--out", at(out, "scan.jsonl"), "--backend",
                      "ngram:" + at(d, "oracle.counts"), "--cache-dir", cache})
              .code == 0);
  CHECK(text::read_file(at(out, "scan.jsonl")) == cold);
  REQUIRE(spirit_run({"cache", "clear", "--cache-dir", cache}).code == 0);
  stats = spirit_run({"cache", "stats", "--cache-dir", cache});
  CHECK(json::parse(stats.out).at("scores") == 0);
}

}
