#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spirit/analysis.hpp"
#include "spirit/answer.hpp"
#include "spirit/cli.hpp"
#include "spirit/corpus.hpp"
#include "spirit/errors.hpp"
#include "spirit/merge.hpp"
#include "spirit/ngram.hpp"
#include "spirit/refine_ft.hpp"

namespace py = pybind11;
using namespace spirit;

namespace {

std::vector<std::pair<std::string, double>> score_pairs(const NgramOracle& m, const std::string& prompt,
                                                        const std::string& continuation) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& t : m.score(prompt, continuation).tokens) out.emplace_back(t.token, t.logprob);
  return out;
}

// JSON crosses the boundary as text; the Python layer decodes it.
std::string refine_json(const std::string& sample_json, const NgramOracle& oracle, double t1, double t2,
                        const std::string& strategy, const std::string& merge_policy, bool skip_first_token,
                        std::uint64_t seed, std::size_t min_steps) {
  const auto sample = sample_from_json(nlohmann::json::parse(sample_json), 1);
  FtConfig cfg;
  cfg.t1 = t1;
  cfg.t2 = t2;
  cfg.strategy = parse_strategy(strategy);
  cfg.merge_policy = parse_merge_policy(merge_policy);
  cfg.ppl.skip_first_token = skip_first_token;
  cfg.seed = seed;
  cfg.min_steps = min_steps;
  const RuleMerger merger;
  FtOutcome out;
  {
    py::gil_scoped_release release;
    out = refine_sample(sample, oracle, &merger, cfg);
  }
  return nlohmann::json{{"refined", sample_to_json(out.refined)}, {"trace", to_json(out.trace)}}.dump();
}

}  // namespace

PYBIND11_MODULE(_spirit, m) {
  static py::exception<Error> spirit_error(m, "SpiritError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      spirit_error(e.what());
    }
  });

  m.def(
      "perplexity",
      [](const std::vector<double>& logprobs, bool skip_first_token) {
        return perplexity(logprobs, PplConfig{skip_first_token});
      },
      py::arg("logprobs"), py::arg("skip_first_token") = true);
  m.def(
      "pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); },
      py::arg("x"), py::arg("y"));
  m.def(
      "pearson_p",
      [](double r, std::size_t n, const std::string& sided) { return pearson_p(r, n, parse_sided(sided)); },
      py::arg("r"), py::arg("n"), py::arg("sided") = "two");
  m.def("extract_answer", [](const std::string& s) { return extract_answer(s); });
  m.def("answers_match", [](const std::string& a, const std::string& b) { return answers_match(a, b); });
  m.def(
      "segment_steps",
      [](const std::string& text, const std::string& mode) {
        std::vector<std::string> out;
        for (const auto& s : segment_steps(text, parse_segment_mode(mode))) out.push_back(s.text);
        return out;
      },
      py::arg("text"), py::arg("mode") = "newline");

  py::class_<NgramOracle>(m, "NgramOracle")
      .def_static(
          "train",
          [](const std::vector<std::string>& docs, int order, double alpha, bool add_unk) {
            NgramOptions o;
            o.order = order;
            o.alpha = alpha;
            o.add_unk = add_unk;
            return NgramOracle::train(docs, o);
          },
          py::arg("documents"), py::arg("order") = 2, py::arg("alpha") = 1.0, py::arg("add_unk") = false)
      .def_static("load", &NgramOracle::load)
      .def_static("parse", [](const std::string& text) { return NgramOracle::parse(text); })
      .def("serialize", &NgramOracle::serialize)
      .def_property_readonly("order", &NgramOracle::order)
      .def_property_readonly("alpha", &NgramOracle::alpha)
      .def("score", &score_pairs, py::arg("prompt"), py::arg("continuation"))
      .def(
          "generate",
          [](const NgramOracle& o, const std::string& prompt, int max_tokens) {
            GenParams p;
            p.max_tokens = max_tokens;
            return o.generate(prompt, p);
          },
          py::arg("prompt"), py::arg("max_tokens") = 32);

  m.def("_refine_sample", &refine_json, py::arg("sample_json"), py::arg("oracle"), py::arg("t1"), py::arg("t2"),
        py::arg("strategy"), py::arg("merge_policy"), py::arg("skip_first_token"), py::arg("seed"),
        py::arg("min_steps"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args, const std::map<std::string, std::string>& env) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, env, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), py::arg("env") = std::map<std::string, std::string>{});
}
