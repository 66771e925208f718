#include "spirit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <boost/math/special_functions/beta.hpp>

#include "spirit/answer.hpp"
#include "spirit/errors.hpp"
#include "spirit/parallel.hpp"
#include "spirit/text.hpp"

namespace spirit {

using nlohmann::json;

std::string_view to_string(Sided s) {
  switch (s) {
    case Sided::two: return "two";
    case Sided::less: return "less";
    case Sided::greater: return "greater";
  }
  return "?";
}

Sided parse_sided(std::string_view s) {
  if (s == "two") return Sided::two;
  if (s == "less") return Sided::less;
  if (s == "greater") return Sided::greater;
  throw Error(ErrorCode::config_error, "sided must be two, less or greater");
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::invalid_input, "pearson: length mismatch");
  const std::size_t n = xs.size();
  if (n < 3) throw Error(ErrorCode::invalid_input, "pearson: need at least 3 pairs");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::invalid_input, "pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson_p(double r, std::size_t n, Sided sided) {
  if (n < 3) throw Error(ErrorCode::invalid_input, "pearson_p: need n >= 3");
  if (!(std::abs(r) <= 1.0)) throw Error(ErrorCode::invalid_input, "pearson_p: |r| > 1");
  double two;
  if (std::abs(r) == 1.0) {
    two = 0.0;
  } else {
    // With t = r*sqrt(df/(1-r^2)), df/(df+t^2) reduces to 1-r^2.
    const double df = double(n - 2);
    two = boost::math::ibeta(df / 2.0, 0.5, 1.0 - r * r);
  }
  if (sided == Sided::two) return two;
  const bool on_side = sided == Sided::less ? r <= 0.0 : r >= 0.0;
  return on_side ? two / 2.0 : 1.0 - two / 2.0;
}

CorrelationResult correlate(std::span<const double> xs, std::span<const double> ys, Sided sided) {
  CorrelationResult c;
  c.r = pearson(xs, ys);
  c.n = xs.size();
  c.sided = sided;
  c.p_value = pearson_p(c.r, c.n, sided);
  return c;
}

EvalResult evaluate(const DemonstrationSet* demos, const std::vector<ReasoningSample>& test,
                    const Generator& generator, const EvalConfig& cfg) {
  if (test.empty()) throw Error(ErrorCode::invalid_input, "evaluation set is empty");
  EvalResult out;
  out.records.resize(test.size());
  std::vector<TokenSource> sources(test.size(), TokenSource::backend);
  parallel_for(test.size(), cfg.parallelism, [&](std::size_t i) {
    EvalRecord& rec = out.records[i];
    rec.id = test[i].id;
    try {
      const std::string gen =
          apply_stop(generator.generate(build_fewshot_prompt(demos, test[i].question), cfg.gen),
                     cfg.gen.stop);
      const TokenCount tc = count_tokens(gen, cfg.tokenizer);
      rec.tokens = tc.count;
      sources[i] = tc.source;
      rec.predicted = extract_answer(gen);
      rec.correct = rec.predicted && answers_match(*rec.predicted, test[i].answer_value);
    } catch (const Error& e) {
      if (cfg.strict) throw;
      rec.error = e.what();
      sources[i] = cfg.tokenizer ? TokenSource::backend : TokenSource::whitespace;
    }
  });

  TradeoffPoint& p = out.point;
  p.label = cfg.label;
  p.n_eval = test.size();
  p.token_source = cfg.tokenizer ? TokenSource::backend : TokenSource::whitespace;
  double tokens = 0;
  std::size_t generated = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& rec = out.records[i];
    if (rec.correct) ++p.n_correct;
    if (sources[i] == TokenSource::whitespace) p.token_source = TokenSource::whitespace;
    if (!rec.error) {
      tokens += double(rec.tokens);
      ++generated;
    }
  }
  p.mean_tokens = generated ? tokens / double(generated) : 0.0;
  return out;
}

StudyResult correlation_study(const DemonstrationSet& demos,
                              const std::vector<ReasoningSample>& questions,
                              const std::vector<std::vector<std::size_t>>& removal_plan,
                              const Generator& generator, const Scorer& scorer,
                              const StudyConfig& cfg) {
  validate(demos);
  CalibrationSet calib;
  for (const auto& q : questions) calib.questions.push_back(q.question);
  EvalConfig ecfg;
  ecfg.gen = cfg.fs.gen;
  ecfg.parallelism = cfg.fs.parallelism;
  ecfg.strict = cfg.fs.strict;
  const Generator& acc_gen = cfg.accuracy_generator ? *cfg.accuracy_generator : generator;

  StudyResult out;
  for (const auto& subset : removal_plan) {
    std::vector<std::size_t> idx = subset;
    std::sort(idx.begin(), idx.end(), std::greater<>());
    if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) {
      throw Error(ErrorCode::invalid_input, "removal subset repeats an index");
    }
    DemonstrationSet reduced = demos;
    for (std::size_t j : idx) {
      if (j >= reduced.schema_len() || reduced.schema_len() <= 1) {
        throw Error(ErrorCode::invalid_input, "removal subset out of range for the schema");
      }
      reduced = remove_schema_step(reduced, j);
    }
    StudyPoint pt;
    std::sort(idx.begin(), idx.end());
    pt.removed = idx;
    pt.mean_ppl = eval_demo_set(reduced, calib, generator, scorer, cfg.fs).mean_ppl;
    pt.accuracy = evaluate(&reduced, questions, acc_gen, ecfg).point.accuracy();
    out.points.push_back(std::move(pt));
  }
  std::vector<double> xs, ys;
  for (const auto& p : out.points) {
    xs.push_back(p.mean_ppl);
    ys.push_back(p.accuracy);
  }
  try {
    out.correlation = correlate(xs, ys, cfg.sided);
  } catch (const Error& e) {
    out.correlation_error = e.what();
  }
  return out;
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ParseError(rows.size() + 1, "unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_number(const std::string& s, std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, "not a number: '" + s + "'");
  }
}

}  // namespace

std::string render_report(std::vector<TradeoffPoint> points) {
  if (points.empty()) throw Error(ErrorCode::invalid_input, "report needs at least one point");
  std::stable_sort(points.begin(), points.end(),
                   [](const auto& a, const auto& b) { return a.mean_tokens < b.mean_tokens; });
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& p : points) {
    out += csv_field(p.label) + "," + text::format_double(p.accuracy()) + "," +
           text::format_double(p.mean_tokens) + "," + std::to_string(p.n_eval) + "," +
           std::string(to_string(p.token_source)) + "\n";
  }
  return out;
}

std::vector<TradeoffPoint> parse_report(std::string_view csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty() || text::join(rows.front(), ",") != kReportHeader) {
    throw ParseError(1, std::string("expected header '") + kReportHeader + "'");
  }
  std::vector<TradeoffPoint> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5) throw ParseError(i + 1, "expected 5 fields");
    TradeoffPoint p;
    p.label = r[0];
    const double acc = parse_number(r[1], i + 1);
    p.mean_tokens = parse_number(r[2], i + 1);
    const double n = parse_number(r[3], i + 1);
    if (n < 0 || n != std::floor(n)) throw ParseError(i + 1, "n_eval must be a whole number");
    p.n_eval = static_cast<std::size_t>(n);
    p.n_correct = static_cast<std::size_t>(std::llround(acc * n));
    p.token_source = parse_token_source(r[4]);
    out.push_back(std::move(p));
  }
  return out;
}

void write_report(const std::vector<TradeoffPoint>& points, const std::string& path) {
  text::write_file(path, render_report(points));
}

json to_json(const TradeoffPoint& p) {
  return json{{"label", p.label},           {"accuracy", p.accuracy()},
              {"n_correct", p.n_correct},   {"n_eval", p.n_eval},
              {"mean_tokens", p.mean_tokens}, {"token_source", to_string(p.token_source)}};
}

json to_json(const CorrelationResult& c) {
  return json{{"r", c.r}, {"p_value", c.p_value}, {"n", c.n}, {"sided", to_string(c.sided)}};
}

json to_json(const StudyResult& s) {
  json j;
  j["points"] = json::array();
  for (const auto& p : s.points) {
    j["points"].push_back({{"removed", p.removed}, {"mean_ppl", p.mean_ppl}, {"accuracy", p.accuracy}});
  }
  if (s.correlation) j["correlation"] = to_json(*s.correlation);
  if (s.correlation_error) j["correlation_error"] = *s.correlation_error;
  return j;
}

}  // namespace spirit
