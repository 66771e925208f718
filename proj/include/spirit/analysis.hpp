#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "spirit/corpus.hpp"
#include "spirit/refine_fs.hpp"
#include "spirit/scoring.hpp"

namespace spirit {

// two: either direction; less: negative correlation hypothesised;
// greater: positive correlation hypothesised.
enum class Sided { two, less, greater };
std::string_view to_string(Sided s);
Sided parse_sided(std::string_view s);

double pearson(std::span<const double> xs, std::span<const double> ys);
double pearson_p(double r, std::size_t n, Sided sided = Sided::two);

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  Sided sided = Sided::two;
};

CorrelationResult correlate(std::span<const double> xs, std::span<const double> ys,
                            Sided sided = Sided::two);

struct TradeoffPoint {
  std::string label;
  std::size_t n_correct = 0;
  std::size_t n_eval = 0;
  double mean_tokens = 0.0;
  TokenSource token_source = TokenSource::whitespace;

  double accuracy() const {
    return n_eval == 0 ? 0.0 : static_cast<double>(n_correct) / static_cast<double>(n_eval);
  }
  bool operator==(const TradeoffPoint&) const = default;
};

struct EvalConfig {
  std::string label = "eval";
  GenParams gen = FsConfig::default_gen_params();
  const Scorer* tokenizer = nullptr;  // token counts; whitespace when absent
  std::size_t parallelism = 1;
  bool strict = false;
};

struct EvalRecord {
  std::string id;
  std::optional<std::string> predicted;
  bool correct = false;
  std::size_t tokens = 0;
  std::optional<std::string> error;
};

struct EvalResult {
  TradeoffPoint point;
  std::vector<EvalRecord> records;  // test-set order
};

// demos == nullptr evaluates the zero-shot prompt.
EvalResult evaluate(const DemonstrationSet* demos, const std::vector<ReasoningSample>& test,
                    const Generator& generator, const EvalConfig& cfg);

struct StudyConfig {
  FsConfig fs;                                   // generation and perplexity settings
  const Generator* accuracy_generator = nullptr;  // defaults to the scoring-side generator
  Sided sided = Sided::two;
};

struct StudyPoint {
  std::vector<std::size_t> removed;  // schema indices
  double mean_ppl = 0.0;
  double accuracy = 0.0;
};

struct StudyResult {
  std::vector<StudyPoint> points;
  std::optional<CorrelationResult> correlation;
  std::optional<std::string> correlation_error;
};

StudyResult correlation_study(const DemonstrationSet& demos,
                              const std::vector<ReasoningSample>& questions,
                              const std::vector<std::vector<std::size_t>>& removal_plan,
                              const Generator& generator, const Scorer& scorer,
                              const StudyConfig& cfg);

inline constexpr const char* kReportHeader = "label,accuracy,mean_tokens,n_eval,token_source";
std::string render_report(std::vector<TradeoffPoint> points);
std::vector<TradeoffPoint> parse_report(std::string_view csv);
void write_report(const std::vector<TradeoffPoint>& points, const std::string& path);

nlohmann::json to_json(const TradeoffPoint& p);
nlohmann::json to_json(const CorrelationResult& c);
nlohmann::json to_json(const StudyResult& s);

}  // namespace spirit
