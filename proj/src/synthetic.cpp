#include "spirit/synthetic.hpp"

#include <algorithm>
#include <charconv>

#include "spirit/errors.hpp"
#include "spirit/hash.hpp"
#include "spirit/text.hpp"

namespace spirit::synth {

std::string Problem::question() const {
  return "Start with " + std::to_string(a) + ", add " + std::to_string(b) + ", multiply by " +
         std::to_string(c) + ", then subtract " + std::to_string(d) + ". What is the result?";
}

const std::vector<Problem>& all_problems() {
  static const std::vector<Problem> grid = [] {
    std::vector<Problem> out;
    for (int a = 1; a <= 9; ++a)
      for (int b = 1; b <= 9; ++b)
        for (int c = 2; c <= 5; ++c)
          for (int d = 1; d <= 9; ++d) out.push_back({a, b, c, d});
    return out;
  }();
  return grid;
}

Problem random_problem(std::mt19937_64& rng) {
  const auto& grid = all_problems();
  return grid[std::uniform_int_distribution<std::size_t>(0, grid.size() - 1)(rng)];
}

namespace {

// Reads the integer following `key` in `s`, starting at `pos`.
std::optional<int> int_after(std::string_view s, std::string_view key, std::size_t& pos) {
  const auto at = s.find(key, pos);
  if (at == std::string_view::npos) return std::nullopt;
  const char* first = s.data() + at + key.size();
  int v = 0;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc{}) return std::nullopt;
  pos = static_cast<std::size_t>(ptr - s.data());
  return v;
}

}  // namespace

std::optional<Problem> parse_question(std::string_view q) {
  std::size_t pos = 0;
  auto a = int_after(q, "Start with ", pos);
  auto b = int_after(q, ", add ", pos);
  auto c = int_after(q, ", multiply by ", pos);
  auto d = int_after(q, ", then subtract ", pos);
  if (!a || !b || !c || !d) return std::nullopt;
  return Problem{*a, *b, *c, *d};
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::filler: return "filler";
    case Role::start: return "start";
    case Role::add: return "add";
    case Role::multiply: return "multiply";
    case Role::subtract: return "subtract";
  }
  return "?";
}

std::optional<Role> role_of(std::string_view step) {
  step = text::trim(step);
  if (step.starts_with("Note:")) return Role::filler;
  if (step.starts_with("We start")) return Role::start;
  if (step.starts_with("Adding")) return Role::add;
  if (step.starts_with("Multiplying")) return Role::multiply;
  if (step.starts_with("Subtracting")) return Role::subtract;
  return std::nullopt;
}

const std::vector<std::string>& lexicon() {
  static const std::vector<std::string> words = {
      "amber", "birch",  "cobalt", "dune",   "ember",  "fjord", "garnet", "harbor",
      "indigo", "juniper", "kelp",  "lantern", "meadow", "nickel", "orchid", "pebble",
      "quartz", "ripple", "saffron", "thistle", "umber", "velvet", "willow", "zephyr"};
  return words;
}

std::string filler_step(std::mt19937_64& rng) {
  const auto& w = lexicon();
  std::uniform_int_distribution<std::size_t> pick(0, w.size() - 1);
  std::string out = "Note:";
  for (int i = 0; i < 4; ++i) out += " " + w[pick(rng)];
  return out + ".";
}

// Critical steps are mostly predictable words around one operand and one
// result, and each ends in a word that only ever precedes the next critical
// step, so dropping one leaves a transition the oracle has never seen.
std::string critical_step(Role role, const Problem& p, int value) {
  const auto n = [](int v) { return std::to_string(v); };
  switch (role) {
    case Role::start:
      return "We start with " + n(p.a) +
             " as the base value that all of the later steps in this calculation build upon.";
    case Role::add:
      return "Adding " + n(p.b) + " to the running total gives " + n(value + p.b) +
             " as the new sum.";
    case Role::multiply:
      return "Multiplying the running total by " + n(p.c) + " gives " + n(value * p.c) +
             " as the new product.";
    case Role::subtract:
      return "Subtracting " + n(p.d) + " from the running total gives " + n(value - p.d) +
             " as the final difference.";
    case Role::filler: break;
  }
  return {};
}

std::string answer_line(int value) { return "The answer is " + std::to_string(value); }

namespace {

int apply(Role role, const Problem& p, int value) {
  switch (role) {
    case Role::start: return p.a;
    case Role::add: return value + p.b;
    case Role::multiply: return value * p.c;
    case Role::subtract: return value - p.d;
    case Role::filler: break;
  }
  return value;
}

// Steps for `roles`; fillers draw their words from `filler`.
template <class FillerFn>
std::pair<std::vector<std::string>, int> replay(const Problem& p, const std::vector<Role>& roles,
                                                FillerFn&& filler) {
  std::vector<std::string> steps;
  int value = 0;
  for (Role r : roles) {
    if (r == Role::filler) {
      steps.push_back(filler(steps.size()));
      continue;
    }
    steps.push_back(critical_step(r, p, value));
    value = apply(r, p, value);
  }
  return {steps, value};
}

std::vector<Role> with_fillers(std::size_t n_fillers, std::mt19937_64& rng) {
  // Gap g sits before critical step g; gap 4 is after the last one.
  std::vector<std::size_t> per_gap(kCriticalRoles.size() + 1, 0);
  std::uniform_int_distribution<std::size_t> gap(0, kCriticalRoles.size());
  for (std::size_t i = 0; i < n_fillers; ++i) ++per_gap[gap(rng)];
  std::vector<Role> roles;
  for (std::size_t g = 0; g <= kCriticalRoles.size(); ++g) {
    roles.insert(roles.end(), per_gap[g], Role::filler);
    if (g < kCriticalRoles.size()) roles.push_back(kCriticalRoles[g]);
  }
  return roles;
}

}  // namespace

ReasoningSample sample_for_roles(const Problem& p, const std::vector<Role>& roles,
                                 std::mt19937_64& rng, std::string id) {
  auto [steps, value] = replay(p, roles, [&](std::size_t) { return filler_step(rng); });
  return make_sample(std::move(id), p.question(), steps, answer_line(value), std::to_string(value));
}

PlantedSample planted_sample(const Problem& p, std::size_t n_fillers, std::mt19937_64& rng,
                             std::string id) {
  const auto roles = with_fillers(n_fillers, rng);
  PlantedSample out{sample_for_roles(p, roles, rng, std::move(id)), {}};
  for (Role r : roles) out.is_filler.push_back(r == Role::filler);
  return out;
}

std::vector<PlantedSample> planted_corpus(std::size_t n, std::uint64_t seed, std::size_t max_fillers) {
  std::mt19937_64 rng(seed);
  std::vector<PlantedSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Problem p = random_problem(rng);
    const auto k = std::uniform_int_distribution<std::size_t>(0, max_fillers)(rng);
    char id[32];
    std::snprintf(id, sizeof id, "syn-%06zu", i);
    out.push_back(planted_sample(p, k, rng, id));
  }
  return out;
}

std::vector<std::string> training_documents(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> docs;
  for (const auto& p : all_problems()) {
    const auto k = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    const auto s = planted_sample(p, k, rng, "train").sample;
    docs.push_back("Q: " + s.question + "\nA: " + render_reasoning(s));
  }
  return docs;
}

NgramOptions oracle_options() {
  NgramOptions o;
  o.order = 2;
  o.alpha = 1e-200;  // unseen transitions cost about 460 nats
  o.add_unk = true;
  return o;
}

NgramOracle train_oracle(std::uint64_t seed) {
  return NgramOracle::train(training_documents(seed), oracle_options());
}

DemonstrationSet demo_set(std::size_t n_demos, const std::vector<Role>& roles, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ReasoningSample> demos;
  for (std::size_t i = 0; i < n_demos; ++i) {
    demos.push_back(sample_for_roles(random_problem(rng), roles, rng, "demo-" + std::to_string(i)));
  }
  std::vector<std::string> schema;
  for (Role r : roles) schema.emplace_back(to_string(r));
  return make_demo_set(std::move(demos), std::move(schema));
}

std::vector<ReasoningSample> eval_set(std::size_t n, std::uint64_t seed, std::string id_prefix) {
  std::mt19937_64 rng(seed);
  std::vector<ReasoningSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(sample_for_roles(random_problem(rng), kCriticalRoles, rng,
                                   id_prefix + "-" + std::to_string(i)));
  }
  return out;
}

std::string SchemaFollower::generate(std::string_view prompt, const GenParams& params) const {
  // The target question is the last "Q: " block.
  std::size_t qpos = prompt.rfind("\nQ: ");
  qpos = qpos == std::string_view::npos ? (prompt.starts_with("Q: ") ? 0 : qpos) : qpos + 1;
  if (qpos == std::string_view::npos) return " I do not know.";
  const auto qend = prompt.find("\nA:", qpos);
  const std::string_view question = prompt.substr(qpos + 3, qend == std::string_view::npos
                                                                  ? std::string_view::npos
                                                                  : qend - qpos - 3);
  const auto problem = parse_question(question);
  if (!problem) return " I do not know.";

  std::vector<Role> roles;
  const auto first = prompt.find("\nA: ");
  if (first != std::string_view::npos && first < qpos) {
    const auto end = prompt.find("\n\n", first);
    for (const auto& line : text::split_lines(prompt.substr(first + 4, end - first - 4))) {
      if (auto r = role_of(line)) roles.push_back(*r);
    }
  } else {
    roles = kCriticalRoles;
  }

  const std::string key(text::trim(question));
  auto [steps, value] = replay(*problem, roles, [&](std::size_t pos) {
    std::mt19937_64 rng(stable_hash64(key + "#" + std::to_string(pos)));
    return filler_step(rng);
  });
  steps.push_back(answer_line(value));
  std::string out = " " + text::join(steps, "\n") + "\n\nQ:";
  out = apply_stop(std::move(out), params.stop);
  if (params.max_tokens > 0) {
    const auto toks = text::split_whitespace(out);
    if (toks.size() > static_cast<std::size_t>(params.max_tokens)) {
      out = " " + text::join({toks.begin(), toks.begin() + params.max_tokens}, " ");
    }
  }
  return out;
}

std::vector<Role> parse_roles(std::string_view csv) {
  std::vector<Role> roles;
  for (const auto& raw : text::split_on(csv, ',')) {
    const auto t = text::trim(raw);
    bool found = false;
    for (auto r : {Role::filler, Role::start, Role::add, Role::multiply, Role::subtract}) {
      if (to_string(r) == t) {
        roles.push_back(r);
        found = true;
      }
    }
    if (!found) throw Error(ErrorCode::config_error, "unknown role '" + std::string(t) + "'");
  }
  return roles;
}

void write_file_set(const std::filesystem::path& dir, const FileSetOptions& opts) {
  std::filesystem::create_directories(dir);
  train_oracle(opts.seed).save((dir / "oracle.counts").string());
  std::string corpus;
  for (const auto& ps : planted_corpus(opts.samples, opts.seed + 1)) {
    auto j = sample_to_json(ps.sample);
    std::vector<std::size_t> fillers;
    for (std::size_t i = 0; i < ps.is_filler.size(); ++i) {
      if (ps.is_filler[i]) fillers.push_back(i);
    }
    j["filler_steps"] = fillers;
    corpus += j.dump() + "\n";
  }
  text::write_file((dir / "corpus.jsonl").string(), corpus);
  save_demo_set(demo_set(opts.demos, opts.roles, opts.seed + 2), (dir / "demos.json").string());
  save_samples(eval_set(opts.calib, opts.seed + 3, "calib"), (dir / "calib.jsonl").string());
  save_samples(eval_set(opts.test, opts.seed + 4, "test"), (dir / "test.jsonl").string());
}

}  // namespace spirit::synth
