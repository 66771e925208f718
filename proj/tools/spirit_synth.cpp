// Writes the synthetic arithmetic corpus and its n-gram oracle, for running
// the spirit commands end to end without a hosted model.
#include <iostream>

#include "CLI11.hpp"
#include "spirit/synthetic.hpp"

using namespace spirit;

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic corpus, demonstrations and oracle", "spirit_synth"};
  std::string out_dir;
  std::uint64_t seed = 1;
  std::size_t n_samples = 200, n_demos = 4, n_calib = 8, n_test = 50;
  std::string schema = "filler,start,add,filler,multiply,filler,subtract";
  app.add_option("--out-dir", out_dir, "destination directory")->required();
  app.add_option("--seed", seed, "seed for every generated file");
  app.add_option("--samples", n_samples, "planted fine-tuning samples");
  app.add_option("--demos", n_demos, "demonstrations");
  app.add_option("--calib", n_calib, "calibration questions");
  app.add_option("--test", n_test, "test questions");
  app.add_option("--schema", schema, "comma-separated demo step roles");
  CLI11_PARSE(app, argc, argv);

  try {
    synth::FileSetOptions opts;
    opts.seed = seed;
    opts.samples = n_samples;
    opts.demos = n_demos;
    opts.calib = n_calib;
    opts.test = n_test;
    opts.roles = synth::parse_roles(schema);
    synth::write_file_set(out_dir, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  std::cout << "wrote " << out_dir << "/{oracle.counts,corpus.jsonl,demos.json,calib.jsonl,test.jsonl}\n";
  return 0;
}
