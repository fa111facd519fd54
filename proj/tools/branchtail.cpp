// Experiment driver: classify a model, estimate left tails by Monte Carlo,
// evaluate Laplace transforms, or verify fitted rates against predictions.

#include <CLI11.hpp>
#include <filesystem>
#include <string>

#include "branchtail/branchtail.hpp"

int main(int argc, char** argv) {
  CLI::App app{"left-tail analysis of branching-process martingale limits"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_dir = ".";
  unsigned threads = 0;
  std::uint64_t seed = 0;
  std::uint64_t replicates = 0;
  bool have_seed = false, have_replicates = false;

  auto add_common = [&](CLI::App* cmd, const char* arg_desc) {
    cmd->add_option("spec", spec_path, arg_desc)->required();
    cmd->add_option("--out-dir", out_dir, "artifact directory (default .)");
    cmd->add_option("--threads", threads,
                    "worker threads; never affects output values (0 = hardware)");
    cmd->add_option("--seed", seed, "override the spec's master seed")
        ->each([&](const std::string&) { have_seed = true; });
    cmd->add_option("--replicates", replicates, "override the spec's replicate count")
        ->each([&](const std::string&) { have_replicates = true; });
  };

  CLI::App* c_classify = app.add_subcommand("classify", "report the regime and its rates");
  CLI::App* c_tail = app.add_subcommand("tail", "Monte Carlo left-tail curve and rate fit");
  CLI::App* c_laplace = app.add_subcommand("laplace", "transform curve and rate fit");
  CLI::App* c_verify =
      app.add_subcommand("verify", "fitted-vs-predicted check for a spec or a suite directory");
  add_common(c_classify, "experiment spec file");
  add_common(c_tail, "experiment spec file");
  add_common(c_laplace, "experiment spec file");
  add_common(c_verify, "experiment spec file or suite directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? branchtail::kExitParse : 0;
  }

  branchtail::RunOptions opts;
  opts.out_dir = out_dir;
  opts.threads = threads;
  if (have_seed) opts.seed_override = seed;
  if (have_replicates) opts.replicates_override = replicates;

  if (c_classify->parsed()) opts.pipeline_override = branchtail::Pipeline::classify;
  if (c_tail->parsed()) opts.pipeline_override = branchtail::Pipeline::tail;
  if (c_laplace->parsed()) opts.pipeline_override = branchtail::Pipeline::laplace;
  if (c_verify->parsed()) {
    if (std::filesystem::is_directory(spec_path)) return branchtail::verify_all(spec_path, opts);
    opts.pipeline_override = branchtail::Pipeline::verify;
  }
  return branchtail::run(spec_path, opts);
}
