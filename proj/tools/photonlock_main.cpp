// Command-line front end: run, validate and batch-run experiment configs.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "photonlock/cli.hpp"

int main(int argc, char** argv) {
  using namespace photonlock;

  CLI::App app{"Photon-counting phase stabilization simulator"};
  app.require_subcommand(1);

  RunOptions options;
  std::uint64_t seed = 0;
  std::string config_path, output_dir, out_root;
  std::vector<std::string> batch_configs;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("output", output_dir,
                  "Output directory (default: output.dir, else $PHOTONLOCK_OUT_ROOT/<config name>)");
  auto* run_seed = run->add_option("--seed", seed, "Override the config's seed");
  run->add_flag("--quiet,-q", options.quiet, "Print nothing on success");

  auto* validate = app.add_subcommand("validate", "Check a config file without running it");
  validate->add_option("config", config_path, "Config file")->required();

  auto* batch = app.add_subcommand("batch", "Run several configs in parallel");
  batch->add_option("configs", batch_configs, "Config files")->required();
  batch->add_option("--jobs,-j", jobs, "Parallel jobs")->check(CLI::PositiveNumber);
  batch->add_option("--out-root", out_root, "Output root (default: $PHOTONLOCK_OUT_ROOT or out)");
  auto* batch_seed = batch->add_option("--seed", seed, "Override every config's seed");
  batch->add_flag("--quiet,-q", options.quiet, "Print nothing on success");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  if (*run_seed || *batch_seed) options.seed = seed;
  if (*run) return cmd_run(config_path, output_dir, options, std::cout, std::cerr);
  if (*validate) return cmd_validate(config_path, std::cout, std::cerr);
  std::vector<std::filesystem::path> paths(batch_configs.begin(), batch_configs.end());
  return cmd_batch(paths, out_root, jobs, options, std::cout, std::cerr);
}
