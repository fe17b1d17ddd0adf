#include <algorithm>
#include <cstdio>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agscan/errors.hpp"
#include "agscan/experiment.hpp"
#include "agscan/pipeline.hpp"
#include "agscan/version.hpp"

namespace {

// Exit codes: 0 success, 1 usage, 2 data/validation, 3 numeric failure.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  bool random_init = false;
  std::string word_variant;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path,
                  "Experiment config file, or a previous run's manifest.json")
      ->required();
  cmd->add_option("--seed", flags.seed, "Master seed (overrides the config)")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--jobs", flags.jobs, "Worker threads for probe and sweep");
  cmd->add_flag("--random-init", flags.random_init,
                "Probe randomly initialized weights instead of trained ones");
  cmd->add_option("--word-variant", flags.word_variant,
                  "Stimulus word set (overrides the config)")
      ->check(CLI::IsMember({"original", "short", "both"}));
  cmd->add_option("--out", flags.out_dir, "Output directory (overrides the config)");
}

agscan::Runner make_runner(const CommonFlags& flags) {
  agscan::ExperimentConfig cfg = agscan::load_config(flags.config_path);
  if (flags.seed_set) cfg.seed = flags.seed;
  if (!flags.word_variant.empty()) cfg.stimuli.word_variant = flags.word_variant;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  return agscan::Runner(std::move(cfg), flags.jobs, flags.random_init);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Locate syntactic-agreement neurons in a toy transformer by counterfactual "
      "activation overrides"};
  app.set_version_flag("--version", std::string(agscan::kVersion));
  app.require_subcommand(1);

  CommonFlags flags;
  CLI::App* train = app.add_subcommand("train", "Build the training corpus and train the model");
  CLI::App* gen = app.add_subcommand("gen-stimuli", "Generate the probe stimuli");
  CLI::App* probe = app.add_subcommand("probe", "Compute per-neuron indirect effects");
  CLI::App* sweep = app.add_subcommand("sweep", "Cumulative top-m intervention curves");
  CLI::App* overlap =
      app.add_subcommand("overlap", "Top-neuron overlap matrix with permutation p-values");
  CLI::App* contours = app.add_subcommand("contours", "Per-layer mean NIE contours");
  CLI::App* oracle = app.add_subcommand(
      "oracle-check", "Run the intervention-engine oracles and print PASS/FAIL per property");
  CLI::App* report =
      app.add_subcommand("report", "Bundle plot-ready tables from a completed run");
  for (CLI::App* cmd : {train, gen, probe, sweep, overlap, contours, oracle, report})
    add_common(cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    agscan::Runner runner = make_runner(flags);
    if (train->parsed()) {
      runner.cmd_train();
    } else if (gen->parsed()) {
      runner.cmd_gen_stimuli();
    } else if (probe->parsed()) {
      runner.cmd_probe();
    } else if (sweep->parsed()) {
      runner.cmd_sweep();
    } else if (overlap->parsed()) {
      runner.cmd_overlap();
    } else if (contours->parsed()) {
      runner.cmd_contours();
    } else if (oracle->parsed()) {
      return runner.cmd_oracle_check() ? kExitOk : kExitNumeric;
    } else if (report->parsed()) {
      runner.cmd_report();
    }
    return kExitOk;
  } catch (const agscan::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}
