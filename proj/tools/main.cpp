// cleanbench CLI: evaluate data-cleaning strategies along glitch improvement,
// statistical distortion (EMD), and cost.
//
// Subcommands:
//   generate  write a synthetic dataset from the config's synth spec
//   audit     glitch percentages and per-time-index glitch counts
//   run       full replication experiment; emits results/summary/scatter CSVs
//   emd       statistical distortion between two dataset files

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "cleanbench/cli.hpp"
#include "cleanbench/config.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

cleanbench::RunConfig load_config(const CommonArgs& args) {
  cleanbench::RunConfig cfg = cleanbench::parse_run_config(args.config_path);
  if (args.seed_set) cfg.experiment.master_seed = args.seed;
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", args.seed, "master seed (overrides config)")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evaluate data-cleaning strategies: glitch improvement, "
               "statistical distortion, cost"};
  app.require_subcommand(1);

  CommonArgs gen_args, audit_args, run_args;
  CLI::App* gen = app.add_subcommand("generate", "write a synthetic dataset");
  add_common(gen, gen_args);
  CLI::App* audit = app.add_subcommand("audit", "report glitch percentages and counts");
  add_common(audit, audit_args);
  CLI::App* run = app.add_subcommand("run", "run the replication experiment");
  add_common(run, run_args);

  std::string emd_file_a, emd_file_b;
  int emd_bins = 8;
  CLI::App* emd = app.add_subcommand("emd", "statistical distortion between two files");
  emd->add_option("fileA", emd_file_a, "first dataset CSV")->required();
  emd->add_option("fileB", emd_file_b, "second dataset CSV")->required();
  emd->add_option("--bins", emd_bins, "bins per dimension")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      cleanbench::cmd_generate(load_config(gen_args));
      return 0;
    }
    if (audit->parsed()) {
      cleanbench::cmd_audit(load_config(audit_args));
      return 0;
    }
    if (run->parsed()) {
      return cleanbench::cmd_run(load_config(run_args));
    }
    if (emd->parsed()) {
      cleanbench::cmd_emd(emd_file_a, emd_file_b, emd_bins);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
