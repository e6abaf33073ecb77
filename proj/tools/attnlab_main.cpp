// Command-line front end. Every option maps onto a flat config key; a
// --config file is loaded first and flags override it.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attnlab/config.hpp"
#include "attnlab/harness.hpp"
#include "attnlab/version.hpp"

namespace {

using attnlab::KeyValueConfig;

struct PendingConfig {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;

  KeyValueConfig materialize() const {
    KeyValueConfig cfg = config_file.empty() ? KeyValueConfig{}
                                             : KeyValueConfig::from_file(config_file);
    for (const auto& [key, value] : overrides) cfg.set(key, value);
    return cfg;
  }
};

void add_option(CLI::App* cmd, PendingConfig& pending, const std::string& flag,
                const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&pending, key](const std::string& value) { pending.overrides.emplace_back(key, value); },
      help);
}

void add_flag(CLI::App* cmd, PendingConfig& pending, const std::string& flag,
              const std::string& key, const std::string& help) {
  cmd->add_flag_callback(
      flag, [&pending, key] { pending.overrides.emplace_back(key, "true"); }, help);
}

void add_common_options(CLI::App* cmd, PendingConfig& pending) {
  cmd->add_option("--config", pending.config_file, "flat key = value config file");
  add_option(cmd, pending, "--out", "out_dir", "output directory (default $ATTNLAB_OUT_DIR or .)");
  add_option(cmd, pending, "--prefix", "prefix", "output file prefix");
}

void add_model_options(CLI::App* cmd, PendingConfig& pending) {
  add_option(cmd, pending, "--mask", "mask",
             "complete|causal|sliding_window|unidirectional_sliding_window|custom");
  add_option(cmd, pending, "--n", "n", "token count");
  add_option(cmd, pending, "--window", "window", "window width for window masks");
  add_option(cmd, pending, "--file", "mask_file", "edge-list file for custom masks");
  add_option(cmd, pending, "--mode", "mode", "san|post_ln|pre_ln");
  add_option(cmd, pending, "--schedule", "schedule",
             "constant|random_bounded|random_orthogonal_value|zero_qk_jordan");
  add_option(cmd, pending, "--d", "d", "token dimension");
  add_option(cmd, pending, "--T", "T", "number of layers");
  add_option(cmd, pending, "--temperature", "temperature", "attention temperature d_QK");
  add_option(cmd, pending, "--qk-cap", "qk_cap", "spectral-norm cap for W_Q, W_K");
  add_option(cmd, pending, "--qk-scale", "qk_scale",
             "self-score scale of the constant schedule (0 = plain averaging)");
  add_option(cmd, pending, "--init", "init", "sphere|hemisphere|counterexample");
  add_option(cmd, pending, "--w", "w", "superdiagonal weight of the chain value matrix");
  add_option(cmd, pending, "--k", "k", "chain length (0 = full)");
  add_flag(cmd, pending, "--pre-ln-attention-from-normalized",
           "pre_ln_attention_from_normalized",
           "compute pre_ln attention scores from the normalized state");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attnlab: masked self-attention token dynamics laboratory"};
  app.set_version_flag("--version", attnlab::kVersionString);
  app.require_subcommand(1);

  PendingConfig mask_cfg, run_cfg, sweep_cfg, verify_cfg, eq_cfg;

  CLI::App* mask = app.add_subcommand("mask", "build and classify an attention mask");
  mask->add_option("--config", mask_cfg.config_file, "flat key = value config file");
  add_option(mask, mask_cfg, "--kind", "mask", "mask kind");
  add_option(mask, mask_cfg, "--n", "n", "token count");
  add_option(mask, mask_cfg, "--window", "window", "window width");
  add_option(mask, mask_cfg, "--file", "mask_file", "edge-list file (custom kind)");
  add_option(mask, mask_cfg, "--json", "json_out", "write classification JSON here");

  CLI::App* run = app.add_subcommand("run", "run one trajectory and export CSV + summary");
  add_common_options(run, run_cfg);
  add_model_options(run, run_cfg);
  add_option(run, run_cfg, "--seed", "seed", "experiment seed");
  add_option(run, run_cfg, "--snapshot-stride", "snapshot_stride",
             "record a state snapshot every this many steps");
  add_option(run, run_cfg, "--verify-theorem", "verify_theorem",
             "attach a bound verifier (1, 2 or cor1)");

  CLI::App* sweep = app.add_subcommand("sweep", "grid of trajectories with aggregation");
  add_common_options(sweep, sweep_cfg);
  add_model_options(sweep, sweep_cfg);
  add_option(sweep, sweep_cfg, "--masks", "masks", "comma-separated mask kinds");
  add_option(sweep, sweep_cfg, "--modes", "modes", "comma-separated modes");
  add_option(sweep, sweep_cfg, "--temperatures", "temperatures", "comma-separated d_QK grid");
  add_option(sweep, sweep_cfg, "--seed-list", "seeds", "comma-separated explicit seed list");
  add_option(sweep, sweep_cfg, "--seeds", "seed_count", "number of seeds (0..N-1)");
  add_option(sweep, sweep_cfg, "--threads", "threads", "worker threads");

  CLI::App* verify = app.add_subcommand("verify", "run a bound verifier over seeds");
  add_common_options(verify, verify_cfg);
  add_model_options(verify, verify_cfg);
  add_option(verify, verify_cfg, "--theorem", "theorem", "1|2|cor1|3");
  add_option(verify, verify_cfg, "--seed-list", "seeds", "comma-separated explicit seed list");
  add_option(verify, verify_cfg, "--seeds", "seed_count", "number of seeds (0..N-1)");

  CLI::App* eq = app.add_subcommand("equilibrium", "construct a fixed point of the "
                                                   "zero-QK causal LayerNorm dynamics");
  add_common_options(eq, eq_cfg);
  add_option(eq, eq_cfg, "--n", "n", "token count");
  add_option(eq, eq_cfg, "--d", "d", "token dimension");
  add_option(eq, eq_cfg, "--k", "k", "target rank");
  add_option(eq, eq_cfg, "--w", "w", "superdiagonal weight (> 1)");
  add_option(eq, eq_cfg, "--signs", "signs", "one '+'/'-' per free coordinate");
  add_option(eq, eq_cfg, "--full-chain", "full_chain",
             "pair with the full-length chain value matrix (true/false)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // CLI11 returns 0 for --help/--version; map parse failures to usage errors.
    return code == 0 ? 0 : attnlab::kExitUsage;
  }

  try {
    if (mask->parsed()) return attnlab::cmd_mask(mask_cfg.materialize(), std::cout);
    if (run->parsed()) return attnlab::cmd_run(run_cfg.materialize(), std::cout);
    if (sweep->parsed()) return attnlab::cmd_sweep(sweep_cfg.materialize(), std::cout);
    if (verify->parsed()) return attnlab::cmd_verify(verify_cfg.materialize(), std::cout);
    if (eq->parsed()) return attnlab::cmd_equilibrium(eq_cfg.materialize(), std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return attnlab::kExitUsage;
  }
  return attnlab::kExitUsage;
}
