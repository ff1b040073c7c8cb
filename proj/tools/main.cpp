#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "recdel/cli.hpp"

namespace {

recdel::RunConfig load(const std::string& config_path, const std::string& out_dir,
                       bool seed_set, std::uint64_t seed) {
  recdel::RunConfig cfg = config_path.empty()
                              ? recdel::RunConfig{}
                              : recdel::parse_run_config(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (seed_set) cfg.seed = seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recourse fragility under training-data deletion"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "Run configuration file (key = value lines)");
  app.add_option("--out-dir", out_dir, "Output directory (overrides output.dir)");
  app.add_option("--seed", seed, "Seed (overrides the config seed)")
      ->each([&](const std::string&) { seed_set = true; });

  auto* audit = app.add_subcommand(
      "audit", "Per-point instability and bound satisfaction for single deletions");
  auto* attack = app.add_subcommand(
      "attack", "Critical-set search and per-fold tradeoff curves");
  auto* sensitivity = app.add_subcommand(
      "sensitivity", "First-order counterfactual sensitivity validation");
  auto* ntk_check = app.add_subcommand(
      "ntk-check", "Monte-Carlo check of the arc-cosine kernel closed form");

  CLI11_PARSE(app, argc, argv);

  try {
    const recdel::RunConfig cfg = load(config_path, out_dir, seed_set, seed);
    if (audit->parsed()) return recdel::cmd_audit(cfg);
    if (attack->parsed()) return recdel::cmd_attack(cfg);
    if (sensitivity->parsed()) return recdel::cmd_sensitivity(cfg);
    if (ntk_check->parsed()) return recdel::cmd_ntk_check(cfg);
  } catch (const recdel::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const recdel::DataError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
