#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hqao/config.hpp"
#include "hqao/errors.hpp"
#include "hqao/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> sets;
};

hqao::ExperimentConfig resolve(const std::string& sub, const Flags& f) {
  hqao::ExperimentConfig cfg = f.config.empty() ? hqao::ExperimentConfig{} : hqao::load_config(f.config);
  hqao::apply_env_overrides(cfg);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw hqao::ConfigError("--set expects key=value, got '" + kv + "'");
    hqao::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.out) cfg.out = *f.out;
  if (f.seed) {
    cfg.mc.seed = *f.seed;
    cfg.rg.seed = *f.seed;
  }
  if (f.threads) cfg.mc.threads = *f.threads;
  cfg.subcommand = sub;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical quantum anharmonic oscillator experiments"};
  app.require_subcommand(1);
  Flags flags;
  bool print_config = false;

  for (const auto& name : hqao::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", flags.config, "YAML config file")->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--seed", flags.seed, "Seed for mc and rg (overrides config)");
    sub->add_option("--threads", flags.threads, "MC worker threads");
    sub->add_option("--set", flags.sets, "Override a config key, e.g. --set model.mass=2")->take_all();
    sub->add_flag("--print-config", print_config, "Print the effective config and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hqao::kExitConfig;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  hqao::ExperimentConfig cfg;
  try {
    cfg = resolve(sub, flags);
    hqao::validate_config(cfg);
  } catch (const hqao::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return hqao::kExitConfig;
  }
  if (print_config) {
    std::cout << hqao::to_yaml(cfg);
    return hqao::kExitOk;
  }

  const auto r = hqao::run_experiment(cfg);
  for (const auto& f : r.files) std::cout << f << "\n";
  if (r.exit_code != hqao::kExitOk) std::cerr << sub << ": " << r.message << "\n";
  return r.exit_code;
}
