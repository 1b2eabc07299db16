#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hqao/spectral.hpp"

namespace hqao {

inline constexpr int kSchemaVersion = 1;

/// Everything an experiment run needs. Read from a YAML mapping with one
/// block per section:
///
///   schema_version: 1
///   out: out
///   hierarchy: {kappa: 2, delta: 0.25, coupling: normalized}
///   model: {mass: 1, a: -1, b: 0.5, beta: 1, beta_grid: [0.5, 1, 2]}
///   mc: {level: 0, slices: 64, sweeps: 20000, chains: 1, threads: 1, seed: 1}
///   rg: {population: 100000, cutoff: 32, n_max: 6, islands: 16, seed: 1}
///   bounds: {epsilon: 0.05, tol: 1e-4, n_max: 400, levels: 12, gamma: 10, margin: 2}
///   verify: {mutation: none}
///
/// Precedence is flag > environment (HQAO_<SECTION>_<KEY>, e.g.
/// HQAO_MODEL_MASS; HQAO_OUT for the top-level key) > file > defaults.
struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string subcommand;
  std::string out = "out";

  struct Hierarchy {
    int kappa = 2;
    double delta = 0.25;
    /// normalized (theta = kappa^delta - 1) or decoupled (theta = 0).
    std::string coupling = "normalized";
  } hierarchy;

  ModelParams model{1.0, -1.0, 0.5, 1.0};
  /// Empty means {model.beta}.
  std::vector<double> beta_grid;

  struct Mc {
    int level = 0;
    int slices = 64;
    long sweeps = 20000;
    int chains = 1;
    int threads = 1;
    std::uint64_t seed = 1;
  } mc;

  struct Rg {
    int population = 100000;
    int cutoff = 32;
    int n_max = 6;
    int islands = 16;
    std::uint64_t seed = 1;
  } rg;

  struct Bounds {
    double epsilon = 0.05;
    /// Largest accepted relative width of the beta* bracket.
    double tol = 1e-4;
    int n_max = 400;
    int levels = 12;
    double gamma = 10.0;
    double margin = 2.0;
  } bounds;

  struct Verify {
    /// none or lambda_off_by_one.
    std::string mutation = "none";
  } verify;

  std::vector<double> betas() const { return beta_grid.empty() ? std::vector<double>{model.beta} : beta_grid; }
};

/// Dotted keys ("model.mass", "out") in schema order.
std::vector<std::string> config_keys();

/// Sets one dotted key from text. Throws ConfigError for unknown keys and
/// unparsable values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& cfg, const std::string& key);

/// Parses YAML text. Errors carry the offending line. A missing or
/// different schema_version is an error.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Applies HQAO_* variables found by `getenv` (defaults to std::getenv).
void apply_env_overrides(ExperimentConfig& cfg,
                         const std::function<const char*(const char*)>& getenv = nullptr);

/// Range checks on every field; throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

/// YAML text that parse_config reads back to an identical config.
std::string to_yaml(const ExperimentConfig& cfg);

}  // namespace hqao
