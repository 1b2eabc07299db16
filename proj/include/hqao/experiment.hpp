#pragma once

#include <string>
#include <vector>

#include "hqao/config.hpp"
#include "hqao/hierarchy.hpp"
#include "hqao/report.hpp"

namespace hqao {

enum ExitCode { kExitOk = 0, kExitConfig = 1, kExitInvariant = 2, kExitInfeasible = 3 };

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"spectral", "lattice", "rgflow", "bounds", "betastar", "verify"};
  return s;
}

struct RunResult {
  int exit_code = kExitOk;
  std::string message;
  /// Paths written, data files first and <subcommand>.meta.json last.
  std::vector<std::string> files;
};

/// Runs cfg.subcommand and writes <out>/<subcommand>.csv, .json and
/// .meta.json. The meta file holds the timestamp and the effective config;
/// the CSV and JSON files depend only on the config.
///
/// CSV columns:
///   spectral: beta, u_hat0, eta, rigidity, x0, x0_bound, bounds_checked, bounds_pass
///   lattice:  observable, q_or_tau, mean, stderr, sweeps, seed
///   rgflow:   level, u_hat, u_hat_err, X, X_err, ess, diverged
///   bounds:   level, u_lo, u_hi, x_hi, regime
///   betastar: level, beta_minus, beta_plus (level = bounds.n_max for beta*)
///   verify:   name, lhs, rhs, margin, pass, gating
///
/// Exit codes: 1 for configuration or domain errors, 2 when an invariant
/// fails, 3 when the requested certificate or bracket is infeasible.
RunResult run_experiment(const ExperimentConfig& cfg);

/// Desk-scale invariants of every module with fixed seeds. Quartic checks
/// run only when model.b > 0. verify.mutation is applied to the lattice
/// construction.
BoundReport verify_suite(const ExperimentConfig& cfg);

HierarchyParams hierarchy_from(const ExperimentConfig& cfg);

}  // namespace hqao
