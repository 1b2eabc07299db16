#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hqao/hierarchy.hpp"
#include "hqao/numerics.hpp"
#include "hqao/spectral.hpp"

namespace hqao {

struct FlowOptions {
  int population = 100000;
  /// Independent sub-populations; errors are jackknifed over islands.
  int islands = 16;
  /// Modes |kappa| <= cutoff, stored as c_0, c_1^cos, c_1^sin, c_2^cos, ...
  int cutoff = 32;
  std::uint64_t seed = 1;
  /// Lattice initialisation for b > 0: time slices (0 picks the smallest
  /// power of two >= 4 cutoff), sweeps between samples, burn-in sweeps.
  int init_slices = 0;
  long init_thin = 4;
  long init_burn_in = 2000;
  /// Flow stops once ESS falls below ess_floor * population.
  double ess_floor = 0.1;
  /// Largest (theta/2)||omega||^2 accepted before a level counts as diverged.
  double log_weight_ceiling = 700.0;
  /// Parents enter with an independent random sign (mu_n is even).
  bool symmetrize = true;
};

/// Weighted population of Fourier-truncated paths at one level.
///
/// Island i owns particles [i P/I, (i+1) P/I) and its weights sum to 1/I,
/// so all weights sum to 1.
struct PathEnsemble {
  int level = 0;
  double beta = 1.0;
  double mass = 1.0;
  int cutoff = 32;
  int population = 0;
  int islands = 1;
  /// Row-major population x dim().
  std::vector<double> paths;
  std::vector<double> weights;
  /// Sum over islands of (sum w)^2 / sum w^2.
  double ess = 0.0;
  bool diverged = false;

  int dim() const { return 2 * cutoff + 1; }
  int island_size() const { return population / islands; }
  const double* path(int i) const { return paths.data() + static_cast<std::size_t>(i) * dim(); }
};

/// Matsubara frequency 2 pi kappa / beta of coefficient slot `slot`.
double mode_frequency(double beta, int slot);

/// Projection of a lattice path x_t (slice width beta/N) onto the basis
/// 1/sqrt(beta), sqrt(2/beta) cos(q t), -sqrt(2/beta) sin(q t).
std::vector<double> project_path(const std::vector<double>& x, double beta, int cutoff);

/// Level-0 population. b = 0 samples the exact Gaussian, mode variances
/// 1/(mass q^2 + a) (needs a > 0). b > 0 draws one level-0 lattice chain per
/// island and projects every sample. Throws DomainError for population
/// < 10^3 or not divisible by islands.
PathEnsemble init_level0(const ModelParams& model, const FlowOptions& opts = {});

/// omega = kappa^{-(1+delta)/2} (omega_1 + ... + omega_kappa) with parents drawn
/// weight-proportionally inside each island, then reweighting by
/// exp((theta/2)||omega||^2) and systematic resampling of islands whose ESS
/// drops below half their size. Throws DomainError when the input ESS is
/// below opts.ess_floor * population.
PathEnsemble rg_step(const PathEnsemble& in, const HierarchyParams& hier, std::uint64_t seed,
                     const FlowOptions& opts = {});

struct LevelEstimate {
  int level = 0;
  /// u_hat_n(q) for kappa = 0..min(cutoff, 8).
  std::vector<Estimate> u_hat_q;
  Estimate u_hat;
  Estimate x_n;
  /// Integrated U_2 and U_4 (cumulants of B = integral of omega).
  Estimate ursell2;
  Estimate ursell4;
  /// U_4 / U_2^2.
  Estimate ursell_ratio;
  double ess = 0.0;
  bool diverged = false;
  /// Upper bound kappa^{-n delta} beta^2 / (2 pi^2 mass cutoff) on the
  /// expected norm^2 carried by the dropped modes.
  double tail_bound = 0.0;
};

LevelEstimate estimate_level(const PathEnsemble& e, const HierarchyParams& hier);

struct FlowResult {
  std::vector<LevelEstimate> levels;
  /// First level whose ESS fell below the floor or that diverged; -1 if none.
  int collapse_level = -1;
  std::uint64_t seed = 0;
  int population = 0;
};

/// Levels 0..n_max, stopping at the first collapsed level (which is
/// reported). Seeds for level n come from seed_seq{seed, n}.
FlowResult flow_run(const ModelParams& model, const HierarchyParams& hier, int n_max, const FlowOptions& opts = {});

/// Columns: level, u_hat, u_hat_err, X, X_err, ess, diverged.
std::string to_csv(const FlowResult& r);
nlohmann::json to_json(const FlowResult& r);

}  // namespace hqao
