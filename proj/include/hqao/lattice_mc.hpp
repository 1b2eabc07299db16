#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <json.hpp>

#include "hqao/hierarchy.hpp"
#include "hqao/numerics.hpp"
#include "hqao/report.hpp"
#include "hqao/spectral.hpp"
#include "hqao/ursell.hpp"

namespace hqao {

/// Deliberate construction faults used to confirm that the verification
/// suite can fail.
enum class LatticeMutation { none, lambda_off_by_one };

/// Classical phi^4 model on Lambda_n x {0..N-1} (periodic in time).
///
/// With h = beta/N the action is
///   sum_t h [ sum_i (a/2 x^2 + b x^4) + (1/2) x_t^T M x_t ]
///   + sum_{i,t} (bond/2) (x_{i,t+1} - x_{i,t})^2,
/// where M is coupling_matrix(n) and bond = mass/h. The reference Gaussian
/// (mass, diagonal 1) has temporal symbol 1/lambda_q^(N); the remaining
/// (a - 1)/2 x^2 is folded into the diagonal so the total is the physical a.
/// Sites are stored slice-major per spatial site: index i * N + t.
struct LatticeModel {
  int level = 0;
  int slices = 0;
  HierarchyParams hier;
  ModelParams model;
  std::uint64_t spatial_sites = 1;
  std::uint64_t site_count = 0;
  double slice_width = 0.0;
  double bond = 0.0;
  /// h a and h b: the per-site quadratic diagonal and quartic weight.
  double quadratic_diag = 0.0;
  double quartic_coeff = 0.0;
  /// theta kappa^{-m(1+delta)}, m = 1..level.
  std::vector<double> level_weights;
  LatticeMutation mutation = LatticeMutation::none;

  /// kappa^{-n(1+delta)/2}, the normalization of the fluctuation variable.
  double fluctuation_scale() const;
  /// Full Hessian of the quadratic part. Throws RangeError above
  /// kMaxQuadraticFormSites.
  Eigen::SparseMatrix<double> quadratic_form() const;
};

inline constexpr std::uint64_t kMaxLatticeSites = 100000;
inline constexpr std::uint64_t kMaxQuadraticFormSites = 20000;

/// Throws DomainError unless N is even and >= 2, RangeError above
/// kMaxLatticeSites.
LatticeModel build_lattice_model(int n, int N, const HierarchyParams& hier, const ModelParams& model,
                                 LatticeMutation mutation = LatticeMutation::none);

/// lambda_q^(N) = 1 / (mass (2N/beta)^2 sin^2(beta q / 2N) + 1).
double lambda_q(int N, double beta, double mass, double q);

/// 1 / (Fourier symbol of the model's temporal chain + 1) at frequency q,
/// read off the stored bond. Equals lambda_q unless the model is mutated.
double temporal_symbol(const LatticeModel& model, double q);

struct MCOptions {
  long sweeps = 20000;
  /// 0 selects max(1000, sweeps / 10).
  long burn_in = 0;
  int batches = 32;
  int chains = 1;
  int threads = 1;
  std::uint64_t seed = 1;
  /// Fourier modes kappa = 0..q_modes-1 for u_hat.
  int q_modes = 8;
  /// Block and ring shift moves plus the global sign flip.
  bool collective_moves = true;
  double target_acceptance = 0.5;
};

/// Estimates with jackknife errors over all batches of all chains.
struct MCEstimates {
  std::vector<double> q;
  std::vector<Estimate> u_hat;
  /// tau = j h for j = 0..N.
  std::vector<double> tau;
  std::vector<Estimate> gamma2;
  Estimate x_n;
  Estimate ursell4_integrated;
  /// Integrated U_2, U_4, U_6, U_8 (cumulants of B = integral of Q).
  std::vector<Estimate> ursell;

  /// Inequality diagnostics at lags k (in slices), averaged over t:
  /// gks = <Q_t^3 Q_{t+k}> - <Q_t^2><Q_t Q_{t+k}>,
  /// u4_pair = U4(t,t,t+k,t+k), u4_triple = U4(t,t,t,t+k), and
  /// corr = int U4(t,t+k,.,.) - int U4(t,t,.,.).
  std::vector<int> lags;
  std::vector<Estimate> gks;
  std::vector<Estimate> u4_pair;
  std::vector<Estimate> u4_triple;
  std::vector<Estimate> corr;

  long sweeps = 0;
  std::uint64_t seed = 0;
  int batches = 0;
  int chains = 0;
  double acceptance = 0.0;
  double shift_acceptance = 0.0;
  /// Integrated autocorrelation time of B^2, in sweeps.
  double tau_int = 0.0;

  UrsellTable ursell_table() const;
};

/// Throws DomainError for sweeps < 10^4 or b < 0 and TuningError when the
/// local acceptance rate after tuning lies outside [0.2, 0.8].
MCEstimates mc_estimate(const LatticeModel& model, const MCOptions& opts = {});

/// `count` fluctuation paths Q_t, t = 0..N-1, from a single chain seeded
/// with `seed`, one every `thin` sweeps after burn-in (opts.burn_in, or 1000
/// when 0). Only the move settings of `opts` are used. Throws TuningError
/// like mc_estimate.
std::vector<std::vector<double>> mc_sample_paths(const LatticeModel& model, long count, long thin,
                                                 std::uint64_t seed, const MCOptions& opts = {});

/// GKS, Gaussian upper bound (U4 <= 0 at the two coincidence patterns) and
/// the correlation inequality, each with n_sigma standard errors of slack.
BoundReport mc_inequality_report(const MCEstimates& est, double n_sigma = 3.0);

/// Exact Gaussian (b = 0) continuum reference.
struct GaussianOracle {
  double u_hat = 0.0;
  std::vector<double> tau;
  std::vector<double> gamma2;
};

/// u_hat_n(q) = kappa^{-n(1+delta)} 1^T [(mass q^2 + a) I + M]^{-1} 1 by LDLT,
/// and Gamma_2 on `tau_points` equally spaced points of [0, beta]. Throws
/// DomainError for b != 0 and StabilityError when the form is not positive
/// definite.
GaussianOracle gaussian_oracle(int n, const HierarchyParams& hier, const ModelParams& model, double q,
                               int tau_points = 65);

/// Continuum Gaussian Gamma_2(0, tau). Only the uniform mode of M couples to
/// Q, so this is kappa^{-n delta} times the single-oscillator propagator.
double gaussian_gamma2(int n, const HierarchyParams& hier, const ModelParams& model, double tau);

/// Exact moments of the discretized Gaussian model itself (b must be 0):
/// u_hat on the same modes and Gamma_2 on the same tau grid as mc_estimate.
struct LatticeGaussian {
  std::vector<double> q;
  std::vector<double> u_hat;
  std::vector<double> tau;
  std::vector<double> gamma2;
};
LatticeGaussian lattice_gaussian_oracle(const LatticeModel& model, int q_modes = 8);

/// Columns: observable, q_or_tau, mean, stderr, sweeps, seed.
std::string to_csv(const MCEstimates& est);
nlohmann::json to_json(const MCEstimates& est);

}  // namespace hqao
