#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hqao/report.hpp"

namespace hqao {

/// Single-site parameters: H0 = p^2/(2 mass) + (a/2) q^2 + b q^4 at inverse
/// temperature beta. b = 0 is accepted as the Gaussian oracle mode.
struct ModelParams {
  double mass = 1.0;
  double a = 1.0;
  double b = 0.0;
  double beta = 1.0;

  bool gaussian() const { return b == 0.0; }
  /// |a| / b; only meaningful for a < 0 < b.
  double gamma() const { return b > 0.0 ? std::abs(a) / b : 0.0; }
  void validate() const;
};

struct SpectralOptions {
  int k_max = 1024;
  double energy_tol = 1e-10;
  /// States with beta (E - E0) above this carry Boltzmann weight below 1e-16.
  double boltzmann_cutoff = 36.85;
  /// Coupling hops beyond the Boltzmann-active states that must also be
  /// converged: 1 for two-point sums, 2 for the four-point integrals.
  int hops = 2;
  /// Raise the basis frequency to thermal_frequency(params, beta) when that
  /// is larger than the auxiliary one.
  bool thermal_basis = true;
};

/// Eigen-decomposition of H0 in a truncated oscillator basis.
///
/// `q_matrix`, `q2_matrix` and `q3_matrix` are q, q^2 and q^3 in the
/// eigenbasis. Only the first `trusted` states passed the doubling test and
/// only those enter spectral sums.
struct SpectralSolution {
  ModelParams params;
  int basis_size = 0;
  double basis_frequency = 0.0;
  int trusted = 0;
  /// Whether E_0..E_{K/4} of the smaller basis were all stable.
  bool quarter_converged = false;
  Eigen::VectorXd energies;
  Eigen::MatrixXd q_matrix;
  Eigen::MatrixXd q2_matrix;
  Eigen::MatrixXd q3_matrix;
  std::vector<int> parity;
};

double auxiliary_frequency(const ModelParams& params);

/// Frequency p_max / (mass x_max) of the classical orbit at energy
/// V_min + 1.5 cutoff / beta, which balances position and momentum reach of
/// the oscillator basis for the thermally relevant states.
double thermal_frequency(const ModelParams& params, double beta, double cutoff);

/// Diagonalize at exactly K basis states; every state is marked trusted.
SpectralSolution diagonalize_fixed(const ModelParams& params, int K);

/// Start at K and double. The trusted states are the leading ones whose
/// energies move by less than `energy_tol` (relative) under the doubling;
/// the loop stops once the thermally active set at params.beta fits inside
/// them. Throws TruncationError at k_max. Sums at a
/// smaller beta need more states, so scans should build at their lowest beta.
SpectralSolution build_and_diagonalize(const ModelParams& params, int K,
                                       const SpectralOptions& opts = {});

/// Indices 0..count-1 that carry non-negligible weight at beta, extended
/// by `hops` applications of the q-coupling.
int active_count(const SpectralSolution& spec, double beta, int hops,
                 const SpectralOptions& opts = {});

double u_hat0_spectral(const SpectralSolution& spec, double beta, double q);

double correlation_gamma2(const SpectralSolution& spec, double beta, double tau);

struct EtaRigidity {
  double eta = 0.0;
  double gap = 0.0;
  double rigidity = 0.0;
  bool suppressed = false;
};
EtaRigidity eta_and_rigidity(const SpectralSolution& spec, double beta);

/// Integral over (t1, t2) in [0, beta]^2 of <q(0)^2 q(t1) q(t2)>.
double gamma4_coincident_integral(const SpectralSolution& spec, double beta);

/// X0 = -(integrated four-point Ursell function with one coincident pair).
double x0_spectral(const SpectralSolution& spec, double beta);

/// Integral over [0, beta]^2 of <q(t)^3 q(t')>.
double gamma4_triple_integral(const SpectralSolution& spec, double beta);

/// 1 - a u0 - (4b/beta) * gamma4_triple_integral; zero for the exact
/// spectrum by integration by parts.
double sum_rule_residual(const SpectralSolution& spec, double beta);

/// max |[q,[H,q]] - I/mass| over the interior block (indices < K - 2) of
/// the oscillator-basis matrices.
double double_commutator_residual(const ModelParams& params, int K);

/// Initial-level estimates for a < 0. `tol` is the slack allowed on each
/// inequality (relative to the larger side) and the sum-rule residual.
BoundReport check_initial_bounds(const SpectralSolution& spec, const ModelParams& params,
                                 double tol = 1e-8, double sum_rule_tol = 1e-4);

/// Upper bound 24 b u^4 / (beta f(3 beta b / (mass |a|))) on X0 at given u0.
double x0_upper_bound(const ModelParams& params, double u0);
/// The same without the 1/beta.
double x0_upper_bound_literal(const ModelParams& params, double u0);

nlohmann::json spectral_record(const SpectralSolution& spec, double beta, int q_modes = 8);

}  // namespace hqao
