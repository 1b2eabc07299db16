#include "hqao/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Sparse>

#include "hqao/errors.hpp"
#include "hqao/numerics.hpp"

namespace hqao {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Position operator in the first L oscillator states (mass m, frequency w).
SpMat position_operator(int L, double mass, double omega) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * static_cast<std::size_t>(L));
  const double s = 1.0 / std::sqrt(2.0 * mass * omega);
  for (int n = 1; n < L; ++n) {
    const double v = s * std::sqrt(static_cast<double>(n));
    t.emplace_back(n - 1, n, v);
    t.emplace_back(n, n - 1, v);
  }
  SpMat q(L, L);
  q.setFromTriplets(t.begin(), t.end());
  return q;
}

SpMat truncate(const SpMat& m, int K) { return m.topLeftCorner(K, K); }

struct OscillatorMatrices {
  SpMat q, q2, q3;
  Eigen::MatrixXd H;
};

// Powers are formed in K + 4 states before truncation so that the K x K
// blocks of q^2, q^3 and q^4 are exact.
OscillatorMatrices oscillator_matrices(const ModelParams& p, int K, double omega) {
  const int L = K + 4;
  const SpMat qL = position_operator(L, p.mass, omega);
  const SpMat q2L = qL * qL;
  const SpMat q3L = q2L * qL;
  const SpMat q4L = q2L * q2L;
  OscillatorMatrices m;
  m.q = truncate(qL, K);
  m.q2 = truncate(q2L, K);
  m.q3 = truncate(q3L, K);
  m.H = Eigen::MatrixXd(0.5 * (p.a - p.mass * omega * omega) * truncate(q2L, K) + p.b * truncate(q4L, K));
  for (int n = 0; n < K; ++n) m.H(n, n) += omega * (n + 0.5);
  return m;
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << x;
  return os.str();
}

// Couplings enter the sums squared, so 1e-8 relative matches the 1e-16
// Boltzmann truncation.
double sig_threshold(const Eigen::MatrixXd& Q, int rows) {
  return 1e-8 * Q.topRows(std::min<Eigen::Index>(rows, Q.rows())).cwiseAbs().maxCoeff();
}

// Largest index coupled to any of the first `count` states through Q, plus one.
int reach(const Eigen::MatrixXd& Q, int count, double thr) {
  int out = count;
  for (int p = 0; p < count; ++p)
    for (int r = static_cast<int>(Q.rows()) - 1; r >= out; --r)
      if (std::abs(Q(p, r)) > thr) {
        out = r + 1;
        break;
      }
  return out;
}

// Active set for sums at beta; throws when it touches the untrusted tail.
int checked_active(const SpectralSolution& spec, double beta, int hops) {
  const int n = active_count(spec, beta, hops);
  if (n >= spec.trusted && spec.trusted < spec.basis_size)
    throw TruncationError("spectral sum at beta=" + std::to_string(beta) + " needs " +
                          std::to_string(n) + " states but only " + std::to_string(spec.trusted) +
                          " are converged");
  return std::min(n, spec.trusted);
}

struct Boltzmann {
  Eigen::VectorXd e;  // energies shifted by E0
  Eigen::VectorXd w;  // exp(-beta e)
  double Z = 0.0;
};

Boltzmann boltzmann(const SpectralSolution& spec, double beta, int count) {
  Boltzmann b;
  b.e = spec.energies.head(count).array() - spec.energies(0);
  b.w = (-beta * b.e.array()).exp();
  b.Z = b.w.sum();
  return b;
}

}  // namespace

void ModelParams::validate() const {
  if (!(mass > 0.0)) throw DomainError("mass must be positive");
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  if (b < 0.0) throw DomainError("quartic coefficient b must be nonnegative");
  if (b == 0.0 && !(a > 0.0)) throw DomainError("b = 0 requires a > 0 for a normalizable Gaussian");
}

double auxiliary_frequency(const ModelParams& p) {
  return std::max(std::sqrt(std::abs(p.a) / p.mass), std::cbrt(p.b / p.mass));
}

double thermal_frequency(const ModelParams& p, double beta, double cutoff) {
  const double v_min = p.a < 0.0 && p.b > 0.0 ? -p.a * p.a / (16.0 * p.b) : 0.0;
  const double e = 1.5 * cutoff / beta;
  // Outer turning point of (a/2) x^2 + b x^4 = v_min + e.
  double x2;
  if (p.b > 0.0) {
    const double c = v_min + e;
    x2 = (-0.5 * p.a + std::sqrt(0.25 * p.a * p.a + 4.0 * p.b * c)) / (2.0 * p.b);
  } else {
    x2 = 2.0 * e / p.a;
  }
  return std::sqrt(2.0 * p.mass * e) / (p.mass * std::sqrt(x2));
}

namespace {

struct Eig {
  OscillatorMatrices m;
  double omega = 0.0;
  Eigen::VectorXd energies;
  std::vector<int> parity;
  Eigen::MatrixXd V;
};

Eig eigensystem(const ModelParams& params, int K, double omega) {
  Eig out;
  out.omega = omega;
  if (!(out.omega > 0.0)) throw DomainError("degenerate auxiliary frequency (a = b = 0)");
  out.m = oscillator_matrices(params, K, out.omega);

  // The potential is even: diagonalize each parity sector on its own so that
  // near-degenerate doublets cannot mix.
  std::vector<std::pair<double, std::pair<int, int>>> order;  // (E, (parity, column))
  std::vector<Eigen::MatrixXd> vecs(2);
  for (int par = 0; par < 2; ++par) {
    const int n = (K - par + 1) / 2;
    Eigen::MatrixXd block(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) block(i, j) = out.m.H(2 * i + par, 2 * j + par);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block);
    if (es.info() != Eigen::Success) throw TruncationError("eigensolver failed");
    vecs[par] = es.eigenvectors();
    for (int c = 0; c < n; ++c) order.push_back({es.eigenvalues()(c), {par, c}});
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  out.energies.resize(K);
  out.parity.resize(K);
  out.V = Eigen::MatrixXd::Zero(K, K);
  for (int k = 0; k < K; ++k) {
    const int par = order[k].second.first;
    const int c = order[k].second.second;
    out.energies(k) = order[k].first;
    out.parity[k] = par;
    const auto v = vecs[par].col(c);
    for (int i = 0; i < v.size(); ++i) out.V(2 * i + par, k) = v(i);
  }
  return out;
}

// Operator matrices are only formed on the first `keep` eigenstates.
SpectralSolution assemble(const ModelParams& params, int K, const Eig& e, int keep) {
  SpectralSolution sol;
  sol.params = params;
  sol.basis_size = K;
  sol.basis_frequency = e.omega;
  sol.trusted = keep;
  sol.quarter_converged = true;
  sol.energies = e.energies;
  sol.parity = e.parity;
  const Eigen::MatrixXd Vk = e.V.leftCols(keep);
  auto project = [&](const SpMat& op) {
    const Eigen::MatrixXd m = Vk.transpose() * (op * Vk);
    return Eigen::MatrixXd(0.5 * (m + m.transpose()));
  };
  sol.q_matrix = project(e.m.q);
  sol.q2_matrix = project(e.m.q2);
  sol.q3_matrix = project(e.m.q3);
  return sol;
}

}  // namespace

SpectralSolution diagonalize_fixed(const ModelParams& params, int K) {
  params.validate();
  if (K < 4) throw DomainError("basis size must be at least 4");
  return assemble(params, K, eigensystem(params, K, auxiliary_frequency(params)), K);
}

int active_count(const SpectralSolution& spec, double beta, int hops, const SpectralOptions& opts) {
  const int T = static_cast<int>(spec.q_matrix.rows());
  const double E0 = spec.energies(0);
  int n = 0;
  while (n < T && beta * (spec.energies(n) - E0) < opts.boltzmann_cutoff) ++n;
  n = std::max(n, 1);
  const double thr = sig_threshold(spec.q_matrix, n);
  for (int h = 0; h < hops; ++h) n = reach(spec.q_matrix, n, thr);
  return n;
}

SpectralSolution build_and_diagonalize(const ModelParams& params, int K, const SpectralOptions& opts) {
  params.validate();
  if (K < 4) throw DomainError("basis size must be at least 4");
  K += K % 2;
  double omega = auxiliary_frequency(params);
  if (opts.thermal_basis) omega = std::max(omega, thermal_frequency(params, params.beta, opts.boltzmann_cutoff));
  Eig small = eigensystem(params, K, omega);
  double last_dev = 0.0;
  int stable_last = 0;
  while (2 * K <= opts.k_max) {
    Eig big = eigensystem(params, 2 * K, omega);
    // Leading states whose energies survive the doubling.
    // Eigenvalues carry an absolute error ~ eps * ||H||, which for large
    // bases can exceed the relative tolerance of the low states.
    const double floor = 100.0 * std::numeric_limits<double>::epsilon() *
                         std::max(big.energies.cwiseAbs().maxCoeff(), small.energies.cwiseAbs().maxCoeff());
    int stable = 0;
    last_dev = 0.0;
    for (int p = 0; p < K; ++p) {
      const double scale = std::max(1.0, std::abs(big.energies(p)));
      const double dev = std::abs(big.energies(p) - small.energies(p));
      if (dev > opts.energy_tol * scale + floor) {
        last_dev = dev / scale;
        break;
      }
      ++stable;
    }
    stable_last = stable;
    if (stable > 1) {
      SpectralSolution sol = assemble(params, 2 * K, big, stable);
      sol.quarter_converged = stable >= K / 4 + 1;
      if (active_count(sol, params.beta, opts.hops, opts) < stable) return sol;
    }
    small = std::move(big);
    K *= 2;
  }
  throw TruncationError("spectrum not converged at basis size " + std::to_string(K) + " (" +
                        std::to_string(stable_last) + " stable states, first unstable change " +
                        format_double(last_dev) + ")");
}

double u_hat0_spectral(const SpectralSolution& spec, double beta, double q) {
  const int n = checked_active(spec, beta, 1);
  const Boltzmann bz = boltzmann(spec, beta, n);
  const Eigen::MatrixXd& Q = spec.q_matrix;
  double sum = 0.0;
  for (int p = 0; p < n; ++p)
    for (int r = 0; r < n; ++r) {
      const double qq = Q(p, r) * Q(p, r);
      if (qq == 0.0) continue;
      const double D = bz.e(p) - bz.e(r);
      const double g = -exp_dd1(beta, bz.e(p), bz.e(r));
      sum += q == 0.0 ? qq * g : qq * g * D * D / (q * q + D * D);
    }
  return sum / bz.Z;
}

double correlation_gamma2(const SpectralSolution& spec, double beta, double tau) {
  if (!(tau >= 0.0 && tau <= beta)) throw DomainError("tau must lie in [0, beta]");
  const int n = checked_active(spec, beta, 1);
  const Boltzmann bz = boltzmann(spec, beta, n);
  const Eigen::MatrixXd& Q = spec.q_matrix;
  double sum = 0.0;
  for (int p = 0; p < n; ++p)
    for (int r = 0; r < n; ++r) {
      const double qq = Q(p, r) * Q(p, r);
      if (qq == 0.0) continue;
      sum += qq * std::exp(-(beta - tau) * bz.e(p) - tau * bz.e(r));
    }
  return sum / bz.Z;
}

EtaRigidity eta_and_rigidity(const SpectralSolution& spec, double beta) {
  EtaRigidity out;
  out.eta = correlation_gamma2(spec, beta, 0.0);
  out.gap = std::numeric_limits<double>::infinity();
  for (int p = 1; p < spec.trusted; ++p)
    out.gap = std::min(out.gap, spec.energies(p) - spec.energies(p - 1));
  out.rigidity = spec.params.mass * out.gap * out.gap;
  out.suppressed = out.rigidity > 1.0;
  return out;
}

double gamma4_coincident_integral(const SpectralSolution& spec, double beta) {
  const int n = checked_active(spec, beta, 2);
  const Boltzmann bz = boltzmann(spec, beta, n);
  const Eigen::MatrixXd& Q = spec.q_matrix;
  const Eigen::MatrixXd& Q2 = spec.q2_matrix;
  const double thr = 1e-6 * sig_threshold(Q, n);
  std::vector<std::vector<int>> nb(n);
  for (int p = 0; p < n; ++p)
    for (int r = 0; r < n; ++r)
      if (std::abs(Q(p, r)) > thr) nb[p].push_back(r);
  // Time-ordered trace sum_{p,r,s} Q_pr Q_rs (Q2)_sp g[E_p, E_r, E_s]; the
  // two orderings of (t1, t2) contribute equally.
  double sum = 0.0;
  for (int p = 0; p < n; ++p)
    for (int r : nb[p])
      for (int s : nb[r]) {
        const double c = Q(p, r) * Q(r, s) * Q2(s, p);
        if (c == 0.0) continue;
        sum += c * exp_dd2(beta, bz.e(p), bz.e(r), bz.e(s));
      }
  return 2.0 * sum / bz.Z;
}

double x0_spectral(const SpectralSolution& spec, double beta) {
  const double phi = gamma4_coincident_integral(spec, beta);
  const double u0 = u_hat0_spectral(spec, beta, 0.0);
  const double eta = correlation_gamma2(spec, beta, 0.0);
  return -(phi - beta * eta * u0 - 2.0 * u0 * u0);
}

double gamma4_triple_integral(const SpectralSolution& spec, double beta) {
  const int n = checked_active(spec, beta, 2);
  const Boltzmann bz = boltzmann(spec, beta, n);
  const Eigen::MatrixXd& Q = spec.q_matrix;
  const Eigen::MatrixXd& Q3 = spec.q3_matrix;
  double sum = 0.0;
  for (int p = 0; p < n; ++p)
    for (int r = 0; r < n; ++r) {
      const double c = Q3(p, r) * Q(r, p);
      if (c == 0.0) continue;
      sum += c * -exp_dd1(beta, bz.e(p), bz.e(r));
    }
  return beta * sum / bz.Z;
}

double sum_rule_residual(const SpectralSolution& spec, double beta) {
  const ModelParams& p = spec.params;
  const double u0 = u_hat0_spectral(spec, beta, 0.0);
  return 1.0 - p.a * u0 - (4.0 * p.b / beta) * gamma4_triple_integral(spec, beta);
}

double double_commutator_residual(const ModelParams& params, int K) {
  params.validate();
  const double omega = auxiliary_frequency(params);
  const OscillatorMatrices m = oscillator_matrices(params, K, omega);
  const Eigen::MatrixXd q = Eigen::MatrixXd(m.q);
  const Eigen::MatrixXd Hq = m.H * q;
  const Eigen::MatrixXd qH = q * m.H;
  const Eigen::MatrixXd comm = Hq - qH;
  const Eigen::MatrixXd dc = q * comm - comm * q;
  const int interior = K - 2;
  double worst = 0.0;
  for (int i = 0; i < interior; ++i)
    for (int j = 0; j < interior; ++j) {
      const double target = i == j ? 1.0 / params.mass : 0.0;
      worst = std::max(worst, std::abs(dc(i, j) - target));
    }
  return worst;
}

double x0_upper_bound(const ModelParams& p, double u0) {
  return x0_upper_bound_literal(p, u0) / p.beta;
}

double x0_upper_bound_literal(const ModelParams& p, double u0) {
  const double t = 3.0 * p.beta * p.b / (p.mass * std::abs(p.a));
  return 24.0 * p.b * std::pow(u0, 4) / f_ratio(t);
}

BoundReport check_initial_bounds(const SpectralSolution& spec, const ModelParams& params, double tol,
                                 double sum_rule_tol) {
  if (!(params.a < 0.0 && params.b > 0.0))
    throw DomainError("initial bounds require a < 0 < b");
  const double beta = params.beta;
  const double m = params.mass;
  const double gamma = params.gamma();
  const double u0 = u_hat0_spectral(spec, beta, 0.0);
  const double eta = correlation_gamma2(spec, beta, 0.0);
  const double x0 = x0_spectral(spec, beta);
  const auto slack = [tol](double x, double y) { return tol * std::max(std::abs(x), std::abs(y)); };

  BoundReport r;
  const double lower = (m * gamma * gamma / 36.0) * -std::expm1(-3.0 * beta / (m * gamma));
  r.add_le("u0_lower_bogolyubov", lower, u0, slack(lower, u0));
  // The printed form of this bound carries 16 b / (beta |a|) under the root,
  // which is not dimensionless; 16 b / (beta a^2) is what the shift argument
  // gives. The two agree at |a| = 1; the literal form is kept as information.
  const double upper = (beta * gamma / 8.0) * (1.0 + std::sqrt(1.0 + 16.0 * params.b / (beta * params.a * params.a)));
  r.add_le("u0_upper_shift", u0, upper, slack(u0, upper));
  const double upper_lit = (beta * gamma / 8.0) * (1.0 + std::sqrt(1.0 + 16.0 / (beta * gamma)));
  r.add_le("u0_upper_shift_literal", u0, upper_lit, slack(u0, upper_lit), false);
  r.add_le("u0_le_beta_eta", u0, beta * eta, slack(u0, beta * eta));
  const double lower_eta = beta * eta * f_ratio(beta / (4.0 * m * eta));
  r.add_le("beta_eta_f_le_u0", lower_eta, u0, slack(lower_eta, u0));
  r.add_le("eta_ge_gamma_over_12", gamma / 12.0, eta, slack(gamma / 12.0, eta));
  const double res = std::abs(sum_rule_residual(spec, beta));
  r.add_le("sum_rule_residual", res, sum_rule_tol);
  r.add_le("x0_nonnegative", 0.0, x0, slack(x0, u0 * u0));
  // The printed bound drops the 1/beta that the bound on the integral of
  // U_2^2 by eta u0 supplies; it fails for small beta and is informational.
  const double xb = x0_upper_bound(params, u0);
  r.add_le("x0_upper", x0, xb, slack(x0, xb));
  const double xl = x0_upper_bound_literal(params, u0);
  r.add_le("x0_upper_literal", x0, xl, slack(x0, xl), false);
  return r;
}

nlohmann::json spectral_record(const SpectralSolution& spec, double beta, int q_modes) {
  nlohmann::json j;
  const ModelParams& p = spec.params;
  j["params"] = {{"mass", p.mass}, {"a", p.a}, {"b", p.b}, {"beta", beta}};
  j["K"] = spec.basis_size;
  j["basis_frequency"] = spec.basis_frequency;
  std::vector<double> e;
  for (int i = 0; i < std::min(9, spec.trusted); ++i) e.push_back(spec.energies(i));
  j["energies"] = e;
  nlohmann::json table = nlohmann::json::array();
  for (int k = 0; k <= q_modes; ++k) {
    const double q = 2.0 * M_PI * k / beta;
    table.push_back({{"kappa", k}, {"q", q}, {"u_hat", u_hat0_spectral(spec, beta, q)}});
  }
  j["u_hat0"] = table;
  const EtaRigidity er = eta_and_rigidity(spec, beta);
  j["eta"] = er.eta;
  j["gap"] = er.gap;
  j["rigidity"] = er.rigidity;
  j["suppressed"] = er.suppressed;
  j["x0"] = p.b > 0.0 ? x0_spectral(spec, beta) : 0.0;
  if (p.a < 0.0 && p.b > 0.0) {
    ModelParams at = p;
    at.beta = beta;
    j["bound_report"] = to_json(check_initial_bounds(spec, at));
  }
  return j;
}

}  // namespace hqao
