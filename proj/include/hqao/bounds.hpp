#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hqao/numerics.hpp"
#include "hqao/report.hpp"
#include "hqao/spectral.hpp"

namespace hqao {

/// Slack on every strict inequality of the bound logic.
inline constexpr double kBoundSlack = 1e-12;
/// Per-step inflation of upper-bound recurrences (cheap directed rounding).
inline constexpr double kUpperInflation = 1.0 + 1e-14;

struct KernelValues {
  double sigma = 0.0;
  double phi = 0.0;
  double psi = 0.0;
};

/// sigma(v) = k^-d / (1 - (1 - k^-d) v), phi = k^{2d-1} sigma^4,
/// psi = (1/2) k^{2d-1} (1 - k^-d) sigma^3 on 0 < v < 1/(1 - k^-d).
struct Kernels {
  int kappa = 2;
  double delta = 0.25;

  double contraction() const;
  /// Upper end (1 - kappa^-delta)^{-1} of the domain.
  double domain_max() const;
  bool in_domain(double v) const;
  /// Throws DomainError outside the domain.
  KernelValues operator()(double v) const;
};

KernelValues kernel_functions(double v, int kappa, double delta);

struct EpsilonWindow {
  int kappa = 2;
  double delta = 0.25;
  double epsilon = 0.0;
  double v_bar = 0.0;
  double w_bar = 0.0;
  double w_max = 0.0;
  /// Maximizer of w over (0, (1 - 2 delta)/4).
  double epsilon_at_max = 0.0;
};

double window_v(int kappa, double delta, double epsilon);
double window_w(int kappa, double delta, double epsilon);

/// Throws DomainError unless 0 < epsilon < (1 - 2 delta)/4.
EpsilonWindow epsilon_window(int kappa, double delta, double epsilon);

/// The defining properties of the window, each checked with kBoundSlack:
/// sigma(v_bar) = kappa^eps, phi <= kappa^{2 delta + 4 eps - 1} < 1 on a grid
/// of [1, v_bar], and -psi(v) w_bar + v sigma(v) = v at v = v_bar. The same
/// inequality on the whole grid is reported as a non-gating check.
BoundReport window_checks(const EpsilonWindow& window, int grid = 1001);

struct StepResult {
  Interval u;
  double x = 0.0;
  /// False when u_prev.hi (1 - kappa^-delta) >= 1; u and x are then unset.
  bool in_domain = true;
  /// u_prev.lo itself lies above the domain. The lower end is clamped at 0.
  bool lower_out = false;
};

StepResult recurrence_step(const Interval& u_prev, double x_prev, const Kernels& k);

enum class Regime { decaying, window, escaped_above, domain_violated, undecided };
const char* to_string(Regime r);

struct BoundTrace {
  std::vector<double> u_lo;
  std::vector<double> u_hi;
  std::vector<double> x_hi;
  std::vector<Regime> regime;

  int levels() const { return static_cast<int>(u_lo.size()); }
  Regime last() const { return regime.back(); }
};

Regime classify(const Interval& u, double x, const EpsilonWindow& window);

/// Iterates recurrence_step from level 0, labelling each level. Stops after
/// the first decisive label (decaying, escaped_above, domain_violated), when
/// the upper end leaves the kernel domain (last label stays undecided), or at
/// n_max.
BoundTrace propagate_and_classify(const Interval& u0, double x0, const Kernels& k,
                                  const EpsilonWindow& window, int n_max);

/// beta -> (u_hat_0(beta), upper bound on X_0(beta)) on [beta_lo, beta_hi].
struct BetaFamily {
  std::function<std::pair<double, double>(double)> eval;
  double beta_lo = 0.0;
  double beta_hi = 0.0;
};

/// Spectral family for `base` with beta varied: one diagonalization at
/// beta_lo serves every larger beta. X0 is the spectral value.
BetaFamily spectral_family(const ModelParams& base, double beta_lo, double beta_hi,
                           const SpectralOptions& opts = {});

/// Same, with beta_lo found by halving beta_hi until u_hat_0 < 1 (at most
/// 30 halvings; BracketError otherwise).
BetaFamily spectral_family_from_above(const ModelParams& base, double beta_hi, const SpectralOptions& opts = {});

struct BracketOptions {
  /// Levels with reported [beta_n^-, beta_n^+].
  int levels = 12;
  /// Depth used for the beta* bracket.
  int n_max = 400;
  double rel_tol = 1e-9;
  int scan_points = 64;
};

struct LevelBracket {
  int level = 0;
  double beta_minus = 0.0;
  double beta_plus = 0.0;
};

/// beta_n^- is the largest beta at which decay below 1 is certified by
/// level n; beta_n^+ the smallest at which escape above v_bar (or loss of
/// the domain) is. beta* lies in every [beta_n^-, beta_n^+].
struct BetaBrackets {
  std::vector<LevelBracket> levels;
  Interval beta_star;
  bool nested = true;
  /// The scan found a non-monotone classification; every switch point is
  /// listed in `crossings`.
  bool ambiguous = false;
  std::vector<double> crossings;
  int evaluations = 0;
  /// Nesting, monotone scan, and X0 < w_bar on the scan of [beta_0^-, beta_0^+].
  BoundReport checks;

  double relative_width() const { return beta_star.width() / beta_star.mid(); }
};

/// Throws BracketError when u_hat_0 does not cross 1 and v_bar on the
/// family's beta range.
BetaBrackets find_beta_brackets(const BetaFamily& family, const Kernels& k, const EpsilonWindow& window,
                                const BracketOptions& opts = {});

/// Subcritical decay: K0 = prod_n [1 - (1 - kappa^-delta) u_hi,n-1]^{-1} and
/// K = K0 v_bar, with the check u_hi,n <= K kappa^{-n delta} on every level
/// and a log-linear fit of the observed rate.
struct DecayCheck {
  double k0 = 0.0;
  double k = 0.0;
  double fitted_rate = 0.0;
  double expected_rate = 0.0;
  bool bounded = false;
};
DecayCheck decay_check(const BoundTrace& trace, const Kernels& k, const EpsilonWindow& window);

struct SelectionOptions {
  double gamma = 10.0;
  /// mass gamma^2 = margin * 36 v_bar.
  double margin = 2.0;
  double b_start = 1.0;
  double b_floor = 1e-8;
};

struct ParameterSelection {
  EpsilonWindow window;
  /// beta is set to beta_hat, the upper estimate of beta_0^+.
  ModelParams params;
  double gamma = 0.0;
  double beta_hat = 0.0;
  double beta_low = 0.0;
  /// Literal and dimensionally consistent X0 bounds over [beta_low, beta_hat].
  double x0_bound = 0.0;
  double x0_bound_consistent = 0.0;
  double rigidity = 0.0;
  bool feasible = false;
  BoundReport certificate;
};

/// gamma fixed, mass from the margin, then b halved until
/// 24 b v_bar^4 / f(3 beta_hat / (mass gamma)) < w_bar, where beta_hat solves
/// (mass gamma^2 / 36)(1 - exp(-3 beta / (mass gamma))) = v_bar and bounds
/// beta_0^+. a = -gamma b. That criterion lacks the 1/beta of the
/// dimensionally consistent bound 24 b u^4 / (beta f); the certificate gates
/// on the consistent form with beta >= beta_low (the root of the u_hat_0
/// upper estimate at 1) and reports the literal one as non-gating. It also
/// vetoes mass Delta^2 > 1.
ParameterSelection select_parameters(int kappa, double delta, double epsilon, const SelectionOptions& opts = {});

/// (2k)! / (k! 2^k beta*^k).
double predicted_limit(int k, double beta_star);

nlohmann::json to_json(const EpsilonWindow& w);
nlohmann::json to_json(const BoundTrace& t);
nlohmann::json to_json(const BetaBrackets& b);
nlohmann::json certificate_json(const ParameterSelection& sel, const BetaBrackets* brackets);

}  // namespace hqao
