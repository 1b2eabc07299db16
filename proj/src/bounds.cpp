#include "hqao/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "hqao/errors.hpp"

namespace hqao {

double Kernels::contraction() const { return std::pow(static_cast<double>(kappa), -delta); }

double Kernels::domain_max() const { return 1.0 / (1.0 - contraction()); }

bool Kernels::in_domain(double v) const { return v > 0.0 && v * (1.0 - contraction()) < 1.0; }

KernelValues Kernels::operator()(double v) const {
  if (!in_domain(v)) throw DomainError("kernel argument outside (0, (1 - kappa^-delta)^-1)");
  const double c = contraction();
  const double s = c / (1.0 - (1.0 - c) * v);
  const double pre = std::pow(static_cast<double>(kappa), 2.0 * delta - 1.0);
  return {s, pre * s * s * s * s, 0.5 * pre * (1.0 - c) * s * s * s};
}

KernelValues kernel_functions(double v, int kappa, double delta) { return Kernels{kappa, delta}(v); }

namespace {

void check_window_args(int kappa, double delta, double epsilon) {
  if (kappa < 2 || !(delta > 0.0 && delta < 0.5)) throw DomainError("need kappa >= 2 and delta in (0, 1/2)");
  if (!(epsilon > 0.0 && epsilon < (1.0 - 2.0 * delta) / 4.0))
    throw DomainError("epsilon must lie in (0, (1 - 2 delta)/4)");
}

}  // namespace

double window_v(int kappa, double delta, double epsilon) {
  const double k = kappa;
  return 1.0 + (-std::expm1(-epsilon * std::log(k))) / std::expm1(delta * std::log(k));
}

double window_w(int kappa, double delta, double epsilon) {
  const double lk = std::log(static_cast<double>(kappa));
  const double kd1 = std::expm1(delta * lk);
  const double ke = -std::expm1(-epsilon * lk);
  return 2.0 * std::exp((1.0 - delta - 2.0 * epsilon) * lk) * (kd1 + ke) * ke / (kd1 * kd1);
}

EpsilonWindow epsilon_window(int kappa, double delta, double epsilon) {
  check_window_args(kappa, delta, epsilon);
  EpsilonWindow w;
  w.kappa = kappa;
  w.delta = delta;
  w.epsilon = epsilon;
  w.v_bar = window_v(kappa, delta, epsilon);
  w.w_bar = window_w(kappa, delta, epsilon);
  const double hi = (1.0 - 2.0 * delta) / 4.0;
  const auto best = grid_golden_max([&](double e) { return window_w(kappa, delta, e); }, hi * 1e-6, hi * (1 - 1e-6));
  w.w_max = best.value;
  w.epsilon_at_max = best.x;
  return w;
}

BoundReport window_checks(const EpsilonWindow& w, int grid) {
  const Kernels k{w.kappa, w.delta};
  BoundReport rep;
  const double target = std::pow(static_cast<double>(w.kappa), w.epsilon);
  rep.add_le("sigma_vbar_eq_kappa_eps", std::abs(k(w.v_bar).sigma - target), 0.0, kBoundSlack);
  const double cap = std::pow(static_cast<double>(w.kappa), 2.0 * w.delta + 4.0 * w.epsilon - 1.0);
  rep.add_le("phi_cap_lt_1", cap, 1.0 - kBoundSlack);
  double phi_worst = -1e300, trap_worst = 1e300;
  for (int i = 0; i < grid; ++i) {
    const double v = 1.0 + (w.v_bar - 1.0) * i / (grid - 1);
    const auto kv = k(v);
    phi_worst = std::max(phi_worst, kv.phi - cap);
    trap_worst = std::min(trap_worst, -kv.psi * w.w_bar + v * kv.sigma - v);
  }
  rep.add_le("phi_le_cap_on_window", phi_worst, 0.0, kBoundSlack);
  // At v_bar the trap inequality is an identity for w = w_bar; the escape
  // step then needs X < w_bar strictly. On all of [1, v_bar] it cannot hold,
  // since at v = 1 the left side is -psi(1) w_bar < 0.
  const auto kv = k(w.v_bar);
  rep.add_le("trap_identity_at_v_bar", std::abs(-kv.psi * w.w_bar + w.v_bar * kv.sigma - w.v_bar), 0.0,
             kBoundSlack);
  rep.add_le("trap_on_window_literal", -trap_worst, 0.0, kBoundSlack, false);
  rep.add_le("w_bar_le_w_max", w.w_bar, w.w_max, kBoundSlack);
  return rep;
}

StepResult recurrence_step(const Interval& u_prev, double x_prev, const Kernels& k) {
  StepResult r;
  if (!k.in_domain(u_prev.hi)) {
    r.in_domain = false;
    r.lower_out = u_prev.lo > 0.0 && !k.in_domain(u_prev.lo);
    return r;
  }
  const auto hi = k(u_prev.hi);
  // u_n > 0 always, so a lower end at or below zero carries no information.
  const double lo = u_prev.lo > 0.0 ? k(u_prev.lo).sigma * u_prev.lo : 0.0;
  r.u.hi = hi.sigma * u_prev.hi * kUpperInflation;
  r.u.lo = std::max(0.0, lo - hi.psi * x_prev * kUpperInflation);
  r.x = hi.phi * x_prev * kUpperInflation;
  return r;
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::decaying: return "decaying";
    case Regime::window: return "window";
    case Regime::escaped_above: return "escaped-above";
    case Regime::domain_violated: return "domain-violated";
    case Regime::undecided: return "undecided";
  }
  return "?";
}

Regime classify(const Interval& u, double x, const EpsilonWindow& w) {
  if (u.hi < 1.0 - kBoundSlack) return Regime::decaying;
  if (u.lo > w.v_bar + kBoundSlack) return Regime::escaped_above;
  if (u.lo >= 1.0 - kBoundSlack && u.hi <= w.v_bar + kBoundSlack && x < w.w_bar) return Regime::window;
  return Regime::undecided;
}

namespace {

bool decisive(Regime r) {
  return r == Regime::decaying || r == Regime::escaped_above || r == Regime::domain_violated;
}

}  // namespace

BoundTrace propagate_and_classify(const Interval& u0, double x0, const Kernels& k, const EpsilonWindow& w,
                                  int n_max) {
  BoundTrace t;
  Interval u = u0;
  double x = x0;
  t.u_lo.push_back(u.lo);
  t.u_hi.push_back(u.hi);
  t.x_hi.push_back(x);
  t.regime.push_back(classify(u, x, w));
  for (int n = 1; n <= n_max && !decisive(t.regime.back()); ++n) {
    const auto s = recurrence_step(u, x, k);
    if (!s.in_domain) {
      // Only a lower end outside the domain certifies escape; an upper end
      // alone just ends what the bounds can say.
      if (s.lower_out) t.regime.back() = Regime::domain_violated;
      break;
    }
    u = s.u;
    x = s.x;
    t.u_lo.push_back(u.lo);
    t.u_hi.push_back(u.hi);
    t.x_hi.push_back(x);
    t.regime.push_back(classify(u, x, w));
  }
  return t;
}

BetaFamily spectral_family(const ModelParams& base, double beta_lo, double beta_hi, const SpectralOptions& opts) {
  if (!(beta_lo > 0.0 && beta_hi > beta_lo)) throw DomainError("need 0 < beta_lo < beta_hi");
  ModelParams p = base;
  p.beta = beta_lo;
  auto spec = std::make_shared<SpectralSolution>(build_and_diagonalize(p, 64, opts));
  BetaFamily f;
  f.beta_lo = beta_lo;
  f.beta_hi = beta_hi;
  f.eval = [spec](double beta) {
    return std::make_pair(u_hat0_spectral(*spec, beta, 0.0), std::max(0.0, x0_spectral(*spec, beta)));
  };
  return f;
}

BetaFamily spectral_family_from_above(const ModelParams& base, double beta_hi, const SpectralOptions& opts) {
  if (!(beta_hi > 0.0)) throw DomainError("need beta_hi > 0");
  ModelParams p = base;
  p.beta = beta_hi;
  for (int i = 0; i <= 30; ++i) {
    p.beta = beta_hi * std::ldexp(1.0, -i);
    auto spec = std::make_shared<SpectralSolution>(build_and_diagonalize(p, 64, opts));
    if (i == 0 || u_hat0_spectral(*spec, p.beta, 0.0) >= 1.0) continue;
    BetaFamily f;
    f.beta_lo = p.beta;
    f.beta_hi = beta_hi;
    f.eval = [spec](double beta) {
      return std::make_pair(u_hat0_spectral(*spec, beta, 0.0), std::max(0.0, x0_spectral(*spec, beta)));
    };
    return f;
  }
  throw BracketError("u_hat_0 stays above 1 down to beta_hi / 2^30");
}

namespace {

// Outcome at one beta: -1 once decay is certified, +1 once escape is,
// 0 while undecided, recorded per level reached.
class Classifier {
 public:
  Classifier(const BetaFamily& f, const Kernels& k, const EpsilonWindow& w, int n_max)
      : f_(f), k_(k), w_(w), n_max_(n_max) {}

  const std::pair<double, double>& values(double beta) {
    auto it = cache_.find(beta);
    if (it == cache_.end()) it = cache_.emplace(beta, f_.eval(beta)).first;
    return it->second;
  }

  // Sign of the decisive label reached by level n (0 if none).
  int outcome(double beta, int n) {
    const auto& t = trace(beta);
    for (int m = 0; m < t.levels() && m <= n; ++m) {
      const Regime r = t.regime[m];
      if (r == Regime::decaying) return -1;
      if (r == Regime::escaped_above || r == Regime::domain_violated) return 1;
    }
    return 0;
  }

  int evaluations() const { return static_cast<int>(cache_.size()); }

 private:
  const BoundTrace& trace(double beta) {
    auto it = traces_.find(beta);
    if (it == traces_.end()) {
      const auto& v = values(beta);
      it = traces_.emplace(beta, propagate_and_classify({v.first, v.first}, v.second, k_, w_, n_max_)).first;
    }
    return it->second;
  }

  const BetaFamily& f_;
  Kernels k_;
  EpsilonWindow w_;
  int n_max_;
  std::map<double, std::pair<double, double>> cache_;
  std::map<double, BoundTrace> traces_;
};

}  // namespace

BetaBrackets find_beta_brackets(const BetaFamily& family, const Kernels& k, const EpsilonWindow& w,
                                const BracketOptions& opts) {
  const int n_max = std::max(opts.n_max, opts.levels);
  Classifier cl(family, k, w, n_max);
  auto u0 = [&](double beta) { return cl.values(beta).first; };
  const Interval lower = bisect_root([&](double b) { return u0(b) - 1.0; }, family.beta_lo, family.beta_hi,
                                     opts.rel_tol);
  const Interval upper = bisect_root([&](double b) { return u0(b) - w.v_bar; }, lower.lo, family.beta_hi,
                                     opts.rel_tol);
  BetaBrackets out;
  out.levels.push_back({0, lower.lo, upper.hi});

  // Edges at level n, searched inside the level n-1 bracket.
  auto edges = [&](int n, double lo, double hi) {
    const Interval minus =
        bisect_predicate([&](double b) { return cl.outcome(b, n) != -1; }, lo, hi, opts.rel_tol);
    const Interval plus = bisect_predicate([&](double b) { return cl.outcome(b, n) == 1; }, minus.lo, hi,
                                           opts.rel_tol);
    return std::make_pair(minus.lo, plus.hi);
  };
  for (int n = 1; n <= opts.levels; ++n) {
    const auto& prev = out.levels.back();
    const auto e = edges(n, prev.beta_minus, prev.beta_plus);
    out.levels.push_back({n, e.first, e.second});
  }
  for (std::size_t i = 1; i < out.levels.size(); ++i) {
    const auto& a = out.levels[i - 1];
    const auto& b = out.levels[i];
    if (b.beta_minus < a.beta_minus || b.beta_plus > a.beta_plus || b.beta_minus > b.beta_plus) out.nested = false;
  }
  const auto& last = out.levels.back();
  const auto star = edges(n_max, last.beta_minus, last.beta_plus);
  out.beta_star = {star.first, star.second};

  // Independent re-check of monotonicity on a uniform scan.
  int prev = -2;
  for (int i = 0; i < opts.scan_points; ++i) {
    const double b = out.levels[0].beta_minus +
                     (out.levels[0].beta_plus - out.levels[0].beta_minus) * i / (opts.scan_points - 1);
    const int o = cl.outcome(b, n_max);
    if (prev != -2 && o != prev) {
      out.crossings.push_back(b);
      if (o < prev) out.ambiguous = true;
    }
    prev = o;
  }
  double x_worst = 0.0;
  for (int i = 0; i < opts.scan_points; ++i) {
    const double b = out.levels[0].beta_minus +
                     (out.levels[0].beta_plus - out.levels[0].beta_minus) * i / (opts.scan_points - 1);
    x_worst = std::max(x_worst, cl.values(b).second);
  }
  out.checks.add_le("brackets_nested", out.nested ? 0.0 : 1.0, 0.0);
  out.checks.add_le("scan_monotone", out.ambiguous ? 1.0 : 0.0, 0.0);
  out.checks.add_le("x0_lt_w_bar_on_bracket", x_worst, w.w_bar - kBoundSlack);
  out.evaluations = cl.evaluations();
  return out;
}

DecayCheck decay_check(const BoundTrace& t, const Kernels& k, const EpsilonWindow& w) {
  DecayCheck d;
  d.expected_rate = -k.delta * std::log(static_cast<double>(k.kappa));
  double k0 = 1.0;
  d.bounded = true;
  std::vector<double> ks;
  for (int n = 1; n < t.levels(); ++n) k0 /= 1.0 - (1.0 - k.contraction()) * t.u_hi[n - 1];
  d.k0 = k0;
  d.k = k0 * w.v_bar;
  std::vector<double> xs, ys;
  for (int n = 0; n < t.levels(); ++n) {
    const double bound = d.k * std::pow(static_cast<double>(k.kappa), -n * k.delta);
    if (t.u_hi[n] > bound * (1.0 + kBoundSlack)) d.bounded = false;
    xs.push_back(n);
    ys.push_back(std::log(t.u_hi[n]));
  }
  // Fit the tail, where the per-level factor has settled.
  if (xs.size() >= 4) {
    const std::size_t from = xs.size() / 2;
    d.fitted_rate = fit_line({xs.begin() + from, xs.end()}, {ys.begin() + from, ys.end()}).slope;
  }
  return d;
}

ParameterSelection select_parameters(int kappa, double delta, double epsilon, const SelectionOptions& opts) {
  ParameterSelection sel;
  sel.window = epsilon_window(kappa, delta, epsilon);
  const double vb = sel.window.v_bar;
  sel.gamma = opts.gamma;
  const double mass = opts.margin * 36.0 * vb / (opts.gamma * opts.gamma);
  const double mg2 = mass * opts.gamma * opts.gamma;
  sel.beta_hat = -(mass * opts.gamma / 3.0) * std::log1p(-36.0 * vb / mg2);
  const double f = f_ratio(3.0 * sel.beta_hat / (mass * opts.gamma));
  double b = opts.b_start;
  while (b >= opts.b_floor && 24.0 * b * std::pow(vb, 4) / f >= sel.window.w_bar) b *= 0.5;
  sel.feasible = b >= opts.b_floor;
  sel.params.mass = mass;
  sel.params.b = b;
  sel.params.a = -opts.gamma * b;
  sel.params.beta = sel.beta_hat;
  sel.x0_bound = 24.0 * b * std::pow(vb, 4) / f;
  // u_hat_0 <= (beta gamma / 8)(1 + sqrt(1 + 16 / (beta gamma^2 b))), which
  // grows with beta, so u_hat_0 >= 1 forces beta >= beta_low.
  const auto upper = [&](double beta) {
    return (beta * opts.gamma / 8.0) * (1.0 + std::sqrt(1.0 + 16.0 / (beta * opts.gamma * opts.gamma * b)));
  };
  sel.beta_low = bisect_root([&](double beta) { return upper(beta) - 1.0; }, sel.beta_hat * 1e-9, sel.beta_hat,
                             1e-12)
                     .lo;
  // beta f(3 beta / (mass gamma)) increases with beta: the worst case is beta_low.
  sel.x0_bound_consistent =
      24.0 * b * std::pow(vb, 4) / (sel.beta_low * f_ratio(3.0 * sel.beta_low / (mass * opts.gamma)));

  auto& c = sel.certificate;
  for (const auto& chk : window_checks(sel.window).checks) c.checks.push_back(chk);
  c.add_le("mass_gamma2_gt_36_vbar", 36.0 * vb, mg2 - kBoundSlack);
  c.add_le("b_above_floor", opts.b_floor, b);
  c.add_le("x0_bound_literal_lt_w_bar", sel.x0_bound, sel.window.w_bar - kBoundSlack, 0.0, false);
  c.add_le("x0_bound_lt_w_bar", sel.x0_bound_consistent, sel.window.w_bar - kBoundSlack);
  if (sel.feasible) {
    const auto spec = build_and_diagonalize(sel.params, 64);
    sel.rigidity = eta_and_rigidity(spec, sel.beta_hat).rigidity;
    c.add_le("rigidity_le_1", sel.rigidity, 1.0);
  }
  return sel;
}

double predicted_limit(int k, double beta_star) {
  if (k < 1 || !(beta_star > 0.0)) throw DomainError("predicted_limit needs k >= 1 and beta* > 0");
  return factorial(2 * k) / (factorial(k) * std::pow(2.0, k) * std::pow(beta_star, k));
}

nlohmann::json to_json(const EpsilonWindow& w) {
  return {{"kappa", w.kappa},     {"delta", w.delta}, {"epsilon", w.epsilon},
          {"v_bar", w.v_bar},     {"w_bar", w.w_bar}, {"w_max", w.w_max},
          {"epsilon_at_max", w.epsilon_at_max}};
}

nlohmann::json to_json(const BoundTrace& t) {
  nlohmann::json a = nlohmann::json::array();
  for (int n = 0; n < t.levels(); ++n)
    a.push_back({{"level", n}, {"u_lo", t.u_lo[n]}, {"u_hi", t.u_hi[n]}, {"x_hi", t.x_hi[n]},
                 {"regime", to_string(t.regime[n])}});
  return a;
}

nlohmann::json to_json(const BetaBrackets& b) {
  nlohmann::json j;
  j["levels"] = nlohmann::json::array();
  for (const auto& l : b.levels)
    j["levels"].push_back({{"level", l.level}, {"beta_minus", l.beta_minus}, {"beta_plus", l.beta_plus}});
  j["beta_star"] = {b.beta_star.lo, b.beta_star.hi};
  j["relative_width"] = b.relative_width();
  j["nested"] = b.nested;
  j["ambiguous"] = b.ambiguous;
  j["crossings"] = b.crossings;
  j["evaluations"] = b.evaluations;
  return j;
}

nlohmann::json certificate_json(const ParameterSelection& sel, const BetaBrackets* brackets) {
  nlohmann::json j = to_json(sel.window);
  j["params"] = {{"mass", sel.params.mass}, {"a", sel.params.a}, {"b", sel.params.b}, {"gamma", sel.gamma}};
  j["beta_hat"] = sel.beta_hat;
  j["beta_low"] = sel.beta_low;
  j["x0_bound_literal"] = sel.x0_bound;
  j["x0_bound"] = sel.x0_bound_consistent;
  j["rigidity"] = sel.rigidity;
  j["feasible"] = sel.feasible;
  if (brackets) {
    const auto bj = to_json(*brackets);
    j["beta_brackets"] = bj["levels"];
    j["beta_star"] = bj["beta_star"];
    j["beta_star_relative_width"] = bj["relative_width"];
    j["ambiguous"] = bj["ambiguous"];
  }
  BoundReport all = sel.certificate;
  if (brackets)
    for (const auto& chk : brackets->checks.checks) all.checks.push_back(chk);
  j["checks"] = to_json(all);
  j["certified"] = all.all_pass();
  return j;
}

}  // namespace hqao
