#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hqao/bounds.hpp"
#include "hqao/errors.hpp"

using namespace hqao;

namespace {

const Kernels k2{2, 0.25};

// Exact recursion without stopping, for decay checks.
BoundTrace run(double u0, int levels) {
  BoundTrace t;
  Interval u{u0, u0};
  double x = 0.0;
  for (int n = 0; n <= levels; ++n) {
    t.u_lo.push_back(u.lo);
    t.u_hi.push_back(u.hi);
    t.x_hi.push_back(x);
    t.regime.push_back(Regime::undecided);
    const auto s = recurrence_step(u, x, k2);
    u = s.u;
    x = s.x;
  }
  return t;
}

BetaFamily linear_family() {
  BetaFamily f;
  f.beta_lo = 0.5;
  f.beta_hi = 8.0;
  f.eval = [](double beta) { return std::make_pair(beta / 2.0, 0.0); };
  return f;
}

}  // namespace

TEST_CASE("kernels at closed-form points") {
  const double c = std::pow(2.0, -0.25);
  const double pre = std::pow(2.0, -0.5);
  CHECK(k2(1.0).sigma == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k2(1.0).phi == doctest::Approx(pre).epsilon(1e-15));
  CHECK(k2(1.0).psi == doctest::Approx(0.5 * pre * (1.0 - c)).epsilon(1e-15));
  CHECK(k2(1e-300).sigma == doctest::Approx(c).epsilon(1e-15));
  CHECK(k2.domain_max() == doctest::Approx(1.0 / (1.0 - c)));
  CHECK_FALSE(k2.in_domain(k2.domain_max()));
  CHECK_FALSE(k2.in_domain(0.0));
  CHECK_THROWS_AS(k2(k2.domain_max() * 1.01), DomainError);
}

TEST_CASE("window thresholds from their defining conditions") {
  const auto w = epsilon_window(2, 0.25, 0.05);
  const double c = std::pow(2.0, -0.25);
  // sigma(v) = 2^eps solved for v.
  const double v = (1.0 - c * std::pow(2.0, -0.05)) / (1.0 - c);
  CHECK(w.v_bar == doctest::Approx(v).epsilon(1e-14));
  CHECK(w.v_bar == doctest::Approx(1.1800337745).epsilon(1e-9));
  // w_bar makes the trap an identity at v_bar.
  const auto kv = k2(w.v_bar);
  CHECK(w.w_bar == doctest::Approx(w.v_bar * (kv.sigma - 1.0) / kv.psi).epsilon(1e-12));
  CHECK(w.w_bar == doctest::Approx(0.6667268073).epsilon(1e-9));
  // w increases on the whole admissible range.
  CHECK(w.w_max == doctest::Approx(window_w(2, 0.25, 0.125)).epsilon(1e-5));
  CHECK(w.epsilon_at_max > 0.124);
  CHECK_THROWS_AS(epsilon_window(2, 0.25, 0.125), DomainError);
  CHECK_THROWS_AS(epsilon_window(2, 0.25, 0.0), DomainError);
  CHECK_THROWS_AS(epsilon_window(1, 0.25, 0.05), DomainError);
}

TEST_CASE("window checks gate on the identity, not the literal trap") {
  for (double eps : {0.01, 0.05, 0.1}) {
    const auto rep = window_checks(epsilon_window(2, 0.25, eps));
    CHECK(rep.all_pass());
    const auto* lit = rep.find("trap_on_window_literal");
    REQUIRE(lit != nullptr);
    CHECK_FALSE(lit->gating);
    CHECK_FALSE(lit->pass);
  }
}

// Upper-end inflation is amplified by 2^{1/4} per level at the fixed point.
TEST_CASE("fixed point stays in the window") {
  const auto w = epsilon_window(2, 0.25, 0.05);
  const auto t = propagate_and_classify({1.0, 1.0}, 0.0, k2, w, 50);
  CHECK(t.levels() == 51);
  for (int n = 0; n < t.levels(); ++n) {
    CHECK(t.regime[n] == Regime::window);
    CHECK(t.u_hi[n] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("subcritical start decays geometrically") {
  const auto w = epsilon_window(2, 0.25, 0.05);
  CHECK(propagate_and_classify({0.9, 0.9}, 0.0, k2, w, 10).last() == Regime::decaying);
  const auto t = run(0.9, 60);
  const double s0 = k2(0.9).sigma;
  for (int n = 0; n < t.levels(); ++n) CHECK(t.u_hi[n] <= 0.9 * std::pow(s0, n) * (1.0 + 1e-12));
  const auto d = decay_check(t, k2, w);
  CHECK(d.bounded);
  CHECK(d.expected_rate == doctest::Approx(-0.25 * std::log(2.0)));
  CHECK(d.fitted_rate == doctest::Approx(d.expected_rate).epsilon(5e-3));
}

TEST_CASE("supercritical start escapes") {
  const auto w = epsilon_window(2, 0.25, 0.05);
  CHECK(propagate_and_classify({w.v_bar + 0.01, w.v_bar + 0.01}, 0.0, k2, w, 10).last() ==
        Regime::escaped_above);
  const auto t = propagate_and_classify({1.05, 1.05}, 0.0, k2, w, 100);
  CHECK(t.last() == Regime::escaped_above);
  CHECK(t.levels() > 1);
}

TEST_CASE("domain edges") {
  const double top = k2.domain_max();
  const auto hi_only = recurrence_step({1.0, top * 1.1}, 0.0, k2);
  CHECK_FALSE(hi_only.in_domain);
  CHECK_FALSE(hi_only.lower_out);
  const auto both = recurrence_step({top * 1.05, top * 1.1}, 0.0, k2);
  CHECK(both.lower_out);
  // A large X drives the lower end to zero, never below.
  const auto s = recurrence_step({1.0, 1.0}, 100.0, k2);
  CHECK(s.u.lo == 0.0);
  const auto w = epsilon_window(2, 0.25, 0.05);
  const auto t = propagate_and_classify({1.0, top * 1.1}, 0.0, k2, w, 10);
  CHECK(t.last() == Regime::undecided);
}

TEST_CASE("upper recurrence is inflated") {
  const auto s = recurrence_step({1.0, 1.0}, 1.0, k2);
  CHECK(s.u.hi > 1.0);
  CHECK(s.x > k2(1.0).phi);
}

TEST_CASE("brackets on a linear synthetic family") {
  const auto w = epsilon_window(2, 0.25, 0.05);
  const auto b = find_beta_brackets(linear_family(), k2, w);
  REQUIRE(b.levels.size() == 13);
  CHECK(b.levels[0].beta_minus == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(b.levels[0].beta_plus == doctest::Approx(2.0 * w.v_bar).epsilon(1e-8));
  CHECK(b.nested);
  CHECK_FALSE(b.ambiguous);
  CHECK(b.checks.all_pass());
  for (std::size_t n = 1; n < b.levels.size(); ++n) CHECK(b.levels[n].beta_plus < b.levels[n - 1].beta_plus);
  CHECK(b.beta_star.lo <= 2.0 * (1.0 + 1e-9));
  CHECK(b.beta_star.hi >= 2.0 * (1.0 - 1e-9));
  CHECK(b.relative_width() < 1e-8);
  const auto again = find_beta_brackets(linear_family(), k2, w);
  CHECK(again.beta_star.lo == b.beta_star.lo);
  CHECK(again.beta_star.hi == b.beta_star.hi);
  CHECK(again.evaluations == b.evaluations);
}

TEST_CASE("bracket search needs both crossings") {
  const auto w = epsilon_window(2, 0.25, 0.05);
  auto f = linear_family();
  f.beta_lo = 3.0;
  CHECK_THROWS_AS(find_beta_brackets(f, k2, w), BracketError);
}

TEST_CASE("large X is flagged on the bracket") {
  const auto w = epsilon_window(2, 0.25, 0.05);
  auto f = linear_family();
  f.eval = [](double beta) { return std::make_pair(beta / 2.0, 1.0); };
  const auto b = find_beta_brackets(f, k2, w);
  const auto* c = b.checks.find("x0_lt_w_bar_on_bracket");
  REQUIRE(c != nullptr);
  CHECK_FALSE(c->pass);
}

TEST_CASE("predicted limits") {
  CHECK(predicted_limit(1, 2.0) == doctest::Approx(0.5));
  CHECK(predicted_limit(2, 2.0) == doctest::Approx(3.0 / 4.0));
  CHECK(predicted_limit(3, 2.0) == doctest::Approx(15.0 / 8.0));
  CHECK_THROWS_AS(predicted_limit(0, 1.0), DomainError);
}

TEST_CASE("parameter selection") {
  const auto sel = select_parameters(2, 0.25, 0.05);
  const double vb = sel.window.v_bar;
  const double g = sel.gamma;
  const double m = sel.params.mass;
  CHECK(m * g * g == doctest::Approx(72.0 * vb));
  CHECK(sel.params.a == doctest::Approx(-g * sel.params.b));
  const double lower = (m * g * g / 36.0) * -std::expm1(-3.0 * sel.beta_hat / (m * g));
  CHECK(lower == doctest::Approx(vb).epsilon(1e-12));
  const double b = sel.params.b;
  const double upper =
      (sel.beta_low * g / 8.0) * (1.0 + std::sqrt(1.0 + 16.0 / (sel.beta_low * g * g * b)));
  CHECK(upper == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sel.x0_bound < sel.window.w_bar);
  // One halving earlier the literal criterion fails.
  CHECK(sel.x0_bound * 2.0 >= sel.window.w_bar);
  CHECK(sel.x0_bound_consistent > sel.x0_bound);
  CHECK(sel.rigidity > 0.0);
  CHECK(sel.rigidity < 1.0);
  const auto* lit = sel.certificate.find("x0_bound_literal_lt_w_bar");
  const auto* cons = sel.certificate.find("x0_bound_lt_w_bar");
  REQUIRE(lit != nullptr);
  REQUIRE(cons != nullptr);
  CHECK_FALSE(lit->gating);
  CHECK(cons->gating);
  const auto j = certificate_json(sel, nullptr);
  CHECK(j.contains("v_bar"));
  CHECK(j.contains("beta_low"));
  CHECK(j["checks"]["checks"].size() == sel.certificate.checks.size());
}
