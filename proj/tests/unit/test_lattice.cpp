#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "hqao/errors.hpp"
#include "hqao/lattice_mc.hpp"
#include "hqao/spectral.hpp"

using namespace hqao;

namespace {

ModelParams params(double mass, double a, double b, double beta) {
  ModelParams p;
  p.mass = mass;
  p.a = a;
  p.b = b;
  p.beta = beta;
  return p;
}

// (h^2/beta) <|F_q|^2> straight from the inverse Hessian.
double direct_u_hat(const LatticeModel& m, int kappa) {
  const Eigen::MatrixXd K = Eigen::MatrixXd(m.quadratic_form());
  const Eigen::MatrixXd C = K.inverse();
  const int N = m.slices;
  Eigen::VectorXd c(K.rows()), s(K.rows());
  for (int i = 0; i < static_cast<int>(m.spatial_sites); ++i)
    for (int t = 0; t < N; ++t) {
      c(i * N + t) = m.fluctuation_scale() * std::cos(2.0 * M_PI * kappa * t / N);
      s(i * N + t) = m.fluctuation_scale() * std::sin(2.0 * M_PI * kappa * t / N);
    }
  const double h = m.slice_width;
  return h * h / m.model.beta * (c.dot(C * c) + s.dot(C * s));
}

double direct_gamma2(const LatticeModel& m, int j) {
  const Eigen::MatrixXd C = Eigen::MatrixXd(m.quadratic_form()).inverse();
  const int N = m.slices;
  const auto V = static_cast<int>(m.spatial_sites);
  double g = 0.0;
  for (int i = 0; i < V; ++i)
    for (int k = 0; k < V; ++k) g += C(i * N, k * N + j % N);
  return g * m.fluctuation_scale() * m.fluctuation_scale();
}

bool within(const Estimate& e, double exact, double n_sigma = 3.0) {
  return std::abs(e.mean - exact) <= n_sigma * e.err + 1e-12 * std::abs(exact);
}

MCOptions quick(std::uint64_t seed, long sweeps = 20000) {
  MCOptions o;
  o.sweeps = sweeps;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("discrete temporal symbol") {
  for (int N : {2, 8, 64}) CHECK(lambda_q(N, 3.0, 2.0, 0.0) == 1.0);

  // Second-order approach to 1/(mass q^2 + 1).
  const double beta = 2.0, mass = 1.5, q = 2.0 * M_PI * 3 / beta;
  const double exact = 1.0 / (mass * q * q + 1.0);
  for (int j = 4; j < 10; ++j) {
    const double e1 = lambda_q(1 << j, beta, mass, q) - exact;
    const double e2 = lambda_q(1 << (j + 1), beta, mass, q) - exact;
    CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.05));
  }

  const HierarchyParams hier = HierarchyParams::normalized(2, 0.25);
  const auto m = build_lattice_model(1, 16, hier, params(2.0, 0.5, 0.1, 3.0));
  const auto bad = build_lattice_model(1, 16, hier, params(2.0, 0.5, 0.1, 3.0), LatticeMutation::lambda_off_by_one);
  double worst = 0.0;
  for (int k = 0; k <= 8; ++k) {
    const double q = 2.0 * M_PI * k / 3.0;
    CHECK(temporal_symbol(m, q) == doctest::Approx(lambda_q(16, 3.0, 2.0, q)).epsilon(1e-14));
    worst = std::max(worst, std::abs(temporal_symbol(bad, q) / lambda_q(16, 3.0, 2.0, q) - 1.0));
  }
  CHECK(worst > 1e-3);
}

TEST_CASE("model construction") {
  const HierarchyParams hier = HierarchyParams::normalized(2, 0.25);
  const auto m = build_lattice_model(3, 8, hier, params(1.0, -1.0, 0.2, 2.0));
  CHECK(m.site_count == 64);
  CHECK(m.slice_width == doctest::Approx(0.25));
  CHECK(m.quartic_coeff == doctest::Approx(0.05));
  CHECK(m.quadratic_diag == doctest::Approx(-0.25));
  const Eigen::MatrixXd K = Eigen::MatrixXd(m.quadratic_form());
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  // Ferromagnetic: every off-diagonal entry is <= 0 in the Hessian.
  for (int i = 0; i < K.rows(); ++i)
    for (int j = 0; j < K.cols(); ++j)
      if (i != j) CHECK(K(i, j) <= 0.0);

  CHECK_THROWS_AS(build_lattice_model(0, 7, hier, params(1, 1, 0, 1)), DomainError);
  CHECK_THROWS_AS(build_lattice_model(0, 0, hier, params(1, 1, 0, 1)), DomainError);
  CHECK_THROWS_AS(build_lattice_model(12, 64, hier, params(1, 1, 0, 1)), RangeError);
}

TEST_CASE("lattice Gaussian oracle matches direct linear algebra") {
  const HierarchyParams hier = HierarchyParams::normalized(2, 0.25);
  SUBCASE("two slices, one site") {
    const auto m = build_lattice_model(0, 2, hier, params(1.3, 0.7, 0.0, 1.1));
    const auto g = lattice_gaussian_oracle(m, 2);
    // Hand inverse of [[h a + 2 bond, -2 bond], [-2 bond, h a + 2 bond]].
    const double h = 0.55, A = h * 0.7, bnd = 1.3 / h;
    const double u0 = h * h / 1.1 * 2.0 / A;
    const double u1 = h * h / 1.1 * 2.0 / (A + 4.0 * bnd);
    CHECK(g.u_hat[0] == doctest::Approx(u0).epsilon(1e-13));
    CHECK(g.u_hat[1] == doctest::Approx(u1).epsilon(1e-13));
    CHECK(direct_u_hat(m, 0) == doctest::Approx(u0).epsilon(1e-12));
  }
  SUBCASE("hierarchical") {
    for (int n : {1, 2}) {
      const auto m = build_lattice_model(n, 6, hier, params(0.8, 0.9, 0.0, 1.7));
      const auto g = lattice_gaussian_oracle(m, 4);
      for (int k = 0; k < 4; ++k) CHECK(g.u_hat[k] == doctest::Approx(direct_u_hat(m, k)).epsilon(1e-11));
      for (int j = 0; j <= 6; ++j) CHECK(g.gamma2[j] == doctest::Approx(direct_gamma2(m, j)).epsilon(1e-11));
    }
  }
}

TEST_CASE("continuum Gaussian oracle") {
  const HierarchyParams hier = HierarchyParams::normalized(2, 0.25);
  const auto p = params(1.5, 0.8, 0.0, 2.0);
  for (double q : {0.0, M_PI, 3 * M_PI})
    CHECK(gaussian_oracle(0, hier, p, q).u_hat == doctest::Approx(1.0 / (1.5 * q * q + 0.8)).epsilon(1e-14));

  const HierarchyParams free = HierarchyParams::decoupled(3, 0.3);
  for (int n = 0; n <= 4; ++n)
    CHECK(gaussian_oracle(n, free, p, M_PI).u_hat ==
          doctest::Approx(std::pow(3.0, -0.3 * n) / (1.5 * M_PI * M_PI + 0.8)).epsilon(1e-12));

  // n = 1, kappa = 2: M = -theta 2^{-1-delta} (all-ones 2x2).
  const double c = hier.theta * std::pow(2.0, -1.25);
  const double s = 1.5 * M_PI * M_PI + 0.8;
  const double u1 = std::pow(2.0, -1.25) * 2.0 / (s - 2.0 * c);
  CHECK(gaussian_oracle(1, hier, p, M_PI).u_hat == doctest::Approx(u1).epsilon(1e-13));

  // Gamma_2 integrates to u_hat(0) and matches the LDLT value.
  for (int n : {0, 2, 3}) {
    const auto g = gaussian_oracle(n, hier, p, 0.0, 401);
    double integral = 0.0;
    const double dt = 2.0 / 400;
    for (int i = 0; i <= 400; ++i) integral += (i == 0 || i == 400 ? 1.0 : (i % 2 ? 4.0 : 2.0)) * g.gamma2[i];
    integral *= dt / 3.0;
    CHECK(integral == doctest::Approx(g.u_hat).epsilon(1e-8));
    CHECK(g.gamma2.front() == doctest::Approx(g.gamma2.back()).epsilon(1e-14));
  }

  // Lattice Gamma_2 converges to the continuum one.
  const auto ref = gaussian_gamma2(1, hier, p, 0.5);
  const auto coarse = lattice_gaussian_oracle(build_lattice_model(1, 16, hier, p)).gamma2[4];
  const auto fine = lattice_gaussian_oracle(build_lattice_model(1, 64, hier, p)).gamma2[16];
  CHECK(std::abs(fine - ref) < 0.3 * std::abs(coarse - ref));

  CHECK_THROWS_AS(gaussian_oracle(0, hier, params(1, -0.1, 0, 1), 0.0), StabilityError);
  CHECK_THROWS_AS(gaussian_oracle(3, hier, params(1, 0.1, 0, 1), 0.0), StabilityError);
  CHECK_THROWS_AS(gaussian_oracle(0, hier, params(1, 1, 0.1, 1), 0.0), DomainError);
}

TEST_CASE("MC reproduces the Gaussian lattice oracle") {
  const HierarchyParams hier = HierarchyParams::normalized(2, 0.25);
  for (int n : {0, 2}) {
    const auto m = build_lattice_model(n, 16, hier, params(1.0, 1.0, 0.0, 2.0));
    const auto est = mc_estimate(m, quick(11 + n, 40000));
    const auto exact = lattice_gaussian_oracle(m, 8);
    CHECK(est.acceptance > 0.2);
    CHECK(est.acceptance < 0.8);
    for (int k = 0; k < 8; ++k) CHECK(within(est.u_hat[k], exact.u_hat[k], 3.5));
    for (int j : {0, 4, 8, 12}) CHECK(within(est.gamma2[j], exact.gamma2[j], 3.5));
    CHECK(within(est.x_n, 0.0, 3.5));
    CHECK(within(est.ursell4_integrated, 0.0, 3.5));
    CHECK(est.tau_int > 0.0);
  }
}

TEST_CASE("MC against the spectral solution") {
  const auto p = params(1.0, -1.0, 0.5, 1.0);
  const auto spec = build_and_diagonalize(p, 32);
  const auto m = build_lattice_model(0, 64, HierarchyParams::normalized(2, 0.25), p);
  const auto est = mc_estimate(m, quick(5, 40000));
  // Discretization bias at h = 1/64 is far below the statistical error.
  CHECK(within(est.u_hat[0], u_hat0_spectral(spec, 1.0, 0.0)));
  CHECK(within(est.u_hat[1], u_hat0_spectral(spec, 1.0, 2.0 * M_PI), 3.5));
  CHECK(within(est.gamma2[32], correlation_gamma2(spec, 1.0, 0.5)));
  CHECK(within(est.x_n, x0_spectral(spec, 1.0)));
  CHECK(est.ursell[1].mean < 0.0);
}

TEST_CASE("correlation inequalities on MC") {
  const HierarchyParams hier = HierarchyParams::normalized(2, 0.25);
  const auto m = build_lattice_model(2, 16, hier, params(1.0, -0.5, 0.3, 2.0));
  const auto est = mc_estimate(m, quick(3));
  const auto rep = mc_inequality_report(est);
  for (const auto& c : rep.checks) CHECK_MESSAGE(c.pass, c.name);
  const auto table = est.ursell_table();
  CHECK(table.u(2) <= 3.0 * table.err(2));
}

TEST_CASE("determinism and guards") {
  const HierarchyParams hier = HierarchyParams::normalized(2, 0.25);
  const auto m = build_lattice_model(1, 8, hier, params(1.0, 0.5, 0.2, 1.0));
  auto quick = [](std::uint64_t seed, long sweeps = 20000) {
    MCOptions o = ::quick(seed, sweeps);
    o.q_modes = 4;
    return o;
  };
  const auto a = mc_estimate(m, quick(9, 10000));
  const auto b = mc_estimate(m, quick(9, 10000));
  const auto c = mc_estimate(m, quick(10, 10000));
  CHECK(to_csv(a) == to_csv(b));
  CHECK(to_csv(a) != to_csv(c));

  MCOptions chains = quick(9, 16000);
  chains.chains = 2;
  chains.batches = 16;
  const auto one = mc_estimate(m, chains);
  chains.threads = 2;
  CHECK(to_csv(mc_estimate(m, chains)) == to_csv(one));

  CHECK_THROWS_AS(mc_estimate(m, quick(1, 5000)), DomainError);
  MCOptions few = quick(1);
  few.batches = 8;
  CHECK_THROWS_AS(mc_estimate(m, few), DomainError);
}
