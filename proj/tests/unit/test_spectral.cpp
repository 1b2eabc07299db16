#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hqao/errors.hpp"
#include "hqao/numerics.hpp"
#include "hqao/spectral.hpp"

using namespace hqao;

namespace {

ModelParams harmonic(double beta) { return {1.0, 1.0, 0.0, beta}; }
ModelParams physical() { return {20.0, -1.0, 0.05, 4.0}; }

// <q(0)^2 q(t1) q(t2)> by explicit operator products in the eigenbasis.
double gamma4_direct(const SpectralSolution& s, double beta, double t1, double t2) {
  const int n = s.trusted;
  const double lo = std::min(t1, t2), hi = std::max(t1, t2);
  const Eigen::ArrayXd e = s.energies.head(n).array() - s.energies(0);
  auto prop = [&](double t) { return Eigen::MatrixXd(Eigen::VectorXd((-t * e).exp()).asDiagonal()); };
  const Eigen::MatrixXd m = prop(beta - hi) * s.q_matrix * prop(hi - lo) * s.q_matrix * prop(lo) * s.q2_matrix;
  return m.trace() / (-beta * e).exp().sum();
}

}  // namespace

TEST_CASE("harmonic spectrum and propagator") {
  const auto s = build_and_diagonalize(harmonic(1.0), 64);
  for (int p = 0; p < 10; ++p) CHECK(s.energies(p) == doctest::Approx(p + 0.5).epsilon(1e-12));
  CHECK(s.q_matrix(0, 0) == 0.0);
  CHECK(s.q_matrix(1, 1) == 0.0);
  for (double beta : {1.0, 4.0}) {
    for (int k = -8; k <= 8; ++k) {
      const double q = 2 * M_PI * k / beta;
      CHECK(u_hat0_spectral(s, beta, q) == doctest::Approx(1.0 / (1.0 + q * q)).epsilon(1e-10));
    }
    for (double tau : {0.0, 0.3 * beta, 0.5 * beta, beta}) {
      const double ref = std::cosh(0.5 * beta - tau) / (2.0 * std::sinh(0.5 * beta));
      CHECK(correlation_gamma2(s, beta, tau) == doctest::Approx(ref).epsilon(1e-10));
    }
  }
  CHECK(correlation_gamma2(build_and_diagonalize(harmonic(60.0), 64), 60.0, 0.0) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(x0_spectral(s, 4.0)) < 1e-10);
  CHECK_THROWS_AS(correlation_gamma2(s, 4.0, 4.5), DomainError);
}

TEST_CASE("weak quartic perturbation") {
  const double b = 1e-8;
  const auto s = build_and_diagonalize({1.0, 1.0, b, 1.0}, 64);
  CHECK(s.energies(1) - s.energies(0) == doctest::Approx(1.0 + 3.0 * b).epsilon(1e-13));
  CHECK(std::abs(s.energies(1) - s.energies(0) - 1.0) < 1e-6);
}

TEST_CASE("parity structure and increasing energies") {
  const auto s = build_and_diagonalize(physical(), 64);
  for (int p = 1; p < s.trusted; ++p) CHECK(s.energies(p) > s.energies(p - 1));
  for (int p = 0; p < s.trusted; ++p)
    for (int r = 0; r < s.trusted; ++r) {
      if (s.parity[p] == s.parity[r]) CHECK(s.q_matrix(p, r) == 0.0);
      CHECK(s.q_matrix(p, r) == s.q_matrix(r, p));
    }
}

TEST_CASE("correlation function identities") {
  const auto p = physical();
  const auto s = build_and_diagonalize(p, 64);
  const double beta = p.beta;
  const double u0 = u_hat0_spectral(s, beta, 0.0);
  for (double tau : {0.1, 0.7, 1.9}) {
    CHECK(correlation_gamma2(s, beta, tau) ==
          doctest::Approx(correlation_gamma2(s, beta, beta - tau)).epsilon(1e-13));
  }
  // Simpson integral over tau recovers u0
  const int n = 400;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    integral += w * correlation_gamma2(s, beta, beta * i / n);
  }
  integral *= beta / (3.0 * n);
  CHECK(integral == doctest::Approx(u0).epsilon(1e-8));

  // Fourier sum over Matsubara frequencies with a 1/(m q^2) tail estimate
  double sum = u0;
  for (int k = 1; k <= 256; ++k) sum += 2.0 * u_hat0_spectral(s, beta, 2 * M_PI * k / beta);
  const double tail = 2.0 * beta * beta / (p.mass * 4 * M_PI * M_PI * 256.0);
  const double eta = correlation_gamma2(s, beta, 0.0);
  CHECK(std::abs(sum / beta - eta) <= tail / beta);

  for (int k = 1; k <= 16; ++k) {
    const double q = 2 * M_PI * k / beta;
    const double u = u_hat0_spectral(s, beta, q);
    CHECK(u > 0.0);
    CHECK(u <= u0);
    CHECK(u <= 1.0 / (p.mass * q * q));
    CHECK(u == doctest::Approx(u_hat0_spectral(s, beta, -q)));
  }
}

TEST_CASE("four-point integral against direct quadrature") {
  const ModelParams p{2.0, -1.0, 0.3, 1.5};
  const auto s = build_and_diagonalize(p, 32);
  const double beta = p.beta;
  const int n = 60;
  const double h = beta / n;
  double phi = 0.0;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      const double wi = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const double wj = (j == 0 || j == n) ? 1.0 : (j % 2 ? 4.0 : 2.0);
      phi += wi * wj * gamma4_direct(s, beta, i * h, j * h);
    }
  phi *= h * h / 9.0;
  // The integrand has a kink on the diagonal, so Simpson is only O(h^2) there.
  CHECK(gamma4_coincident_integral(s, beta) == doctest::Approx(phi).epsilon(2e-4));
}

TEST_CASE("sum rule and double commutator") {
  const auto s = build_and_diagonalize(physical(), 80);
  CHECK(std::abs(sum_rule_residual(s, 4.0)) < 1e-4);
  for (const ModelParams& p : {physical(), ModelParams{1.0, 1.0, 1.0, 1.0}, ModelParams{0.3, -2.0, 0.1, 1.0}})
    CHECK(double_commutator_residual(p, 60) < 1e-8);
}

TEST_CASE("X0 and initial bounds") {
  const auto p = physical();
  const auto s = build_and_diagonalize(p, 64);
  const double x0 = x0_spectral(s, p.beta);
  CHECK(x0 >= 0.0);
  const auto report = check_initial_bounds(s, p);
  for (const auto& c : report.checks) {
    INFO(c.name << " lhs=" << c.lhs << " rhs=" << c.rhs);
    CHECK(c.pass);
  }
  CHECK_THROWS_AS(check_initial_bounds(s, harmonic(1.0)), DomainError);
}

TEST_CASE("small beta drives u0 to zero and large beta exceeds the window") {
  const ModelParams p{1.0, -1.0, 1.0, 0.2};
  const auto s = build_and_diagonalize(p, 64);
  const double u_small = u_hat0_spectral(s, 0.2, 0.0);
  CHECK(u_small < u_hat0_spectral(s, 0.8, 0.0));
  CHECK(u_hat0_spectral(s, 0.8, 0.0) < u_hat0_spectral(s, 3.2, 0.0));
  CHECK(u_small < 0.2);

  // m gamma^2 = 20 * 400 far above 36 * 1.18
  const ModelParams big{20.0, -1.0, 0.05, 4.0};
  const auto s2 = build_and_diagonalize(big, 64);
  CHECK(u_hat0_spectral(s2, 4.0, 0.0) > 1.18);
}

TEST_CASE("u0 increases with beta") {
  ModelParams p{5.0, -1.0, 0.1, 0.5};
  const auto s = build_and_diagonalize(p, 64);
  double prev = 0.0;
  for (double beta = 0.5; beta <= 6.0; beta += 0.25) {
    const double u = u_hat0_spectral(s, beta, 0.0);
    CHECK(u > prev);
    prev = u;
  }
}

TEST_CASE("rigidity grows like mass^(-1/3) for small mass") {
  std::vector<double> x, y;
  for (double m : {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}) {
    SpectralOptions opts;
    opts.hops = 1;
    const auto s = build_and_diagonalize({m, -1.0, 1.0, 1.0}, 64, opts);
    const auto er = eta_and_rigidity(s, 1.0);
    x.push_back(std::log(m));
    y.push_back(std::log(er.rigidity));
  }
  const auto fit = fit_line(x, y);
  CHECK(fit.slope == doctest::Approx(-1.0 / 3.0).epsilon(0.1));
}

TEST_CASE("truncation failure is reported") {
  SpectralOptions opts;
  opts.k_max = 16;
  CHECK_THROWS_AS(build_and_diagonalize({100.0, -1.0, 0.01, 10.0}, 8, opts), TruncationError);
}

TEST_CASE("upper shift bound: literal form fails away from |a| = 1") {
  const ModelParams p{1.0, -0.2, 0.04, 0.5};
  const auto s = build_and_diagonalize(p, 64);
  const auto r = check_initial_bounds(s, p);
  CHECK(r.find("u0_upper_shift")->pass);
  CHECK_FALSE(r.find("u0_upper_shift_literal")->pass);
  CHECK(r.all_pass());
}
