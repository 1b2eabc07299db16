#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hqao/bounds.hpp"
#include "hqao/errors.hpp"
#include "hqao/lattice_mc.hpp"
#include "hqao/rg_flow.hpp"

using namespace hqao;

namespace {

ModelParams gaussian_model() {
  ModelParams p;
  p.mass = 1.0;
  p.a = 1.0;
  p.b = 0.0;
  p.beta = 2.0;
  return p;
}

FlowOptions small(int pop = 32000, std::uint64_t seed = 5) {
  FlowOptions o;
  o.population = pop;
  o.cutoff = 16;
  o.seed = seed;
  return o;
}

bool within(const Estimate& e, double target, double n_sigma = 3.0) {
  return std::abs(e.mean - target) <= n_sigma * e.err;
}

}  // namespace

TEST_CASE("projection of a single cosine") {
  const int N = 64;
  const double beta = 3.0;
  std::vector<double> x(N);
  for (int t = 0; t < N; ++t) x[t] = 0.7 * std::cos(2.0 * M_PI * 3 * t / N) + 0.2;
  const auto c = project_path(x, beta, 8);
  CHECK(c[0] == doctest::Approx(0.2 * std::sqrt(beta)).epsilon(1e-12));
  CHECK(c[5] == doctest::Approx(0.7 * std::sqrt(beta / 2.0)).epsilon(1e-12));
  for (int s = 1; s < 17; ++s)
    if (s != 5) CHECK(std::abs(c[s]) < 1e-12);
  CHECK(mode_frequency(beta, 5) == doctest::Approx(2.0 * M_PI * 3 / beta));
  CHECK(mode_frequency(beta, 6) == doctest::Approx(2.0 * M_PI * 3 / beta));
  CHECK_THROWS_AS(project_path(std::vector<double>(16, 0.0), beta, 8), DomainError);
}

TEST_CASE("Gaussian level 0 has the oscillator mode variances") {
  const auto p = gaussian_model();
  const auto e = init_level0(p, small());
  double wsum = 0.0;
  for (double w : e.weights) wsum += w;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.ess == doctest::Approx(e.population));
  const auto est = estimate_level(e, HierarchyParams::decoupled(2, 0.25));
  for (std::size_t k = 0; k < est.u_hat_q.size(); ++k) {
    const double q = 2.0 * M_PI * k / p.beta;
    CHECK(within(est.u_hat_q[k], 1.0 / (p.mass * q * q + p.a)));
  }
  CHECK(within(est.x_n, 0.0));
}

TEST_CASE("decoupled flow contracts by kappa^-delta per level") {
  const auto hier = HierarchyParams::decoupled(2, 0.25);
  const auto r = flow_run(gaussian_model(), hier, 6, small());
  REQUIRE(r.levels.size() == 7);
  CHECK(r.collapse_level == -1);
  std::vector<double> xs, ys, es;
  const double u0 = 1.0 / gaussian_model().a;
  for (const auto& l : r.levels) {
    // Equal weights: no resampling noise enters.
    CHECK(l.ess == doctest::Approx(r.population));
    CHECK(within(l.u_hat, u0 * std::pow(2.0, -0.25 * l.level)));
    xs.push_back(l.level);
    ys.push_back(std::log(l.u_hat.mean));
    es.push_back(l.u_hat.err / l.u_hat.mean);
  }
  const auto fit = fit_line(xs, ys, es);
  CHECK(std::abs(-fit.slope / std::log(2.0) - 0.25) < 0.02);
}

TEST_CASE("Gaussian flow with coupling matches the linear-algebra oracle") {
  const auto hier = HierarchyParams::normalized(2, 0.25);
  const auto p = gaussian_model();
  const auto r = flow_run(p, hier, 6, small(64000, 11));
  REQUIRE(r.levels.size() == 7);
  for (const auto& l : r.levels) {
    const double exact = gaussian_oracle(l.level, hier, p, 0.0).u_hat;
    CHECK(within(l.u_hat, exact));
    CHECK(within(l.x_n, 0.0, 4.0));
    const double q1 = 2.0 * M_PI / p.beta;
    CHECK(within(l.u_hat_q[1], gaussian_oracle(l.level, hier, p, q1).u_hat));
  }
}

TEST_CASE("quartic level 0 agrees with the spectral value") {
  ModelParams p;
  p.mass = 1.0;
  p.a = -1.0;
  p.b = 0.5;
  p.beta = 1.0;
  auto o = small(16000, 3);
  o.cutoff = 8;
  const auto e = init_level0(p, o);
  const auto est = estimate_level(e, HierarchyParams::normalized(2, 0.25));
  const auto spec = build_and_diagonalize(p, 64);
  CHECK(within(est.u_hat, u_hat0_spectral(spec, p.beta, 0.0)));
  CHECK(within(est.u_hat_q[1], u_hat0_spectral(spec, p.beta, 2.0 * M_PI / p.beta)));
  // Mean of the zero mode vanishes by symmetry; per-island means give the error.
  std::vector<double> means;
  for (int isl = 0; isl < e.islands; ++isl) {
    double m = 0.0;
    for (int i = isl * e.island_size(); i < (isl + 1) * e.island_size(); ++i) m += e.path(i)[0];
    means.push_back(m / e.island_size());
  }
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) / e.islands;
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  CHECK(std::abs(mean) < 3.0 * std::sqrt(var / (e.islands - 1) / e.islands));
  CHECK(est.x_n.mean > 0.0);
  CHECK(est.ursell4.mean < 0.0);
}

TEST_CASE("quartic flow respects the upper recurrence") {
  ModelParams p;
  p.mass = 1.0;
  p.a = -1.0;
  p.b = 0.5;
  p.beta = 1.0;
  auto o = small(16000, 4);
  o.cutoff = 8;
  const Kernels k{2, 0.25};
  const auto r = flow_run(p, HierarchyParams::normalized(2, 0.25), 4, o);
  for (std::size_t n = 1; n < r.levels.size(); ++n) {
    const auto& prev = r.levels[n - 1].u_hat;
    const auto& cur = r.levels[n].u_hat;
    if (!k.in_domain(prev.mean)) continue;
    const double bound = k(prev.mean).sigma * prev.mean;
    CHECK(cur.mean <= bound + 3.0 * std::hypot(cur.err, prev.err));
  }
}

TEST_CASE("strong coupling is reported as divergence, not thrown") {
  HierarchyParams hot = HierarchyParams::normalized(2, 0.25);
  hot.theta = 40.0;
  auto o = small(4000, 2);
  const auto r = flow_run(gaussian_model(), hot, 8, o);
  CHECK(r.collapse_level >= 1);
  CHECK(static_cast<int>(r.levels.size()) == r.collapse_level + 1);
  const auto& last = r.levels.back();
  CHECK((last.diverged || last.ess < o.ess_floor * o.population));
}

TEST_CASE("rerun is byte-identical") {
  const auto hier = HierarchyParams::normalized(2, 0.25);
  const auto a = to_csv(flow_run(gaussian_model(), hier, 3, small(8000, 9)));
  const auto b = to_csv(flow_run(gaussian_model(), hier, 3, small(8000, 9)));
  CHECK(a == b);
  CHECK(a.rfind("level,u_hat,u_hat_err,X,X_err,ess,diverged\n", 0) == 0);
  const auto c = to_csv(flow_run(gaussian_model(), hier, 3, small(8000, 10)));
  CHECK(a != c);
}

TEST_CASE("shuffling the input ensemble leaves the step unbiased") {
  const auto hier = HierarchyParams::normalized(2, 0.25);
  auto e = init_level0(gaussian_model(), small(32000, 21));
  auto shuffled = e;
  std::vector<int> perm(e.island_size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(99);
  const int D = e.dim();
  for (int isl = 0; isl < e.islands; ++isl) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int j = 0; j < e.island_size(); ++j)
      std::copy(e.path(isl * e.island_size() + perm[j]), e.path(isl * e.island_size() + perm[j]) + D,
                shuffled.paths.begin() + static_cast<std::ptrdiff_t>(isl * e.island_size() + j) * D);
  }
  const auto a = estimate_level(rg_step(e, hier, 7), hier);
  const auto b = estimate_level(rg_step(shuffled, hier, 7), hier);
  CHECK(std::abs(a.u_hat.mean - b.u_hat.mean) <= 4.0 * std::hypot(a.u_hat.err, b.u_hat.err));
}

TEST_CASE("guards") {
  CHECK_THROWS_AS(init_level0(gaussian_model(), small(500)), DomainError);
  auto o = small(1000);
  o.islands = 3;
  CHECK_THROWS_AS(init_level0(gaussian_model(), o), DomainError);
  auto bad = gaussian_model();
  bad.a = -1.0;
  CHECK_THROWS_AS(init_level0(bad, small()), DomainError);
  auto e = init_level0(gaussian_model(), small(2000));
  e.ess = 10.0;
  CHECK_THROWS_AS(rg_step(e, HierarchyParams::normalized(2, 0.25), 1), DomainError);
}
