#include "hqao/rg_flow.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hqao/errors.hpp"
#include "hqao/io.hpp"
#include "hqao/lattice_mc.hpp"

namespace hqao {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

int kappa_of_slot(int slot) { return (slot + 1) / 2; }

// M indices at positions (u + j) / M of the cumulative weights.
std::vector<int> systematic(const double* w, int M, double u) {
  std::vector<int> idx(M);
  double total = 0.0;
  for (int i = 0; i < M; ++i) total += w[i];
  double cum = w[0] / total;
  int i = 0;
  for (int j = 0; j < M; ++j) {
    const double pos = (u + j) / M;
    while (pos > cum && i < M - 1) cum += w[++i] / total;
    idx[j] = i;
  }
  return idx;
}

double island_ess(const double* w, int M) {
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < M; ++i) {
    s += w[i];
    s2 += w[i] * w[i];
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

void check_population(const FlowOptions& opts) {
  if (opts.population < 1000) throw DomainError("population must be at least 10^3");
  if (opts.islands < 2 || opts.population % opts.islands != 0)
    throw DomainError("population must split into at least two equal islands");
  if (opts.cutoff < 0) throw DomainError("cutoff must be non-negative");
}

}  // namespace

double mode_frequency(double beta, int slot) { return 2.0 * M_PI * kappa_of_slot(slot) / beta; }

std::vector<double> project_path(const std::vector<double>& x, double beta, int cutoff) {
  const int N = static_cast<int>(x.size());
  if (N < 2 * cutoff + 1) throw DomainError("need at least 2 cutoff + 1 slices to resolve the modes");
  const double h = beta / N;
  std::vector<double> c(2 * cutoff + 1, 0.0);
  double sum = 0.0;
  for (double v : x) sum += v;
  c[0] = h * sum / std::sqrt(beta);
  const double norm = std::sqrt(2.0 / beta) * h;
  for (int k = 1; k <= cutoff; ++k) {
    double re = 0.0, im = 0.0;
    for (int t = 0; t < N; ++t) {
      const double phase = 2.0 * M_PI * k * t / N;
      re += x[t] * std::cos(phase);
      im += x[t] * std::sin(phase);
    }
    c[2 * k - 1] = norm * re;
    c[2 * k] = -norm * im;
  }
  return c;
}

PathEnsemble init_level0(const ModelParams& model, const FlowOptions& opts) {
  check_population(opts);
  model.validate();
  PathEnsemble e;
  e.beta = model.beta;
  e.mass = model.mass;
  e.cutoff = opts.cutoff;
  e.population = opts.population;
  e.islands = opts.islands;
  const int D = e.dim();
  const int M = e.island_size();
  e.paths.resize(static_cast<std::size_t>(e.population) * D);
  e.weights.assign(e.population, 1.0 / e.population);
  e.ess = e.population;

  if (model.gaussian()) {
    if (!(model.a > 0.0)) throw DomainError("Gaussian initialisation needs a > 0");
    std::vector<double> sd(D);
    for (int s = 0; s < D; ++s) {
      const double q = mode_frequency(e.beta, s);
      sd[s] = 1.0 / std::sqrt(model.mass * q * q + model.a);
    }
    for (int isl = 0; isl < e.islands; ++isl) {
      std::mt19937_64 rng(derive_seed(opts.seed, isl));
      std::normal_distribution<double> normal;
      for (int i = isl * M; i < (isl + 1) * M; ++i)
        for (int s = 0; s < D; ++s) e.paths[static_cast<std::size_t>(i) * D + s] = sd[s] * normal(rng);
    }
    return e;
  }

  int N = opts.init_slices;
  if (N <= 0) {
    N = 8;
    while (N < 4 * opts.cutoff) N *= 2;
  }
  const auto lattice = build_lattice_model(0, N, HierarchyParams{}, model);
  MCOptions mc;
  mc.burn_in = opts.init_burn_in;
  for (int isl = 0; isl < e.islands; ++isl) {
    const auto samples = mc_sample_paths(lattice, M, opts.init_thin, derive_seed(opts.seed, isl), mc);
    for (int j = 0; j < M; ++j) {
      const auto c = project_path(samples[j], e.beta, e.cutoff);
      std::copy(c.begin(), c.end(), e.paths.begin() + static_cast<std::ptrdiff_t>(isl * M + j) * D);
    }
  }
  return e;
}

PathEnsemble rg_step(const PathEnsemble& in, const HierarchyParams& hier, std::uint64_t seed,
                     const FlowOptions& opts) {
  if (in.ess < opts.ess_floor * in.population) throw DomainError("input ESS below the floor");
  PathEnsemble out = in;
  out.level = in.level + 1;
  out.diverged = false;
  const int D = in.dim();
  const int M = in.island_size();
  const double scale = std::pow(static_cast<double>(hier.kappa), -0.5 * (1.0 + hier.delta));
  std::vector<double> child(D);
  std::vector<double> logw(M);
  double ess_total = 0.0;

  for (int isl = 0; isl < in.islands; ++isl) {
    std::mt19937_64 rng(derive_seed(seed, isl));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const int base = isl * M;
    std::vector<std::vector<int>> parents(hier.kappa);
    for (auto& p : parents) {
      p = systematic(in.weights.data() + base, M, uniform(rng));
      std::shuffle(p.begin(), p.end(), rng);
    }
    double lw_max = -1e300;
    for (int c = 0; c < M; ++c) {
      std::fill(child.begin(), child.end(), 0.0);
      for (int j = 0; j < hier.kappa; ++j) {
        const double sign = opts.symmetrize && uniform(rng) < 0.5 ? -scale : scale;
        const double* p = in.path(base + parents[j][c]);
        for (int s = 0; s < D; ++s) child[s] += sign * p[s];
      }
      double norm2 = 0.0;
      for (int s = 0; s < D; ++s) norm2 += child[s] * child[s];
      logw[c] = 0.5 * hier.theta * norm2;
      lw_max = std::max(lw_max, logw[c]);
      std::copy(child.begin(), child.end(), out.paths.begin() + static_cast<std::ptrdiff_t>(base + c) * D);
    }
    if (lw_max > opts.log_weight_ceiling) out.diverged = true;
    double total = 0.0;
    for (int c = 0; c < M; ++c) total += out.weights[base + c] = std::exp(logw[c] - lw_max);
    for (int c = 0; c < M; ++c) out.weights[base + c] /= total * in.islands;
    const double ess = island_ess(out.weights.data() + base, M);
    ess_total += ess;
    if (ess < 0.5 * M) {
      const auto idx = systematic(out.weights.data() + base, M, uniform(rng));
      std::vector<double> copy(out.paths.begin() + static_cast<std::ptrdiff_t>(base) * D,
                               out.paths.begin() + static_cast<std::ptrdiff_t>(base + M) * D);
      for (int c = 0; c < M; ++c)
        std::copy(copy.begin() + static_cast<std::ptrdiff_t>(idx[c]) * D,
                  copy.begin() + static_cast<std::ptrdiff_t>(idx[c] + 1) * D,
                  out.paths.begin() + static_cast<std::ptrdiff_t>(base + c) * D);
      std::fill(out.weights.begin() + base, out.weights.begin() + base + M, 1.0 / in.population);
    }
  }
  // ESS of the reweighting itself, before any resampling.
  out.ess = ess_total;
  return out;
}

LevelEstimate estimate_level(const PathEnsemble& e, const HierarchyParams& hier) {
  const int D = e.dim();
  const int M = e.island_size();
  const int nq = std::min(e.cutoff, 8) + 1;
  const double beta = e.beta;
  // Raw observables: B^2, B^4, A, A B^2, then the mode variances.
  enum { kB2, kB4, kA, kAB2, kModes };
  std::vector<std::vector<double>> batches;
  for (int isl = 0; isl < e.islands; ++isl) {
    std::vector<double> m(kModes + nq, 0.0);
    double wsum = 0.0;
    for (int i = isl * M; i < (isl + 1) * M; ++i) {
      const double w = e.weights[i];
      const double* c = e.path(i);
      double norm2 = 0.0;
      for (int s = 0; s < D; ++s) norm2 += c[s] * c[s];
      const double B2 = beta * c[0] * c[0];
      const double A = norm2 / beta;
      m[kB2] += w * B2;
      m[kB4] += w * B2 * B2;
      m[kA] += w * A;
      m[kAB2] += w * A * B2;
      m[kModes] += w * c[0] * c[0];
      for (int k = 1; k < nq; ++k) m[kModes + k] += w * 0.5 * (c[2 * k - 1] * c[2 * k - 1] + c[2 * k] * c[2 * k]);
      wsum += w;
    }
    for (double& v : m) v /= wsum;
    batches.push_back(std::move(m));
  }
  LevelEstimate est;
  est.level = e.level;
  for (int k = 0; k < nq; ++k)
    est.u_hat_q.push_back(jackknife(batches, [k](const std::vector<double>& m) { return m[kModes + k]; }));
  est.u_hat = est.u_hat_q[0];
  est.x_n = jackknife(batches, [beta](const std::vector<double>& m) {
    const double r = m[kB2] / beta;
    return -(m[kAB2] - m[kA] * m[kB2] - 2.0 * r * r);
  });
  est.ursell2 = jackknife(batches, [](const std::vector<double>& m) { return m[kB2]; });
  est.ursell4 =
      jackknife(batches, [](const std::vector<double>& m) { return m[kB4] - 3.0 * m[kB2] * m[kB2]; });
  est.ursell_ratio = jackknife(
      batches, [](const std::vector<double>& m) { return (m[kB4] - 3.0 * m[kB2] * m[kB2]) / (m[kB2] * m[kB2]); });
  est.ess = e.ess;
  est.diverged = e.diverged;
  est.tail_bound = e.cutoff > 0 ? std::pow(static_cast<double>(hier.kappa), -e.level * hier.delta) * beta * beta /
                                      (2.0 * M_PI * M_PI * e.mass * e.cutoff)
                                : INFINITY;
  return est;
}

FlowResult flow_run(const ModelParams& model, const HierarchyParams& hier, int n_max, const FlowOptions& opts) {
  if (n_max < 0) throw DomainError("n_max must be non-negative");
  FlowResult r;
  r.seed = opts.seed;
  r.population = opts.population;
  FlowOptions o = opts;
  o.seed = derive_seed(opts.seed, 0);
  PathEnsemble e = init_level0(model, o);
  const auto collapsed = [&](const PathEnsemble& x) {
    return x.diverged || x.ess < opts.ess_floor * x.population;
  };
  r.levels.push_back(estimate_level(e, hier));
  for (int n = 1; n <= n_max && !collapsed(e); ++n) {
    e = rg_step(e, hier, derive_seed(opts.seed, static_cast<std::uint64_t>(n)), opts);
    r.levels.push_back(estimate_level(e, hier));
  }
  if (collapsed(e)) r.collapse_level = e.level;
  return r;
}

std::string to_csv(const FlowResult& r) {
  std::string out = "level,u_hat,u_hat_err,X,X_err,ess,diverged\n";
  for (const auto& l : r.levels)
    out += csv_row({std::to_string(l.level), csv_double(l.u_hat.mean), csv_double(l.u_hat.err),
                    csv_double(l.x_n.mean), csv_double(l.x_n.err), csv_double(l.ess), l.diverged ? "1" : "0"});
  return out;
}

nlohmann::json to_json(const FlowResult& r) {
  auto est = [](const Estimate& e) { return nlohmann::json{{"mean", e.mean}, {"stderr", e.err}}; };
  nlohmann::json j;
  j["seed"] = r.seed;
  j["population"] = r.population;
  j["collapse_level"] = r.collapse_level;
  j["levels"] = nlohmann::json::array();
  for (const auto& l : r.levels) {
    nlohmann::json uq = nlohmann::json::array();
    for (const auto& u : l.u_hat_q) uq.push_back(est(u));
    j["levels"].push_back({{"level", l.level},
                           {"u_hat", est(l.u_hat)},
                           {"u_hat_q", uq},
                           {"X", est(l.x_n)},
                           {"ursell2", est(l.ursell2)},
                           {"ursell4", est(l.ursell4)},
                           {"ursell_ratio", est(l.ursell_ratio)},
                           {"ess", l.ess},
                           {"diverged", l.diverged},
                           {"tail_bound", l.tail_bound}});
  }
  return j;
}

}  // namespace hqao
