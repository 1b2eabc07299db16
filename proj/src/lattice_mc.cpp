#include "hqao/lattice_mc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include <Eigen/Dense>

#include "hqao/errors.hpp"
#include "hqao/io.hpp"

namespace hqao {

double LatticeModel::fluctuation_scale() const {
  return std::pow(static_cast<double>(hier.kappa), -0.5 * level * (1.0 + hier.delta));
}

Eigen::SparseMatrix<double> LatticeModel::quadratic_form() const {
  if (site_count > kMaxQuadraticFormSites)
    throw RangeError("quadratic form with " + std::to_string(site_count) + " sites exceeds " +
                     std::to_string(kMaxQuadraticFormSites));
  const auto V = static_cast<int>(spatial_sites);
  const int N = slices;
  const double h = slice_width;
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < V; ++i)
    for (int t = 0; t < N; ++t) {
      const int r = i * N + t;
      trip.emplace_back(r, r, quadratic_diag + 2.0 * bond);
      trip.emplace_back(r, i * N + (t + 1) % N, -bond);
      trip.emplace_back(r, i * N + (t + N - 1) % N, -bond);
    }
  if (level > 0) {
    const Eigen::MatrixXd M = coupling_matrix(level, hier);
    for (int i = 0; i < V; ++i)
      for (int j = 0; j < V; ++j)
        for (int t = 0; t < N; ++t) trip.emplace_back(i * N + t, j * N + t, h * M(i, j));
  }
  Eigen::SparseMatrix<double> K(V * N, V * N);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

LatticeModel build_lattice_model(int n, int N, const HierarchyParams& hier, const ModelParams& model,
                                 LatticeMutation mutation) {
  if (N < 2 || N % 2 != 0) throw DomainError("slice count N must be even and >= 2");
  if (n < 0) throw DomainError("hierarchy level must be non-negative");
  model.validate();
  LatticeModel m;
  m.level = n;
  m.slices = N;
  m.hier = hier;
  m.model = model;
  m.spatial_sites = checked_pow(static_cast<std::uint64_t>(hier.kappa), n);
  if (m.spatial_sites > kMaxLatticeSites / static_cast<std::uint64_t>(N))
    throw RangeError("lattice with " + std::to_string(m.spatial_sites) + " x " + std::to_string(N) +
                     " sites exceeds " + std::to_string(kMaxLatticeSites));
  m.site_count = m.spatial_sites * static_cast<std::uint64_t>(N);
  m.slice_width = model.beta / N;
  const int bond_slices = mutation == LatticeMutation::lambda_off_by_one ? N - 1 : N;
  m.bond = model.mass * bond_slices / model.beta;
  m.quadratic_diag = m.slice_width * model.a;
  m.quartic_coeff = m.slice_width * model.b;
  m.level_weights = level_weights(n, hier);
  m.mutation = mutation;
  return m;
}

double lambda_q(int N, double beta, double mass, double q) {
  const double s = std::sin(beta * q / (2.0 * N));
  const double c = 2.0 * N / beta;
  return 1.0 / (mass * c * c * s * s + 1.0);
}

double temporal_symbol(const LatticeModel& model, double q) {
  const double h = model.slice_width;
  const double s = std::sin(0.5 * q * h);
  return 1.0 / (4.0 * model.bond / h * s * s + 1.0);
}

namespace {

// Raw per-measurement observables, averaged into batch means.
struct Layout {
  int q_modes = 0;
  int lag_count = 0;
  int half = 0;

  static constexpr int kB2 = 0, kB4 = 1, kB6 = 2, kB8 = 3, kA = 4, kAB2 = 5;
  int fourier(int k) const { return 6 + k; }
  int corr(int j) const { return 6 + q_modes + j; }
  int corr_b2(int j) const { return 6 + q_modes + (half + 1) + j; }
  int gks(int l) const { return 6 + q_modes + 2 * (half + 1) + l; }
  int pair(int l) const { return gks(lag_count) + l; }
  int size() const { return pair(lag_count); }
};

std::vector<int> diagnostic_lags(int N) {
  std::vector<int> lags;
  for (int j = 0; j <= 4; ++j) {
    const int k = static_cast<int>(std::lround(j * N / 8.0));
    if (lags.empty() || lags.back() != k) lags.push_back(k);
  }
  return lags;
}

class Chain {
 public:
  Chain(const LatticeModel& m, const MCOptions& opts, std::uint64_t seed, const Layout& layout,
        const std::vector<int>& lags)
      : m_(m), opts_(opts), layout_(layout), lags_(lags), rng_(seed) {
    V_ = static_cast<int>(m.spatial_sites);
    N_ = m.slices;
    n_ = m.level;
    h_ = m.slice_width;
    pow_.assign(n_ + 1, 1);
    for (int l = 1; l <= n_; ++l) pow_[l] = pow_[l - 1] * m.hier.kappa;
    x_.assign(static_cast<std::size_t>(V_) * N_, 0.0);
    sums_.resize(n_ + 1);
    for (int l = 1; l <= n_; ++l) sums_[l].assign(static_cast<std::size_t>(V_ / pow_[l]) * N_, 0.0);
    width_ = 1.0 / std::sqrt(2.0 * m.bond + h_ * (std::abs(m.model.a) + 1.0));
    shift_width_.resize(n_ + 1);
    for (int l = 0; l <= n_; ++l)
      shift_width_[l] = 1.0 / std::sqrt(m.model.beta * pow_[l] * (std::abs(m.model.a) + 1.0));
    shift_acc_.assign(n_ + 1, 0);
    shift_try_.assign(n_ + 1, 0);
    cos_.resize(static_cast<std::size_t>(layout.q_modes) * N_);
    sin_.resize(cos_.size());
    for (int k = 0; k < layout.q_modes; ++k)
      for (int t = 0; t < N_; ++t) {
        const double phase = 2.0 * M_PI * k * t / N_;
        cos_[k * N_ + t] = std::cos(phase);
        sin_[k * N_ + t] = std::sin(phase);
      }
    q_.resize(N_);
  }

  void burn_in(long sweeps) {
    const long window = 20;
    for (long s = 0; s < sweeps; ++s) {
      sweep();
      if ((s + 1) % window == 0) {
        adapt(width_, local_acc_, local_try_);
        for (int l = 0; l <= n_; ++l) adapt(shift_width_[l], shift_acc_[l], shift_try_[l]);
      }
    }
    local_acc_ = local_try_ = 0;
    std::fill(shift_acc_.begin(), shift_acc_.end(), 0);
    std::fill(shift_try_.begin(), shift_try_.end(), 0);
  }

  std::vector<double> batch(long sweeps) {
    rebuild_sums();
    std::vector<double> acc(layout_.size(), 0.0);
    std::vector<double> obs(layout_.size());
    for (long s = 0; s < sweeps; ++s) {
      sweep();
      measure(obs);
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += obs[j];
    }
    for (double& v : acc) v /= static_cast<double>(sweeps);
    return acc;
  }

  // Fluctuation path after `sweeps` further sweeps.
  const std::vector<double>& advance(long sweeps) {
    for (long s = 0; s < sweeps; ++s) sweep();
    rebuild_sums();
    const double scale = m_.fluctuation_scale();
    for (int t = 0; t < N_; ++t) q_[t] = scale * (n_ == 0 ? x(0, t) : block_sum(n_, 0, t));
    return q_;
  }

  long local_accepted() const { return local_acc_; }
  long local_tried() const { return local_try_; }
  long shift_accepted() const { return sum(shift_acc_); }
  long shift_tried() const { return sum(shift_try_); }

 private:
  static long sum(const std::vector<long>& v) {
    long s = 0;
    for (long x : v) s += x;
    return s;
  }

  void adapt(double& width, long& acc, long& tried) const {
    if (tried == 0) return;
    const double rate = static_cast<double>(acc) / tried;
    width *= std::clamp(rate / opts_.target_acceptance, 0.5, 2.0);
    acc = tried = 0;
  }

  double& x(int i, int t) { return x_[static_cast<std::size_t>(i) * N_ + t]; }
  double& block_sum(int l, int block, int t) { return sums_[l][static_cast<std::size_t>(block) * N_ + t]; }

  void rebuild_sums() {
    for (int l = 1; l <= n_; ++l) {
      std::fill(sums_[l].begin(), sums_[l].end(), 0.0);
      for (int i = 0; i < V_; ++i)
        for (int t = 0; t < N_; ++t) block_sum(l, i / pow_[l], t) += x(i, t);
    }
  }

  double potential_change(double v, double d) const {
    const double w = v + d;
    const double v2 = v * v, w2 = w * w;
    return m_.quadratic_diag * (v * d + 0.5 * d * d) + m_.quartic_coeff * (w2 * w2 - v2 * v2);
  }

  bool accept(double dS) {
    if (dS <= 0.0) return true;
    return uniform_(rng_) < std::exp(-dS);
  }

  void sweep() {
    for (int i = 0; i < V_; ++i)
      for (int t = 0; t < N_; ++t) local_move(i, t);
    if (opts_.collective_moves) {
      for (int l = 0; l <= n_; ++l)
        for (int b = 0; b < V_ / pow_[l]; ++b) shift_move(l, b);
      if (uniform_(rng_) < 0.5) {
        for (double& v : x_) v = -v;
        for (auto& s : sums_)
          for (double& v : s) v = -v;
      }
    }
  }

  void local_move(int i, int t) {
    const double d = width_ * (2.0 * uniform_(rng_) - 1.0);
    const double v = x(i, t);
    const double xl = x(i, (t + N_ - 1) % N_);
    const double xr = x(i, (t + 1) % N_);
    double dS = potential_change(v, d) + m_.bond * (d * (2.0 * v - xl - xr) + d * d);
    for (int l = 1; l <= n_; ++l)
      dS -= h_ * m_.level_weights[l - 1] * (block_sum(l, i / pow_[l], t) * d + 0.5 * d * d);
    ++local_try_;
    if (!accept(dS)) return;
    ++local_acc_;
    x(i, t) = v + d;
    for (int l = 1; l <= n_; ++l) block_sum(l, i / pow_[l], t) += d;
  }

  // Rigid shift of every site in a level-m block, at every time slice. The
  // kinetic term is unchanged; sub-block sums move by d kappa^l and
  // ancestor sums by d kappa^m.
  void shift_move(int m, int b) {
    const double d = shift_width_[m] * (2.0 * uniform_(rng_) - 1.0);
    const int first = b * pow_[m];
    const int last = first + pow_[m];
    double dS = 0.0;
    for (int i = first; i < last; ++i)
      for (int t = 0; t < N_; ++t) dS += potential_change(x(i, t), d);
    for (int l = 1; l <= n_; ++l) {
      const double w = h_ * m_.level_weights[l - 1];
      if (l <= m) {
        double sb = 0.0;
        for (int t = 0; t < N_; ++t) sb += m == 0 ? x(first, t) : block_sum(m, b, t);
        dS -= w * (d * pow_[l] * sb + 0.5 * d * d * pow_[m] * pow_[l] * N_);
      } else {
        double sa = 0.0;
        for (int t = 0; t < N_; ++t) sa += block_sum(l, first / pow_[l], t);
        dS -= w * (d * pow_[m] * sa + 0.5 * d * d * pow_[m] * pow_[m] * N_);
      }
    }
    ++shift_try_[m];
    if (!accept(dS)) return;
    ++shift_acc_[m];
    for (int i = first; i < last; ++i)
      for (int t = 0; t < N_; ++t) x(i, t) += d;
    for (int l = 1; l <= n_; ++l) {
      if (l <= m) {
        for (int sub = first / pow_[l]; sub < last / pow_[l]; ++sub)
          for (int t = 0; t < N_; ++t) block_sum(l, sub, t) += d * pow_[l];
      } else {
        for (int t = 0; t < N_; ++t) block_sum(l, first / pow_[l], t) += d * pow_[m];
      }
    }
  }

  void measure(std::vector<double>& obs) {
    const double scale = m_.fluctuation_scale();
    double B = 0.0, A = 0.0;
    for (int t = 0; t < N_; ++t) {
      q_[t] = scale * (n_ == 0 ? x(0, t) : block_sum(n_, 0, t));
      B += q_[t];
      A += q_[t] * q_[t];
    }
    B *= h_;
    A /= N_;
    const double B2 = B * B;
    obs[Layout::kB2] = B2;
    obs[Layout::kB4] = B2 * B2;
    obs[Layout::kB6] = B2 * B2 * B2;
    obs[Layout::kB8] = B2 * B2 * B2 * B2;
    obs[Layout::kA] = A;
    obs[Layout::kAB2] = A * B2;
    for (int k = 0; k < layout_.q_modes; ++k) {
      double re = 0.0, im = 0.0;
      for (int t = 0; t < N_; ++t) {
        re += q_[t] * cos_[k * N_ + t];
        im += q_[t] * sin_[k * N_ + t];
      }
      obs[layout_.fourier(k)] = re * re + im * im;
    }
    for (int j = 0; j <= layout_.half; ++j) {
      double c = 0.0;
      for (int t = 0; t < N_; ++t) c += q_[t] * q_[(t + j) % N_];
      c /= N_;
      obs[layout_.corr(j)] = c;
      obs[layout_.corr_b2(j)] = c * B2;
    }
    for (int l = 0; l < layout_.lag_count; ++l) {
      const int k = lags_[l];
      double g = 0.0, p = 0.0;
      for (int t = 0; t < N_; ++t) {
        const double a = q_[t], c = q_[(t + k) % N_];
        g += a * a * a * c;
        p += a * a * c * c;
      }
      obs[layout_.gks(l)] = g / N_;
      obs[layout_.pair(l)] = p / N_;
    }
  }

  const LatticeModel& m_;
  const MCOptions& opts_;
  const Layout& layout_;
  const std::vector<int>& lags_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  int V_ = 1, N_ = 2, n_ = 0;
  double h_ = 0.0;
  std::vector<int> pow_;
  std::vector<double> x_;
  std::vector<std::vector<double>> sums_;
  double width_ = 1.0;
  std::vector<double> shift_width_;
  long local_acc_ = 0, local_try_ = 0;
  std::vector<long> shift_acc_, shift_try_;
  std::vector<double> cos_, sin_, q_;
};

struct ChainResult {
  std::vector<std::vector<double>> batches;
  long local_acc = 0, local_try = 0, shift_acc = 0, shift_try = 0;
};

std::uint64_t chain_seed(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

UrsellTable MCEstimates::ursell_table() const {
  UrsellTable t;
  t.source = UrsellSource::mc;
  for (const auto& e : ursell) {
    t.values.push_back(e.mean);
    t.errors.push_back(e.err);
  }
  return t;
}

MCEstimates mc_estimate(const LatticeModel& model, const MCOptions& opts) {
  if (opts.sweeps < 10000) throw DomainError("mc_estimate needs at least 10^4 sweeps");
  if (model.model.b < 0.0) throw DomainError("quartic coefficient b must be non-negative");
  if (opts.chains < 1 || opts.batches < 2 || opts.chains * opts.batches < 16)
    throw DomainError("need at least 16 batches in total");
  if (opts.q_modes < 1 || opts.q_modes > model.slices / 2 + 1)
    throw DomainError("q_modes must lie in [1, N/2 + 1]");
  const int N = model.slices;
  const std::vector<int> lags = diagnostic_lags(N);
  Layout layout;
  layout.q_modes = opts.q_modes;
  layout.lag_count = static_cast<int>(lags.size());
  layout.half = N / 2;

  const long per_batch = opts.sweeps / (static_cast<long>(opts.chains) * opts.batches);
  if (per_batch < 1) throw DomainError("fewer sweeps than batches");
  const long burn = opts.burn_in > 0 ? opts.burn_in : std::max(1000L, opts.sweeps / 10);

  std::vector<ChainResult> results(opts.chains);
  auto run_chain = [&](int c) {
    Chain chain(model, opts, chain_seed(opts.seed, c), layout, lags);
    chain.burn_in(burn);
    auto& r = results[c];
    for (int b = 0; b < opts.batches; ++b) r.batches.push_back(chain.batch(per_batch));
    r.local_acc = chain.local_accepted();
    r.local_try = chain.local_tried();
    r.shift_acc = chain.shift_accepted();
    r.shift_try = chain.shift_tried();
  };
  const int threads = std::clamp(opts.threads, 1, opts.chains);
  if (threads == 1) {
    for (int c = 0; c < opts.chains; ++c) run_chain(c);
  } else {
    for (int start = 0; start < opts.chains; start += threads) {
      std::vector<std::thread> pool;
      for (int c = start; c < std::min(opts.chains, start + threads); ++c) pool.emplace_back(run_chain, c);
      for (auto& th : pool) th.join();
    }
  }

  std::vector<std::vector<double>> batches;
  long la = 0, lt = 0, sa = 0, st = 0;
  for (auto& r : results) {
    for (auto& b : r.batches) batches.push_back(std::move(b));
    la += r.local_acc;
    lt += r.local_try;
    sa += r.shift_acc;
    st += r.shift_try;
  }

  MCEstimates est;
  est.sweeps = per_batch * opts.batches * opts.chains;
  est.seed = opts.seed;
  est.batches = static_cast<int>(batches.size());
  est.chains = opts.chains;
  est.acceptance = static_cast<double>(la) / static_cast<double>(lt);
  est.shift_acceptance = st > 0 ? static_cast<double>(sa) / static_cast<double>(st) : 0.0;
  if (est.acceptance < 0.2 || est.acceptance > 0.8)
    throw TuningError("local acceptance rate " + csv_double(est.acceptance) + " outside [0.2, 0.8]");

  const double beta = model.model.beta;
  const double h = model.slice_width;
  auto linear = [&](int idx, double factor) {
    return jackknife(batches, [=](const std::vector<double>& m) { return factor * m[idx]; });
  };

  for (int k = 0; k < opts.q_modes; ++k) {
    est.q.push_back(2.0 * M_PI * k / beta);
    est.u_hat.push_back(linear(layout.fourier(k), h * h / beta));
  }
  for (int j = 0; j <= N; ++j) {
    est.tau.push_back(j * h);
    est.gamma2.push_back(linear(layout.corr(j <= N / 2 ? j : N - j), 1.0));
  }
  est.x_n = jackknife(batches, [=](const std::vector<double>& m) {
    const double u0 = m[Layout::kB2] / beta;
    return -(m[Layout::kAB2] - m[Layout::kA] * m[Layout::kB2] - 2.0 * u0 * u0);
  });
  for (int k = 1; k <= 4; ++k)
    est.ursell.push_back(jackknife(batches, [=](const std::vector<double>& m) {
      const auto t = cumulants_from_moments({m[Layout::kB2], m[Layout::kB4], m[Layout::kB6], m[Layout::kB8]},
                                            UrsellSource::mc);
      return t.u(k);
    }));
  est.ursell4_integrated = est.ursell[1];

  est.lags = lags;
  for (int l = 0; l < layout.lag_count; ++l) {
    const int k = lags[l];
    const int ck = layout.corr(k), c0 = layout.corr(0);
    const int g = layout.gks(l), p = layout.pair(l);
    const int cb0 = layout.corr_b2(0), cbk = layout.corr_b2(k);
    est.gks.push_back(jackknife(batches, [=](const std::vector<double>& m) { return m[g] - m[c0] * m[ck]; }));
    est.u4_pair.push_back(jackknife(batches, [=](const std::vector<double>& m) {
      return m[p] - m[c0] * m[c0] - 2.0 * m[ck] * m[ck];
    }));
    est.u4_triple.push_back(
        jackknife(batches, [=](const std::vector<double>& m) { return m[g] - 3.0 * m[c0] * m[ck]; }));
    est.corr.push_back(jackknife(batches, [=](const std::vector<double>& m) {
      return (m[cbk] - m[ck] * m[Layout::kB2]) - (m[cb0] - m[c0] * m[Layout::kB2]);
    }));
  }

  // Batch-mean variance of B^2 against its per-sweep variance.
  double mean = 0.0;
  for (const auto& b : batches) mean += b[Layout::kB2];
  mean /= static_cast<double>(batches.size());
  double var_b = 0.0, b4 = 0.0;
  for (const auto& b : batches) {
    var_b += (b[Layout::kB2] - mean) * (b[Layout::kB2] - mean);
    b4 += b[Layout::kB4];
  }
  var_b /= static_cast<double>(batches.size() - 1);
  b4 /= static_cast<double>(batches.size());
  const double var_naive = b4 - mean * mean;
  est.tau_int = var_naive > 0.0 ? 0.5 * per_batch * var_b / var_naive : 0.0;
  return est;
}

std::vector<std::vector<double>> mc_sample_paths(const LatticeModel& model, long count, long thin,
                                                 std::uint64_t seed, const MCOptions& opts) {
  if (count < 1 || thin < 1) throw DomainError("need count >= 1 and thin >= 1");
  if (model.model.b < 0.0) throw DomainError("quartic coefficient b must be non-negative");
  Layout layout;
  layout.half = model.slices / 2;
  const std::vector<int> lags;
  Chain chain(model, opts, seed, layout, lags);
  chain.burn_in(opts.burn_in > 0 ? opts.burn_in : 1000);
  std::vector<std::vector<double>> paths;
  paths.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) paths.push_back(chain.advance(thin));
  const double rate = static_cast<double>(chain.local_accepted()) / static_cast<double>(chain.local_tried());
  if (rate < 0.2 || rate > 0.8) throw TuningError("local acceptance rate " + csv_double(rate) + " outside [0.2, 0.8]");
  return paths;
}

BoundReport mc_inequality_report(const MCEstimates& est, double n_sigma) {
  BoundReport rep;
  for (std::size_t l = 0; l < est.lags.size(); ++l) {
    const std::string k = std::to_string(est.lags[l]);
    rep.add_le("gks_" + k, 0.0, est.gks[l].mean, n_sigma * est.gks[l].err);
    rep.add_le("gaussian_upper_pair_" + k, est.u4_pair[l].mean, 0.0, n_sigma * est.u4_pair[l].err);
    rep.add_le("gaussian_upper_triple_" + k, est.u4_triple[l].mean, 0.0, n_sigma * est.u4_triple[l].err);
    if (est.lags[l] > 0) rep.add_le("correlation_" + k, 0.0, est.corr[l].mean, n_sigma * est.corr[l].err);
  }
  return rep;
}

namespace {

double uniform_stiffness(int n, const HierarchyParams& hier, const ModelParams& model) {
  if (model.b != 0.0) throw DomainError("Gaussian oracle requires b = 0");
  if (!(model.mass > 0.0) || !(model.beta > 0.0)) throw DomainError("mass and beta must be positive");
  const double s = model.a + uniform_mode_shift(n, hier);
  if (!(s > 0.0)) throw StabilityError("Gaussian form not positive definite: a + shift = " + csv_double(s));
  return s;
}

// <x(0) x(tau)> for the action int (mass/2) xdot^2 + (s/2) x^2 on a circle of length beta.
double oscillator_propagator(double mass, double s, double beta, double tau) {
  const double w = std::sqrt(s / mass);
  return (std::exp(-w * tau) + std::exp(-w * (beta - tau))) / (-2.0 * mass * w * std::expm1(-w * beta));
}

}  // namespace

double gaussian_gamma2(int n, const HierarchyParams& hier, const ModelParams& model, double tau) {
  const double s = uniform_stiffness(n, hier, model);
  if (tau < 0.0 || tau > model.beta) throw DomainError("tau must lie in [0, beta]");
  return std::pow(static_cast<double>(hier.kappa), -n * hier.delta) *
         oscillator_propagator(model.mass, s, model.beta, tau);
}

GaussianOracle gaussian_oracle(int n, const HierarchyParams& hier, const ModelParams& model, double q,
                               int tau_points) {
  uniform_stiffness(n, hier, model);
  const Eigen::MatrixXd M = coupling_matrix(n, hier);
  Eigen::MatrixXd A = M;
  A.diagonal().array() += model.mass * q * q + model.a;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any())
    throw StabilityError("Gaussian form not positive definite at q = " + csv_double(q));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(M.rows());
  GaussianOracle out;
  out.u_hat = std::pow(static_cast<double>(hier.kappa), -n * (1.0 + hier.delta)) * ones.dot(ldlt.solve(ones));
  for (int i = 0; i < tau_points; ++i) {
    const double tau = tau_points > 1 ? model.beta * i / (tau_points - 1) : 0.0;
    out.tau.push_back(tau);
    out.gamma2.push_back(gaussian_gamma2(n, hier, model, tau));
  }
  return out;
}

LatticeGaussian lattice_gaussian_oracle(const LatticeModel& model, int q_modes) {
  const double s0 = uniform_stiffness(model.level, model.hier, model.model);
  const double beta = model.model.beta;
  const double h = model.slice_width;
  const int N = model.slices;
  const double pref = std::pow(static_cast<double>(model.hier.kappa), -model.level * model.hier.delta);
  auto u = [&](int kappa) {
    const double sn = std::sin(M_PI * kappa / N);
    return pref / (4.0 * model.bond / h * sn * sn + s0);
  };
  LatticeGaussian out;
  for (int k = 0; k < q_modes; ++k) {
    out.q.push_back(2.0 * M_PI * k / beta);
    out.u_hat.push_back(u(k));
  }
  for (int j = 0; j <= N; ++j) {
    double g = 0.0;
    for (int k = -(N / 2 - 1); k <= N / 2; ++k) g += u(k) * std::cos(2.0 * M_PI * k * j / N);
    out.tau.push_back(j * h);
    out.gamma2.push_back(g / beta);
  }
  return out;
}

std::string to_csv(const MCEstimates& est) {
  std::string out = csv_row({"observable", "q_or_tau", "mean", "stderr", "sweeps", "seed"});
  const std::string sw = std::to_string(est.sweeps), sd = std::to_string(est.seed);
  auto row = [&](const std::string& name, double x, const Estimate& e) {
    out += csv_row({name, csv_double(x), csv_double(e.mean), csv_double(e.err), sw, sd});
  };
  for (std::size_t k = 0; k < est.q.size(); ++k) row("u_hat", est.q[k], est.u_hat[k]);
  for (std::size_t j = 0; j < est.tau.size(); ++j) row("gamma2", est.tau[j], est.gamma2[j]);
  row("x_n", 0.0, est.x_n);
  for (std::size_t k = 0; k < est.ursell.size(); ++k) row("ursell_" + std::to_string(2 * (k + 1)), 0.0, est.ursell[k]);
  const double h = est.tau.size() > 1 ? est.tau[1] : 0.0;
  for (std::size_t l = 0; l < est.lags.size(); ++l) {
    const double tau = h * est.lags[l];
    row("gks", tau, est.gks[l]);
    row("u4_pair", tau, est.u4_pair[l]);
    row("u4_triple", tau, est.u4_triple[l]);
    row("corr", tau, est.corr[l]);
  }
  return out;
}

nlohmann::json to_json(const MCEstimates& est) {
  auto pairs = [](const std::vector<double>& x, const std::vector<Estimate>& e) {
    nlohmann::json a = nlohmann::json::array();
    for (std::size_t i = 0; i < x.size(); ++i) a.push_back({x[i], e[i].mean, e[i].err});
    return a;
  };
  auto est_json = [](const Estimate& e) { return nlohmann::json{{"mean", e.mean}, {"stderr", e.err}}; };
  nlohmann::json j;
  j["u_hat"] = pairs(est.q, est.u_hat);
  j["gamma2"] = pairs(est.tau, est.gamma2);
  j["x_n"] = est_json(est.x_n);
  j["ursell4_integrated"] = est_json(est.ursell4_integrated);
  j["ursell"] = nlohmann::json::array();
  for (const auto& e : est.ursell) j["ursell"].push_back(est_json(e));
  j["sweeps"] = est.sweeps;
  j["seed"] = est.seed;
  j["batches"] = est.batches;
  j["chains"] = est.chains;
  j["acceptance"] = est.acceptance;
  j["shift_acceptance"] = est.shift_acceptance;
  j["tau_int"] = est.tau_int;
  j["inequalities"] = to_json(mc_inequality_report(est));
  return j;
}

}  // namespace hqao
