#include "hqao/experiment.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "hqao/bounds.hpp"
#include "hqao/enumeration.hpp"
#include "hqao/errors.hpp"
#include "hqao/io.hpp"
#include "hqao/lattice_mc.hpp"
#include "hqao/rg_flow.hpp"
#include "hqao/spectral.hpp"
#include "hqao/ursell.hpp"

namespace hqao {

namespace {

using nlohmann::json;

struct Output {
  std::string csv;
  json data;
  int exit_code = kExitOk;
  std::string message;
};

ModelParams at_beta(ModelParams p, double beta) {
  p.beta = beta;
  return p;
}

LatticeMutation mutation_from(const ExperimentConfig& cfg) {
  return cfg.verify.mutation == "lambda_off_by_one" ? LatticeMutation::lambda_off_by_one : LatticeMutation::none;
}

std::string report_csv(const BoundReport& r) {
  std::string s = "name,lhs,rhs,margin,pass,gating\n";
  for (const auto& c : r.checks)
    s += csv_row({c.name, csv_double(c.lhs), csv_double(c.rhs), csv_double(c.margin), c.pass ? "1" : "0",
                  c.gating ? "1" : "0"});
  return s;
}

std::vector<std::string> failed(const BoundReport& r) {
  std::vector<std::string> names;
  for (const auto& c : r.checks)
    if (c.gating && !c.pass) names.push_back(c.name);
  return names;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
  return s;
}

Output run_spectral(const ExperimentConfig& cfg) {
  Output o;
  o.csv = "beta,u_hat0,eta,rigidity,x0,x0_bound,bounds_checked,bounds_pass\n";
  o.data["points"] = json::array();
  std::vector<std::string> bad;
  for (double beta : cfg.betas()) {
    const auto p = at_beta(cfg.model, beta);
    const auto spec = build_and_diagonalize(p, 64);
    const double u0 = u_hat0_spectral(spec, beta, 0.0);
    const auto er = eta_and_rigidity(spec, beta);
    const double x0 = x0_spectral(spec, beta);
    const bool checked = p.a < 0.0 && p.b > 0.0;
    BoundReport rep;
    if (checked) rep = check_initial_bounds(spec, p);
    const double xb = checked ? x0_upper_bound(p, u0) : NAN;
    o.csv += csv_row({csv_double(beta), csv_double(u0), csv_double(er.eta), csv_double(er.rigidity), csv_double(x0),
                      csv_double(xb), checked ? "1" : "0", !checked || rep.all_pass() ? "1" : "0"});
    auto rec = spectral_record(spec, beta);
    rec["eta"] = er.eta;
    rec["gap"] = er.gap;
    rec["rigidity"] = er.rigidity;
    rec["x0"] = x0;
    if (checked) rec["initial_bounds"] = to_json(rep);
    o.data["points"].push_back(rec);
    for (const auto& n : failed(rep)) bad.push_back(n + " at beta=" + csv_double(beta));
  }
  if (!bad.empty()) {
    o.exit_code = kExitInvariant;
    o.message = "violated: " + join(bad);
  }
  return o;
}

Output run_lattice(const ExperimentConfig& cfg) {
  Output o;
  const auto model = build_lattice_model(cfg.mc.level, cfg.mc.slices, hierarchy_from(cfg), cfg.model,
                                         mutation_from(cfg));
  MCOptions opts;
  opts.sweeps = cfg.mc.sweeps;
  opts.chains = cfg.mc.chains;
  opts.threads = cfg.mc.threads;
  opts.seed = cfg.mc.seed;
  opts.q_modes = std::min(8, cfg.mc.slices / 2 + 1);
  if (opts.chains * opts.batches < 16) opts.batches = (16 + opts.chains - 1) / opts.chains;
  const auto est = mc_estimate(model, opts);
  o.csv = to_csv(est);
  o.data = to_json(est);
  BoundReport rep = mc_inequality_report(est);
  const auto suite = inequality_suite(est.ursell_table(), cfg.model.beta, est.u_hat[0].mean, est.u_hat[0].err);
  for (const auto& c : suite.checks) rep.checks.push_back(c);
  o.data["inequalities"] = to_json(rep);
  if (!rep.all_pass()) {
    o.exit_code = kExitInvariant;
    o.message = "violated: " + join(failed(rep));
  }
  return o;
}

Output run_rgflow(const ExperimentConfig& cfg) {
  Output o;
  const auto hier = hierarchy_from(cfg);
  FlowOptions opts;
  opts.population = cfg.rg.population;
  opts.islands = cfg.rg.islands;
  opts.cutoff = cfg.rg.cutoff;
  opts.seed = cfg.rg.seed;
  const auto r = flow_run(cfg.model, hier, cfg.rg.n_max, opts);
  o.csv = to_csv(r);
  o.data = to_json(r);
  if (r.levels.size() >= 3) {
    std::vector<double> xs, ys, es;
    for (const auto& l : r.levels) {
      xs.push_back(l.level);
      ys.push_back(std::log(l.u_hat.mean));
      es.push_back(l.u_hat.err / l.u_hat.mean);
    }
    const auto fit = fit_line(xs, ys, es);
    const double lk = std::log(static_cast<double>(hier.kappa));
    o.data["decay_exponent"] = {{"mean", -fit.slope / lk}, {"stderr", fit.slope_err / lk}};
  }
  return o;
}

std::string trace_csv(const BoundTrace& t) {
  std::string s = "level,u_lo,u_hi,x_hi,regime\n";
  for (int n = 0; n < t.levels(); ++n)
    s += csv_row({std::to_string(n), csv_double(t.u_lo[n]), csv_double(t.u_hi[n]), csv_double(t.x_hi[n]),
                  to_string(t.regime[n])});
  return s;
}

SelectionOptions selection_options(const ExperimentConfig& cfg) {
  SelectionOptions s;
  s.gamma = cfg.bounds.gamma;
  s.margin = cfg.bounds.margin;
  return s;
}

Output run_bounds(const ExperimentConfig& cfg) {
  Output o;
  const Kernels k{cfg.hierarchy.kappa, cfg.hierarchy.delta};
  const auto sel = select_parameters(k.kappa, k.delta, cfg.bounds.epsilon, selection_options(cfg));
  o.data = certificate_json(sel, nullptr);
  if (sel.feasible) {
    const auto spec = build_and_diagonalize(sel.params, 64);
    const double u0 = u_hat0_spectral(spec, sel.beta_hat, 0.0);
    const double x0 = std::max(0.0, x0_spectral(spec, sel.beta_hat));
    const auto t = propagate_and_classify({u0, u0}, x0, k, sel.window, cfg.bounds.n_max);
    o.csv = trace_csv(t);
    o.data["trace_beta"] = sel.beta_hat;
    o.data["trace"] = to_json(t);
  } else {
    o.csv = trace_csv(BoundTrace{});
  }
  if (!sel.feasible || !sel.certificate.all_pass()) {
    o.exit_code = kExitInfeasible;
    o.message = sel.feasible ? "certificate fails: " + join(failed(sel.certificate)) : "no b above the floor";
  }
  return o;
}

Output run_betastar(const ExperimentConfig& cfg) {
  Output o;
  const Kernels k{cfg.hierarchy.kappa, cfg.hierarchy.delta};
  const auto sel = select_parameters(k.kappa, k.delta, cfg.bounds.epsilon, selection_options(cfg));
  if (!sel.feasible) throw BracketError("parameter selection infeasible: no b above the floor");
  const auto family = spectral_family_from_above(sel.params, sel.beta_hat);
  BracketOptions bo;
  bo.levels = cfg.bounds.levels;
  bo.n_max = cfg.bounds.n_max;
  const auto br = find_beta_brackets(family, k, sel.window, bo);
  o.csv = "level,beta_minus,beta_plus\n";
  for (const auto& l : br.levels)
    o.csv += csv_row({std::to_string(l.level), csv_double(l.beta_minus), csv_double(l.beta_plus)});
  o.csv += csv_row({std::to_string(bo.n_max), csv_double(br.beta_star.lo), csv_double(br.beta_star.hi)});
  o.data = certificate_json(sel, &br);

  const double below = 0.9 * br.beta_star.lo;
  {
    const auto v = spectral_family(sel.params, below, sel.beta_hat).eval(below);
    const auto t = propagate_and_classify({v.first, v.first}, v.second, k, sel.window, bo.n_max);
    const auto d = decay_check(t, k, sel.window);
    o.data["subcritical"] = {{"beta", below},   {"regime", to_string(t.last())}, {"k0", d.k0},
                             {"k", d.k},        {"bounded", d.bounded},          {"fitted_rate", d.fitted_rate},
                             {"expected_rate", d.expected_rate}};
  }
  json limits = json::array();
  for (int kk = 1; kk <= 3; ++kk) limits.push_back(predicted_limit(kk, br.beta_star.mid()));
  o.data["predicted_limits"] = limits;

  std::vector<std::string> why;
  if (br.relative_width() > cfg.bounds.tol)
    why.push_back("bracket relative width " + csv_double(br.relative_width()) + " > tol " + csv_double(cfg.bounds.tol));
  for (const auto& n : failed(sel.certificate)) why.push_back(n);
  for (const auto& n : failed(br.checks)) why.push_back(n);
  if (!why.empty()) {
    o.exit_code = kExitInfeasible;
    o.message = join(why);
  }
  return o;
}

Output run_verify(const ExperimentConfig& cfg) {
  Output o;
  const auto rep = verify_suite(cfg);
  o.csv = report_csv(rep);
  o.data = to_json(rep);
  if (!rep.all_pass()) {
    o.exit_code = kExitInvariant;
    o.message = "failed invariants: " + join(failed(rep));
  }
  return o;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
}

}  // namespace

HierarchyParams hierarchy_from(const ExperimentConfig& cfg) {
  return cfg.hierarchy.coupling == "decoupled" ? HierarchyParams::decoupled(cfg.hierarchy.kappa, cfg.hierarchy.delta)
                                               : HierarchyParams::normalized(cfg.hierarchy.kappa, cfg.hierarchy.delta);
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  RunResult r;
  Output o;
  try {
    validate_config(cfg);
    const auto& s = cfg.subcommand;
    if (s == "spectral") o = run_spectral(cfg);
    else if (s == "lattice") o = run_lattice(cfg);
    else if (s == "rgflow") o = run_rgflow(cfg);
    else if (s == "bounds") o = run_bounds(cfg);
    else if (s == "betastar") o = run_betastar(cfg);
    else if (s == "verify") o = run_verify(cfg);
    else throw ConfigError("unknown subcommand '" + s + "'");
  } catch (const ConfigError& e) {
    r.exit_code = kExitConfig;
    r.message = e.what();
    return r;
  } catch (const BracketError& e) {
    o.exit_code = kExitInfeasible;
    o.message = e.what();
  } catch (const TruncationError& e) {
    o.exit_code = kExitInfeasible;
    o.message = e.what();
  } catch (const TuningError& e) {
    o.exit_code = kExitInvariant;
    o.message = e.what();
  } catch (const StabilityError& e) {
    o.exit_code = kExitInvariant;
    o.message = e.what();
  } catch (const Error& e) {
    r.exit_code = kExitConfig;
    r.message = e.what();
    return r;
  }
  r.exit_code = o.exit_code;
  r.message = o.message;

  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  const auto base = dir / cfg.subcommand;
  if (!o.csv.empty()) {
    write_file(base.string() + ".csv", o.csv);
    r.files.push_back(base.string() + ".csv");
  }
  if (!o.data.is_null()) {
    write_file(base.string() + ".json", o.data.dump(2) + "\n");
    r.files.push_back(base.string() + ".json");
  }
  json meta = {{"subcommand", cfg.subcommand}, {"timestamp", utc_timestamp()}, {"exit_code", r.exit_code},
               {"message", r.message},          {"config", to_yaml(cfg)}};
  write_file(base.string() + ".meta.json", meta.dump(2) + "\n");
  r.files.push_back(base.string() + ".meta.json");
  return r;
}

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

void gaussian_checks(const ExperimentConfig& cfg, BoundReport& rep) {
  const auto hier = HierarchyParams::normalized(cfg.hierarchy.kappa, cfg.hierarchy.delta);

  // Hierarchy: symmetric coupling with the uniform vector as eigenvector.
  const auto M = coupling_matrix(3, hier);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(M.rows());
  rep.add_le("hierarchy_symmetric", max_abs(M - M.transpose()), 0.0);
  rep.add_le("hierarchy_uniform_eigenvector", (M * one - uniform_mode_shift(3, hier) * one).cwiseAbs().maxCoeff(),
             1e-12);

  // Spectral: harmonic oracle and the canonical commutator.
  ModelParams harm{1.0, 1.0, 0.0, 4.0};
  const auto hs = build_and_diagonalize(harm, 128);
  double worst = 0.0;
  for (int kk = 0; kk <= 8; ++kk) {
    const double q = 2.0 * M_PI * kk / harm.beta;
    const double exact = 1.0 / (harm.mass * q * q + harm.a);
    worst = std::max(worst, std::abs(u_hat0_spectral(hs, harm.beta, q) - exact) / exact);
  }
  rep.add_le("spectral_harmonic_oracle", worst, 1e-6);
  ModelParams quart{1.0, -1.0, 0.5, 1.0};
  rep.add_le("spectral_double_commutator", double_commutator_residual(quart, 128), 1e-8);

  // Lattice: the temporal chain reproduces lambda_q^(N).
  ModelParams chain{cfg.model.mass, 1.0, 0.0, cfg.model.beta};
  const auto lm = build_lattice_model(0, cfg.mc.slices, hier, chain, mutation_from(cfg));
  double sym = 0.0;
  for (int kk = 0; kk <= cfg.mc.slices / 2; ++kk) {
    const double q = 2.0 * M_PI * kk / cfg.model.beta;
    sym = std::max(sym, std::abs(temporal_symbol(lm, q) - lambda_q(cfg.mc.slices, cfg.model.beta, cfg.model.mass, q)));
  }
  rep.add_le("lattice_temporal_symbol", sym, 1e-12);
  ModelParams g{1.0, 1.0, 0.0, 2.0};
  const auto fine = build_lattice_model(2, 2048, hier, g);
  const double lat = lattice_gaussian_oracle(fine, 1).u_hat[0];
  const double cont = gaussian_oracle(2, hier, g, 0.0).u_hat;
  rep.add_le("lattice_gaussian_zero_mode", std::abs(lat - cont) / cont, 1e-12);

  // Ursell: conversions, sign rule, Lee-Yang zeros.
  const std::vector<double> mom = {1.3, 5.5, 40.1, 420.0, 5800.0};
  const auto back = moments_from_cumulants(cumulants_from_moments(mom).values);
  double rt = 0.0;
  for (std::size_t i = 0; i < mom.size(); ++i) rt = std::max(rt, std::abs(back[i] - mom[i]) / mom[i]);
  rep.add_le("ursell_moment_roundtrip", rt, 1e-12);
  const auto fit = leeyang_product_fit(ursell_from_coeffs({0.3, 0.1}, 2), 2);
  rep.add_le("ursell_fit_roundtrip",
             fit.valid ? std::max(std::abs(fit.c[0] - 0.3), std::abs(fit.c[1] - 0.1)) : 1.0, 1e-8);
  double sign = 0.0, locus = 0.0;
  for (const auto& m : {IsingModel::free_spins(1), IsingModel::ring(2, 0.5), IsingModel::ring(4, 0.3),
                        IsingModel::uniform(5, 0.2), IsingModel::ring(8, 0.4)}) {
    const auto r = exact_enumeration(m);
    for (int kk = 1; kk <= 4; ++kk)
      sign = std::max(sign, -std::pow(-1.0, kk - 1) * static_cast<double>(r.ursell[kk - 1]));
    locus = std::max(locus, root_locus_check(r.polynomial).max_ratio);
  }
  rep.add_le("ursell_sign_rule", sign, 0.0);
  rep.add_le("leeyang_root_locus", locus, 1e-9);
  const auto af = root_locus_check(exact_enumeration(IsingModel::ring(4, -0.4), true).polynomial);
  rep.add_le("leeyang_antiferro_detected", af.pass ? 1.0 : 0.0, 0.0);

  // Bounds: window identities and bracket search on a linear family.
  const auto w = epsilon_window(cfg.hierarchy.kappa, cfg.hierarchy.delta, cfg.bounds.epsilon);
  const auto wc = window_checks(w);
  rep.add_le("bounds_window_checks", wc.all_pass() ? 0.0 : 1.0, 0.0);
  BetaFamily lin;
  lin.beta_lo = 0.5;
  lin.beta_hi = 8.0;
  lin.eval = [](double beta) { return std::make_pair(beta / 2.0, 0.0); };
  BracketOptions bo;
  bo.n_max = 100;
  const auto br = find_beta_brackets(lin, Kernels{cfg.hierarchy.kappa, cfg.hierarchy.delta}, w, bo);
  rep.add_le("bounds_brackets_nested", br.nested && !br.ambiguous ? 0.0 : 1.0, 0.0);
  rep.add_le("bounds_beta_star_contains_fixed_point", std::max(br.beta_star.lo - 2.0, 2.0 - br.beta_star.hi), 1e-9);

  // RG flow: pure convolution and the Gaussian oracle.
  FlowOptions fo;
  fo.population = 16000;
  fo.cutoff = 8;
  fo.seed = cfg.rg.seed;
  const auto dec = flow_run(g, HierarchyParams::decoupled(cfg.hierarchy.kappa, cfg.hierarchy.delta), 4, fo);
  std::vector<double> xs, ys, es;
  for (const auto& l : dec.levels) {
    xs.push_back(l.level);
    ys.push_back(std::log(l.u_hat.mean));
    es.push_back(l.u_hat.err / l.u_hat.mean);
  }
  const auto lf = fit_line(xs, ys, es);
  const double lk = std::log(static_cast<double>(cfg.hierarchy.kappa));
  rep.add_le("rg_decoupled_exponent", std::abs(-lf.slope / lk - cfg.hierarchy.delta), 3.0 * lf.slope_err / lk);
  const auto cpl = flow_run(g, hier, 3, fo);
  double z = 0.0;
  for (const auto& l : cpl.levels)
    z = std::max(z, std::abs(l.u_hat.mean - gaussian_oracle(l.level, hier, g, 0.0).u_hat) / l.u_hat.err);
  // Maximum over four levels with 16-island error bars: 4 sigma keeps the
  // family-wise false alarm rate near 1e-3.
  rep.add_le("rg_gaussian_oracle_sigma", z, 4.0);
}

void quartic_checks(const ExperimentConfig& cfg, BoundReport& rep) {
  const auto p = cfg.model;
  const auto spec = build_and_diagonalize(p, 64);
  rep.add_le("spectral_sum_rule", std::abs(sum_rule_residual(spec, p.beta)), 1e-3);
  if (p.a < 0.0) {
    const auto ib = check_initial_bounds(spec, p);
    rep.add_le("spectral_initial_bounds", ib.all_pass() ? 0.0 : 1.0, 0.0);
  }
  const auto lm = build_lattice_model(0, cfg.mc.slices, hierarchy_from(cfg), p, mutation_from(cfg));
  MCOptions mo;
  mo.sweeps = cfg.mc.sweeps;
  mo.seed = cfg.mc.seed;
  mo.q_modes = 1;
  const auto est = mc_estimate(lm, mo);
  const double u0 = u_hat0_spectral(spec, p.beta, 0.0);
  rep.add_le("lattice_vs_spectral_sigma", std::abs(est.u_hat[0].mean - u0) / est.u_hat[0].err, 3.0);
  const auto ineq = mc_inequality_report(est);
  rep.add_le("lattice_inequalities", ineq.all_pass() ? 0.0 : 1.0, 0.0);
  const auto suite = inequality_suite(est.ursell_table(), p.beta, est.u_hat[0].mean, est.u_hat[0].err);
  rep.add_le("ursell_bounds_mc", suite.all_pass() ? 0.0 : 1.0, 0.0);
}

}  // namespace

BoundReport verify_suite(const ExperimentConfig& cfg) {
  BoundReport rep;
  gaussian_checks(cfg, rep);
  if (cfg.model.b > 0.0) quartic_checks(cfg, rep);
  return rep;
}

}  // namespace hqao
