#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace hqao {

/// First divided difference of x -> exp(-beta x) on the nodes (x0, x1).
double exp_dd1(double beta, double x0, double x1);

/// Second divided difference of x -> exp(-beta x). Equals the integral
/// of exp(-(beta - t2) x0 - (t2 - t1) x1 - t1 x2) over 0 < t1 < t2 < beta
/// and is symmetric in its nodes.
double exp_dd2(double beta, double x0, double x1, double x2);

/// (1 - exp(-t)) / t, continuous at 0.
double f_ratio(double t);

/// Bisection on a predicate that is false at lo and true at hi.
/// Returns the final [lo, hi] with hi - lo <= abs_tol + rel_tol * |hi|.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
};

Interval bisect_predicate(const std::function<bool(double)>& pred, double lo, double hi,
                          double rel_tol, double abs_tol = 0.0, int max_iter = 200);

/// Root of a continuous function with a sign change on [lo, hi]; throws
/// BracketError otherwise.
Interval bisect_root(const std::function<double(double)>& f, double lo, double hi, double rel_tol,
                     double abs_tol = 0.0, int max_iter = 200);

/// Maximum of a function on [lo, hi]: uniform grid followed by a
/// golden-section polish around the best grid point.
struct Maximum {
  double x = 0.0;
  double value = 0.0;
};
Maximum grid_golden_max(const std::function<double(double)>& f, double lo, double hi,
                        int grid_points = 1000, double tol = 1e-12);

struct Estimate {
  double mean = 0.0;
  double err = 0.0;
};

/// Delete-one jackknife of a statistic of batch means. `batches[i]` holds
/// the i-th batch's vector of averaged raw observables.
Estimate jackknife(const std::vector<std::vector<double>>& batches,
                   const std::function<double(const std::vector<double>&)>& stat);

/// Ordinary least-squares line y = c0 + c1 x with standard errors; with
/// weights w_i = 1/err_i^2 when errors are given.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double intercept_err = 0.0;
  double slope_err = 0.0;
  double chi2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& err = {});

double factorial(int n);

}  // namespace hqao
