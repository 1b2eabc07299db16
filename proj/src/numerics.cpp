#include "hqao/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "hqao/errors.hpp"

namespace hqao {

double exp_dd1(double beta, double x0, double x1) {
  const double m = std::min(x0, x1);
  const double d = std::abs(x1 - x0);
  const double scale = std::exp(-beta * m);
  if (d == 0.0) return -beta * scale;
  return scale * std::expm1(-beta * d) / d;
}

double exp_dd2(double beta, double x0, double x1, double x2) {
  double y[3] = {x0, x1, x2};
  std::sort(y, y + 3);
  const double m = y[0];
  const double y1 = y[1] - m;
  const double y2 = y[2] - m;
  const double scale = std::exp(-beta * m);
  if (beta * y2 < 1.0) {
    // sum_{k>=2} (-beta)^k / k! * h_{k-2}(0, y1, y2), h_j complete homogeneous
    double h = 1.0;
    double y2pow = 1.0;
    double coeff = beta * beta / 2.0;
    double sum = coeff * h;
    for (int k = 3; k < 60; ++k) {
      y2pow *= y2;
      h = y1 * h + y2pow;
      coeff *= -beta / k;
      const double term = coeff * h;
      sum += term;
      if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return scale * sum;
  }
  const double a = exp_dd1(beta, 0.0, y1);
  const double b = exp_dd1(beta, y1, y2);
  return scale * (b - a) / y2;
}

double f_ratio(double t) {
  if (std::abs(t) < 1e-8) return 1.0 - 0.5 * t;
  return -std::expm1(-t) / t;
}

Interval bisect_predicate(const std::function<bool(double)>& pred, double lo, double hi,
                          double rel_tol, double abs_tol, int max_iter) {
  Interval iv{lo, hi};
  for (int i = 0; i < max_iter; ++i) {
    if (iv.width() <= abs_tol + rel_tol * std::abs(iv.hi)) break;
    const double mid = iv.mid();
    if (mid <= iv.lo || mid >= iv.hi) break;
    if (pred(mid))
      iv.hi = mid;
    else
      iv.lo = mid;
  }
  return iv;
}

Interval bisect_root(const std::function<double(double)>& f, double lo, double hi, double rel_tol,
                     double abs_tol, int max_iter) {
  const double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return {lo, lo};
  if (fhi == 0.0) return {hi, hi};
  if ((flo < 0.0) == (fhi < 0.0))
    throw BracketError("no sign change on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  const bool rising = flo < 0.0;
  return bisect_predicate([&](double x) { return (f(x) >= 0.0) == rising; }, lo, hi, rel_tol,
                          abs_tol, max_iter);
}

Maximum grid_golden_max(const std::function<double(double)>& f, double lo, double hi,
                        int grid_points, double tol) {
  if (grid_points < 3) throw DomainError("grid_golden_max needs at least 3 grid points");
  const double step = (hi - lo) / (grid_points - 1);
  int best = 0;
  double best_val = f(lo);
  for (int i = 1; i < grid_points; ++i) {
    const double v = f(lo + step * i);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double a = lo + step * std::max(best - 1, 0);
  double b = lo + step * std::min(best + 1, grid_points - 1);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  Maximum out{0.5 * (a + b), f(0.5 * (a + b))};
  if (best_val > out.value) out = {lo + step * best, best_val};
  return out;
}

Estimate jackknife(const std::vector<std::vector<double>>& batches,
                   const std::function<double(const std::vector<double>&)>& stat) {
  const std::size_t nb = batches.size();
  if (nb < 2) throw DomainError("jackknife needs at least two batches");
  const std::size_t dim = batches.front().size();
  std::vector<double> total(dim, 0.0);
  for (const auto& b : batches)
    for (std::size_t j = 0; j < dim; ++j) total[j] += b[j];
  std::vector<double> mean(dim);
  for (std::size_t j = 0; j < dim; ++j) mean[j] = total[j] / nb;
  const double full = stat(mean);
  std::vector<double> loo(dim);
  std::vector<double> values(nb);
  double avg = 0.0;
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t j = 0; j < dim; ++j) loo[j] = (total[j] - batches[i][j]) / (nb - 1);
    values[i] = stat(loo);
    avg += values[i];
  }
  avg /= nb;
  double var = 0.0;
  for (double v : values) var += (v - avg) * (v - avg);
  var *= static_cast<double>(nb - 1) / nb;
  return {full, std::sqrt(var)};
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& err) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n || (!err.empty() && err.size() != n))
    throw DomainError("fit_line needs matching x, y (and err) with at least two points");
  const bool weighted = !err.empty();
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weighted ? 1.0 / (err[i] * err[i]) : 1.0;
    sw += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (det <= 0.0) throw DomainError("fit_line: degenerate abscissae");
  LineFit fit;
  fit.slope = (sw * sxy - sx * sy) / det;
  fit.intercept = (sxx * sy - sx * sxy) / det;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    fit.chi2 += weighted ? r * r / (err[i] * err[i]) : r * r;
  }
  const double s2 = weighted ? 1.0 : (n > 2 ? fit.chi2 / (n - 2) : 0.0);
  fit.slope_err = std::sqrt(s2 * sw / det);
  fit.intercept_err = std::sqrt(s2 * sxx / det);
  return fit;
}

double factorial(int n) { return std::tgamma(n + 1.0); }

}  // namespace hqao
