#include "hqao/ursell.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <unsupported/Eigen/Polynomials>

#include "hqao/errors.hpp"
#include "hqao/numerics.hpp"

namespace hqao {

namespace {

constexpr int kMaxRootDegree = 24;

using cld = std::complex<long double>;

// Roots of sum_k a[k] x^k, polished by Newton steps in long double.
std::vector<cld> polynomial_roots(const std::vector<long double>& a) {
  const int deg = static_cast<int>(a.size()) - 1;
  if (deg > kMaxRootDegree)
    throw RangeError("root finding is ill-conditioned above degree " + std::to_string(kMaxRootDegree) +
                     ", got " + std::to_string(deg));
  if (deg < 1) return {};
  long double scale = 0.0L;
  for (auto v : a) scale = std::max(scale, std::abs(v));
  Eigen::VectorXd coeffs(deg + 1);
  for (int k = 0; k <= deg; ++k) coeffs(k) = static_cast<double>(a[k] / scale);
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(coeffs);
  std::vector<cld> roots;
  for (const auto& r : solver.roots()) {
    cld x(r.real(), r.imag());
    for (int it = 0; it < 8; ++it) {
      cld p = 0.0L, dp = 0.0L;
      for (int k = deg; k >= 0; --k) {
        dp = dp * x + p;
        p = p * x + a[k] / scale;
      }
      if (std::abs(dp) == 0.0L) break;
      const cld step = p / dp;
      x -= step;
      if (std::abs(step) <= 1e-19L * std::abs(x)) break;
    }
    roots.push_back(x);
  }
  return roots;
}

RootLocusReport summarize(const std::vector<cld>& zeros, int degree, double tol) {
  RootLocusReport r;
  r.degree = degree;
  r.tolerance = tol;
  for (const auto& z : zeros) {
    const long double mag = std::abs(z);
    const double ratio = mag > 0.0L ? static_cast<double>(std::abs(z.real()) / mag) : 1.0;
    r.max_ratio = std::max(r.max_ratio, ratio);
    r.root_re.push_back(static_cast<double>(z.real()));
    r.root_im.push_back(static_cast<double>(z.imag()));
  }
  r.pass = r.max_ratio < tol;
  return r;
}

}  // namespace

const char* to_string(UrsellSource s) {
  switch (s) {
    case UrsellSource::exact: return "exact";
    case UrsellSource::spectral: return "spectral";
    case UrsellSource::mc: return "mc";
  }
  return "unknown";
}

// Conversions run in long double: high even moments are large and the
// recursions cancel heavily.
UrsellTable cumulants_from_moments(const std::vector<double>& even_moments, UrsellSource source) {
  const int K = static_cast<int>(even_moments.size());
  if (K < 1) throw DomainError("moment table is empty");
  const int N = 2 * K;
  std::vector<long double> m(N + 1, 0.0L), kappa(N + 1, 0.0L);
  m[0] = 1.0L;
  for (int k = 1; k <= K; ++k) m[2 * k] = even_moments[k - 1];
  for (int r = 1; r <= N; ++r) {
    long double c = m[r];
    long double binom = 1.0L;
    for (int k = 1; k < r; ++k) {
      c -= binom * kappa[k] * m[r - k];
      binom = binom * (r - k) / k;
    }
    kappa[r] = c;
  }
  UrsellTable t;
  t.source = source;
  for (int k = 1; k <= K; ++k) t.values.push_back(static_cast<double>(kappa[2 * k]));
  return t;
}

std::vector<double> moments_from_cumulants(const std::vector<double>& even_cumulants) {
  const int K = static_cast<int>(even_cumulants.size());
  const int N = 2 * K;
  std::vector<long double> kappa(N + 1, 0.0L), m(N + 1, 0.0L);
  for (int k = 1; k <= K; ++k) kappa[2 * k] = even_cumulants[k - 1];
  m[0] = 1.0L;
  for (int r = 1; r <= N; ++r) {
    long double s = 0.0L;
    long double binom = 1.0L;
    for (int k = 1; k <= r; ++k) {
      s += binom * kappa[k] * m[r - k];
      binom = binom * (r - k) / k;
    }
    m[r] = s;
  }
  std::vector<double> out;
  for (int k = 1; k <= K; ++k) out.push_back(static_cast<double>(m[2 * k]));
  return out;
}

UrsellTable ursell_from_coeffs(const std::vector<double>& c, int k_max) {
  UrsellTable t;
  t.source = UrsellSource::exact;
  for (int k = 1; k <= k_max; ++k) {
    double p = 0.0;
    for (double cj : c) p += std::pow(cj, k);
    t.values.push_back(2.0 * factorial(2 * k - 1) * (k % 2 ? 1.0 : -1.0) * p);
  }
  return t;
}

LeeYangCoeffs leeyang_product_fit(const UrsellTable& table, int j_max) {
  if (j_max < 1) throw DomainError("j_max must be positive");
  if (table.k_max() < j_max)
    throw DomainError("Ursell table has " + std::to_string(table.k_max()) + " entries, fit needs " +
                      std::to_string(j_max));
  LeeYangCoeffs out;
  std::vector<long double> p(j_max + 1, 0.0L), e(j_max + 1, 0.0L);
  for (int k = 1; k <= j_max; ++k)
    p[k] = (k % 2 ? 1.0L : -1.0L) * table.u(k) / (2.0L * factorial(2 * k - 1));
  e[0] = 1.0L;
  for (int k = 1; k <= j_max; ++k) {
    long double s = 0.0L;
    for (int i = 1; i <= k; ++i) s += (i % 2 ? 1.0L : -1.0L) * e[k - i] * p[i];
    e[k] = s / k;
  }
  // x^J - e1 x^{J-1} + e2 x^{J-2} - ..., ascending coefficients
  std::vector<long double> poly(j_max + 1);
  for (int i = 0; i <= j_max; ++i) poly[j_max - i] = (i % 2 ? -1.0L : 1.0L) * e[i];
  const auto roots = polynomial_roots(poly);

  long double scale = 0.0L;
  for (const auto& r : roots) scale = std::max(scale, std::abs(r));
  out.valid = true;
  for (const auto& r : roots) {
    if (std::abs(r.imag()) > 1e-9L * std::max(scale, 1e-300L)) {
      out.valid = false;
      out.diagnostic = "non-real coefficient: input is not of Lee-Yang type";
    } else if (r.real() <= 0.0L) {
      out.valid = false;
      out.diagnostic = "non-positive coefficient: input is not of Lee-Yang type";
    }
    out.c.push_back(static_cast<double>(r.real()));
  }
  std::sort(out.c.begin(), out.c.end(), std::greater<>());
  const UrsellTable back = ursell_from_coeffs(out.c, table.k_max());
  for (int k = 1; k <= table.k_max(); ++k) {
    const double ref = table.u(k);
    out.residuals.push_back(std::abs(back.u(k) - ref) / std::max(std::abs(ref), 1e-300));
  }
  return out;
}

BoundReport inequality_suite(const UrsellTable& t, double beta, double u_hat, double u_hat_err,
                             double n_sigma) {
  if (!(beta > 0.0) || !(u_hat > 0.0)) throw DomainError("inequality suite needs beta, u_hat > 0");
  BoundReport r;
  const double bu = beta * u_hat;
  const double rel_u = u_hat_err / u_hat;
  const auto slack = [&](double e_lhs, double e_rhs) { return n_sigma * std::hypot(e_lhs, e_rhs); };

  for (int k = 1; k <= t.k_max(); ++k) {
    const double signed_u = (k % 2 ? 1.0 : -1.0) * t.u(k);
    r.add_le("sign_rule_k" + std::to_string(k), 0.0, signed_u, slack(t.err(k), 0.0));
  }
  // At k = 1 (first bound) and k = 2 (second bound) both reduce to identities.
  for (int k = 2; k <= t.k_max(); ++k) {
    const double rhs = std::pow(2.0, 1 - k) * factorial(2 * k - 1) * std::pow(bu, k);
    r.add_le("ursell_bound_u2_k" + std::to_string(k), std::abs(t.u(k)), rhs,
             slack(t.err(k), k * rhs * rel_u));
  }
  if (t.k_max() >= 2) {
    const double u4 = std::abs(t.u(2));
    for (int k = 3; k <= t.k_max(); ++k) {
      const double coef = factorial(2 * k - 1) / (3.0 * std::pow(2.0, k - 1));
      const double rhs = coef * std::pow(bu, k - 2) * u4;
      const double e_rhs = std::hypot((k - 2) * rhs * rel_u, coef * std::pow(bu, k - 2) * t.err(2));
      r.add_le("ursell_bound_u4_k" + std::to_string(k), std::abs(t.u(k)), rhs, slack(t.err(k), e_rhs));
    }
  }

  // Coefficient-form bounds need a successful product fit.
  const int j = std::min(t.k_max(), 4);
  if (j >= 2) {
    const LeeYangCoeffs fit = leeyang_product_fit(t, j);
    if (fit.valid) {
      const double c1 = fit.c.front();
      double c2sum = 0.0;
      for (double c : fit.c) c2sum += c * c;
      for (int k = 2; k <= t.k_max(); ++k) {
        const double rhs1 = 2.0 * factorial(2 * k - 1) * std::pow(c1, k - 2) * c2sum;
        r.add_le("leeyang_c1_sum_k" + std::to_string(k), std::abs(t.u(k)), rhs1, slack(t.err(k), 0.0), false);
        const double rhs2 = factorial(2 * k - 1) * std::pow(c1, k - 1) * t.u(1);
        r.add_le("leeyang_c1_u2_k" + std::to_string(k), std::abs(t.u(k)), rhs2, slack(t.err(k), 0.0), false);
      }
    }
  }
  return r;
}

RootLocusReport root_locus_check(const PartitionPolynomial& poly, double tol) {
  const auto ys = polynomial_roots(poly.w);
  std::vector<cld> zs;
  for (const auto& y : ys) zs.push_back(0.5L * std::log(y));
  return summarize(zs, poly.degree(), tol);
}

std::vector<double> leeyang_coeffs_from_zeros(const PartitionPolynomial& poly, int images) {
  std::vector<double> c;
  for (const auto& y : polynomial_roots(poly.w)) {
    const long double half = 0.5L * std::arg(y);
    // Zeros come in pairs +-t; each factor (1 + c z^2) takes the one with t > 0.
    for (int m = -images; m <= images; ++m) {
      const long double t = half + static_cast<long double>(M_PI) * m;
      if (t > 0.0L) c.push_back(static_cast<double>(1.0L / (t * t)));
    }
  }
  std::sort(c.begin(), c.end(), std::greater<>());
  return c;
}

RootLocusReport even_polynomial_root_check(const std::vector<double>& coeffs, double tol) {
  std::vector<long double> a(coeffs.begin(), coeffs.end());
  const auto ws = polynomial_roots(a);
  std::vector<cld> zs;
  for (const auto& w : ws) zs.push_back(std::sqrt(w));
  return summarize(zs, 2 * (static_cast<int>(coeffs.size()) - 1), tol);
}

nlohmann::json to_json(const UrsellTable& t) {
  return {{"source", to_string(t.source)}, {"values", t.values}, {"errors", t.errors}};
}

nlohmann::json to_json(const LeeYangCoeffs& c) {
  return {{"c", c.c}, {"residuals", c.residuals}, {"valid", c.valid}, {"diagnostic", c.diagnostic}};
}

nlohmann::json to_json(const RootLocusReport& r) {
  return {{"degree", r.degree},   {"max_ratio", r.max_ratio}, {"tolerance", r.tolerance},
          {"pass", r.pass},       {"root_re", r.root_re},     {"root_im", r.root_im}};
}

}  // namespace hqao
