#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hqao/enumeration.hpp"
#include "hqao/report.hpp"

namespace hqao {

enum class UrsellSource { exact, spectral, mc };

const char* to_string(UrsellSource s);

/// Integrated Ursell numbers U_2, U_4, ..., U_{2 k_max}; `values[k-1]` is
/// U_{2k}. `errors` is empty for deterministic sources.
struct UrsellTable {
  std::vector<double> values;
  std::vector<double> errors;
  UrsellSource source = UrsellSource::exact;

  int k_max() const { return static_cast<int>(values.size()); }
  double u(int k) const { return values.at(static_cast<std::size_t>(k - 1)); }
  double err(int k) const { return errors.empty() ? 0.0 : errors.at(static_cast<std::size_t>(k - 1)); }
};

/// Even cumulants from even moments m_2, m_4, ..., m_{2K} (odd moments zero).
UrsellTable cumulants_from_moments(const std::vector<double>& even_moments,
                                   UrsellSource source = UrsellSource::exact);
/// Inverse of cumulants_from_moments.
std::vector<double> moments_from_cumulants(const std::vector<double>& even_cumulants);

/// Lee-Yang product coefficients c_1 >= c_2 >= ... > 0.
struct LeeYangCoeffs {
  std::vector<double> c;
  /// Relative reconstruction error of U_{2k}, k = 1..k_max.
  std::vector<double> residuals;
  bool valid = false;
  std::string diagnostic;
};

/// Power sums p_k = (-1)^{k-1} U_{2k} / (2 (2k-1)!) are converted to
/// elementary symmetric polynomials (Newton identities) and the c_j are the
/// roots of the resulting monic polynomial.
LeeYangCoeffs leeyang_product_fit(const UrsellTable& table, int j_max);

/// Exact product coefficients of an Ising approximant: with the fugacity
/// zeros y_j = exp(i phi_j), the field zeros are z = i (phi_j / 2 + pi m) and
/// c = (phi_j / 2 + pi m)^{-2}. Images |m| <= `images` are kept, sorted
/// descending. A finite power-sum fit cannot represent such a spectrum when
/// many c_j are comparable.
std::vector<double> leeyang_coeffs_from_zeros(const PartitionPolynomial& poly, int images);

/// Forward map c -> U_{2k} = 2 (2k-1)! (-1)^{k-1} sum_j c_j^k.
UrsellTable ursell_from_coeffs(const std::vector<double>& c, int k_max);

/// Sign rule plus the two cumulant bounds in terms of beta*u_hat and U_4,
/// with `n_sigma` combined standard errors of slack for stochastic tables.
/// Coefficient-form bounds (via a Lee-Yang fit) are reported as non-gating.
BoundReport inequality_suite(const UrsellTable& table, double beta, double u_hat,
                             double u_hat_err = 0.0, double n_sigma = 3.0);

struct RootLocusReport {
  int degree = 0;
  /// max over roots of |Re z| / |z|, z the zero in the field variable.
  double max_ratio = 0.0;
  double tolerance = 1e-9;
  bool pass = false;
  std::vector<double> root_re;
  std::vector<double> root_im;
};

/// Zeros of the partition function in the field variable z = (1/2) log y
/// must be purely imaginary. Throws RangeError above degree 24.
RootLocusReport root_locus_check(const PartitionPolynomial& poly, double tol = 1e-9);

/// Same check for an even polynomial given by its coefficients in w = z^2
/// (coeffs[k] multiplies z^{2k}); roots in w must be real and negative.
RootLocusReport even_polynomial_root_check(const std::vector<double>& coeffs, double tol = 1e-9);

nlohmann::json to_json(const UrsellTable& t);
nlohmann::json to_json(const LeeYangCoeffs& c);
nlohmann::json to_json(const RootLocusReport& r);

}  // namespace hqao
