#pragma once

#include <vector>

#include <Eigen/Dense>

namespace hqao {

inline constexpr int kMaxEnumerationSpins = 20;
inline constexpr int kMaxTensorSpins = 12;

/// Ising approximant with weight exp(sum_{i<j} J_ij s_i s_j), s = +-1.
struct IsingModel {
  Eigen::MatrixXd couplings;

  int spins() const { return static_cast<int>(couplings.rows()); }
  bool ferromagnetic() const;

  static IsingModel free_spins(int n);
  static IsingModel uniform(int n, double J);
  /// Nearest-neighbour ring (n >= 3) or a single bond (n = 2).
  static IsingModel ring(int n, double J);
};

/// Partition function as a polynomial in the fugacity y = exp(2h):
/// Z(h) = exp(-N h) * sum_u w[u] y^u, with u the number of up spins.
struct PartitionPolynomial {
  std::vector<long double> w;
  int spins = 0;
  int degree() const { return static_cast<int>(w.size()) - 1; }
};

/// Exact averages over all 2^N configurations.
struct EnumerationResult {
  /// Moments <M^k> of the magnetization M = sum s_i, k = 0..8.
  std::vector<long double> magnetization_moments;
  /// Ursell numbers U_{2k} (cumulants of M) for k = 1..4.
  std::vector<long double> ursell;
  /// <s_i s_j> and <s_i s_j s_k s_l>; filled only for N <= 12.
  Eigen::MatrixXd two_point;
  std::vector<double> four_point;
  PartitionPolynomial polynomial;

  double four(int i, int j, int k, int l) const;
};

/// Throws RangeError above 20 spins and DomainError for negative couplings
/// unless `allow_negative` is set (used for counterexample fixtures).
EnumerationResult exact_enumeration(const IsingModel& model, bool allow_negative = false);

}  // namespace hqao
