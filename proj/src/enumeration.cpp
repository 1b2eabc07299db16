#include "hqao/enumeration.hpp"

#include <cmath>
#include <string>

#include "hqao/errors.hpp"

namespace hqao {

bool IsingModel::ferromagnetic() const { return (couplings.array() >= 0.0).all(); }

IsingModel IsingModel::free_spins(int n) { return {Eigen::MatrixXd::Zero(n, n)}; }

IsingModel IsingModel::uniform(int n, double J) {
  IsingModel m{Eigen::MatrixXd::Constant(n, n, J)};
  m.couplings.diagonal().setZero();
  return m;
}

IsingModel IsingModel::ring(int n, double J) {
  IsingModel m = free_spins(n);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    if (i == j) continue;
    m.couplings(i, j) = J;
    m.couplings(j, i) = J;
  }
  return m;
}

double EnumerationResult::four(int i, int j, int k, int l) const {
  const int n = static_cast<int>(two_point.rows());
  return four_point[((static_cast<std::size_t>(i) * n + j) * n + k) * n + l];
}

EnumerationResult exact_enumeration(const IsingModel& model, bool allow_negative) {
  const int n = model.spins();
  if (n < 1) throw DomainError("enumeration needs at least one spin");
  if (n > kMaxEnumerationSpins)
    throw RangeError("exact enumeration limited to " + std::to_string(kMaxEnumerationSpins) +
                     " spins, got " + std::to_string(n));
  if (!allow_negative && !model.ferromagnetic())
    throw DomainError("exact enumeration expects nonnegative couplings");
  const Eigen::MatrixXd& J = model.couplings;

  EnumerationResult out;
  out.magnetization_moments.assign(9, 0.0L);
  out.polynomial.spins = n;
  out.polynomial.w.assign(n + 1, 0.0L);
  const bool tensors = n <= kMaxTensorSpins;
  const std::size_t n4 = static_cast<std::size_t>(n) * n * n * n;
  std::vector<long double> two(static_cast<std::size_t>(n) * n, 0.0L), four(tensors ? n4 : 0, 0.0L);

  std::vector<int> s(n, -1);
  // Energy of the all-down state, then Gray-code single flips.
  long double energy = 0.0L;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) energy += J(i, j);
  int ups = 0;
  long double Z = 0.0L;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t step = 0; step < total; ++step) {
    if (step > 0) {
      const int flip = __builtin_ctzll(step);
      long double field = 0.0L;
      for (int j = 0; j < n; ++j)
        if (j != flip) field += J(flip, j) * s[j];
      energy -= 2.0L * s[flip] * field;
      s[flip] = -s[flip];
      ups += s[flip] > 0 ? 1 : -1;
    }
    const long double w = std::exp(energy);
    Z += w;
    out.polynomial.w[ups] += w;
    const long double M = 2 * ups - n;
    long double mp = 1.0L;
    for (int k = 0; k <= 8; ++k) {
      out.magnetization_moments[k] += w * mp;
      mp *= M;
    }
    if (tensors) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const int sij = s[i] * s[j];
          two[static_cast<std::size_t>(i) * n + j] += w * sij;
          for (int k = 0; k < n; ++k) {
            const int sijk = sij * s[k];
            long double* row = &four[((static_cast<std::size_t>(i) * n + j) * n + k) * n];
            for (int l = 0; l < n; ++l) row[l] += sijk * s[l] > 0 ? w : -w;
          }
        }
    }
  }
  for (auto& m : out.magnetization_moments) m /= Z;

  // Cumulants of M from its moments; odd moments vanish by symmetry.
  std::vector<long double> kappa(9, 0.0L);
  const auto& m = out.magnetization_moments;
  for (int r = 1; r <= 8; ++r) {
    long double c = m[r];
    long double binom = 1.0L;  // C(r-1, k-1)
    for (int k = 1; k < r; ++k) {
      c -= binom * kappa[k] * m[r - k];
      binom = binom * (r - k) / k;
    }
    kappa[r] = c;
  }
  out.ursell = {kappa[2], kappa[4], kappa[6], kappa[8]};

  if (tensors) {
    out.two_point.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.two_point(i, j) = static_cast<double>(two[static_cast<std::size_t>(i) * n + j] / Z);
    out.four_point.resize(n4);
    for (std::size_t i = 0; i < n4; ++i) out.four_point[i] = static_cast<double>(four[i] / Z);
  }
  return out;
}

}  // namespace hqao
