#include "hqao/hierarchy.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hqao/errors.hpp"

namespace hqao {

namespace {

void require_valid(int kappa, double delta) {
  if (kappa < 2) throw DomainError("kappa must be >= 2, got " + std::to_string(kappa));
  if (!(delta > 0.0 && delta < 0.5))
    throw DomainError("delta must lie in (0, 1/2), got " + std::to_string(delta));
}

}  // namespace

HierarchyParams HierarchyParams::normalized(int kappa, double delta) {
  require_valid(kappa, delta);
  HierarchyParams p;
  p.kappa = kappa;
  p.delta = delta;
  const double k = static_cast<double>(kappa);
  // expm1 keeps theta accurate as delta -> 0.
  p.theta = std::expm1(delta * std::log(k));
  p.j_star = p.theta / (1.0 - std::pow(k, -1.0 - delta));
  return p;
}

HierarchyParams HierarchyParams::decoupled(int kappa, double delta) {
  HierarchyParams p = normalized(kappa, delta);
  p.theta = 0.0;
  return p;
}

double HierarchyParams::contraction() const { return std::pow(static_cast<double>(kappa), -delta); }

double HierarchyParams::field_scale() const {
  return std::pow(static_cast<double>(kappa), -0.5 * (1.0 + delta));
}

HierarchyParams normalization_constants(int kappa, double delta) {
  return HierarchyParams::normalized(kappa, delta);
}

std::vector<Site> Block::members() const {
  std::vector<Site> out;
  out.reserve(size());
  for (Site l = first; l <= last; ++l) out.push_back(l);
  return out;
}

std::uint64_t checked_pow(std::uint64_t base, int exp) {
  if (exp < 0) throw DomainError("negative exponent in checked_pow");
  std::uint64_t result = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && result > std::numeric_limits<std::uint64_t>::max() / base)
      throw RangeError("integer overflow computing " + std::to_string(base) + "^" +
                       std::to_string(exp));
    result *= base;
  }
  return result;
}

Block block_members(int level, std::uint64_t index, const HierarchyParams& params) {
  if (level < 0) throw DomainError("block level must be nonnegative");
  const std::uint64_t size = checked_pow(static_cast<std::uint64_t>(params.kappa), level);
  if (index > 0 && size > (std::numeric_limits<std::uint64_t>::max() - (size - 1)) / index)
    throw RangeError("block index out of range at level " + std::to_string(level));
  Block b;
  b.level = level;
  b.index = index;
  b.first = size * index;
  b.last = b.first + (size - 1);
  return b;
}

int common_level(Site l, Site l2, int kappa) {
  const auto k = static_cast<std::uint64_t>(kappa);
  int n = 0;
  while (l != l2) {
    l /= k;
    l2 /= k;
    ++n;
  }
  return n;
}

SiteCoupling hier_distance_and_coupling(Site l, Site l2, double J, const HierarchyParams& params) {
  const int n = common_level(l, l2, params.kappa);
  const double span = std::pow(static_cast<double>(params.kappa), n);
  return {span - 1.0, J * std::pow(span, -1.0 - params.delta)};
}

std::vector<double> level_weights(int level, const HierarchyParams& params) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(std::max(level, 0)));
  const double k = static_cast<double>(params.kappa);
  for (int m = 1; m <= level; ++m) w.push_back(params.theta * std::pow(k, -m * (1.0 + params.delta)));
  return w;
}

double uniform_mode_shift(int level, const HierarchyParams& params) {
  double s = 0.0;
  const double k = static_cast<double>(params.kappa);
  for (int m = 1; m <= level; ++m) s += std::pow(k, -m * params.delta);
  return -params.theta * s;
}

Eigen::MatrixXd coupling_matrix(int level, const HierarchyParams& params) {
  if (level < 0) throw DomainError("level must be nonnegative");
  const std::uint64_t size = checked_pow(static_cast<std::uint64_t>(params.kappa), level);
  if (size > kMaxCouplingMatrixSize)
    throw RangeError("coupling matrix of size " + std::to_string(size) + " exceeds desk scale");
  const auto n = static_cast<Eigen::Index>(size);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  if (level == 0) return M;
  const auto weights = level_weights(level, params);
  const int k = params.kappa;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const int shared = common_level(static_cast<Site>(i), static_cast<Site>(j), k);
      // B_m(i, j) = 1 for every m >= shared
      double v = 0.0;
      for (int m = std::max(shared, 1); m <= level; ++m) v += weights[static_cast<std::size_t>(m - 1)];
      M(i, j) = -v;
    }
  }
  return M;
}

}  // namespace hqao
