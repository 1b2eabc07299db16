#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace hqao {

using Site = std::uint64_t;

/// Branching number, decay exponent and the derived interaction scale.
///
/// theta is never a free input: `normalized` fixes theta = kappa^delta - 1,
/// which sets the scale of beta. `decoupled` is the J = 0 variant used by
/// the pure-convolution oracles (theta = 0, j_star kept for reference).
struct HierarchyParams {
  int kappa = 2;
  double delta = 0.25;
  double theta = 0.0;
  double j_star = 0.0;

  static HierarchyParams normalized(int kappa, double delta);
  static HierarchyParams decoupled(int kappa, double delta);

  /// kappa^(-delta), the Gaussian contraction rate per level.
  double contraction() const;
  /// kappa^(-(1+delta)/2), the field rescaling applied per level.
  double field_scale() const;
};

/// Same as HierarchyParams::normalized; throws DomainError unless
/// kappa >= 2 and delta in (0, 1/2).
HierarchyParams normalization_constants(int kappa, double delta);

struct Block {
  int level = 0;
  std::uint64_t index = 0;
  Site first = 0;
  Site last = 0;

  std::uint64_t size() const { return last - first + 1; }
  bool contains(Site l) const { return l >= first && l <= last; }
  std::vector<Site> members() const;
};

/// base^exp with overflow detection (RangeError).
std::uint64_t checked_pow(std::uint64_t base, int exp);

Block block_members(int level, std::uint64_t index, const HierarchyParams& params);

/// Minimal level n such that l and l2 lie in a common level-n block.
int common_level(Site l, Site l2, int kappa);

struct SiteCoupling {
  double distance = 0.0;
  double coupling = 0.0;
};

/// d(l, l') = kappa^n(l,l') - 1 and J_ll' = J (d + 1)^(-1-delta).
SiteCoupling hier_distance_and_coupling(Site l, Site l2, double J, const HierarchyParams& params);

/// Interaction part M of the level-n quadratic form,
/// M = -theta * sum_{m=1..n} kappa^{-m(1+delta)} B_m, with B_m the 0/1 matrix
/// that is 1 inside each level-m sub-block. Single-site terms are not included.
Eigen::MatrixXd coupling_matrix(int level, const HierarchyParams& params);

/// Weights theta * kappa^{-m(1+delta)} for m = 1..level (index m-1).
std::vector<double> level_weights(int level, const HierarchyParams& params);

/// Eigenvalue of coupling_matrix(level) on the uniform vector:
/// -theta * sum_{m=1..level} kappa^{-m delta}.
double uniform_mode_shift(int level, const HierarchyParams& params);

inline constexpr std::uint64_t kMaxCouplingMatrixSize = 4096;

}  // namespace hqao
