#pragma once

#include <vector>

#include "hgcl/types.hpp"

namespace hgcl {

/// How the radial boundaries are placed.
enum class RadialMode {
  kQuantile,   // equal-count annuli (robust to heavy-tailed radii)
  kEqualWidth  // equally spaced radii between min and max
};

/// Deterministic polar sector partition of 2-D points.
struct ClusterAssignment {
  Index rho = 1;
  Index theta = 1;
  Vector2 center = Vector2::Zero();
  std::vector<Scalar> radial_boundaries;  // rho-1, strictly increasing
  std::vector<Index> assign;              // item -> cluster in [0, rho*theta)
  std::vector<Index> sizes;               // per-cluster counts

  Index num_clusters() const { return rho * theta; }
};

/// Sector id = radial_bin * theta + angular_bin. The center defaults to the
/// coordinate centroid; angular bins split [-pi, pi) from the positive
/// x-axis, and a radius equal to a boundary falls in the lower annulus.
ClusterAssignment polar_partition(const Matrix& coords, Index rho, Index theta,
                                  RadialMode mode = RadialMode::kQuantile,
                                  const Vector2* center = nullptr);

/// One-hot membership W (n x rho*theta): W(j, assign[j]) = 1.
SparseMatrix membership_matrix(const ClusterAssignment& a);

}  // namespace hgcl
