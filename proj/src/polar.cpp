#include "hgcl/polar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hgcl {

namespace {

std::vector<Scalar> quantile_boundaries(std::vector<Scalar> radii, Index rho) {
  std::sort(radii.begin(), radii.end());
  const auto n = static_cast<Index>(radii.size());
  std::vector<Scalar> bounds;
  bounds.reserve(static_cast<std::size_t>(rho - 1));
  for (Index k = 1; k < rho; ++k) {
    const Index cut = (k * n) / rho;  // first index of annulus k
    Scalar b = radii[static_cast<std::size_t>(std::max<Index>(cut - 1, 0))];
    // Duplicate radii at the cut would collapse boundaries; nudge upward to
    // keep them strictly increasing (annuli may legally end up empty).
    if (!bounds.empty() && b <= bounds.back()) {
      b = std::nextafter(bounds.back(), std::numeric_limits<Scalar>::infinity());
    }
    bounds.push_back(b);
  }
  return bounds;
}

std::vector<Scalar> equal_width_boundaries(const std::vector<Scalar>& radii,
                                           Index rho) {
  const auto [mn, mx] = std::minmax_element(radii.begin(), radii.end());
  std::vector<Scalar> bounds;
  bounds.reserve(static_cast<std::size_t>(rho - 1));
  for (Index k = 1; k < rho; ++k) {
    Scalar b = *mn + (*mx - *mn) * static_cast<Scalar>(k) /
                         static_cast<Scalar>(rho);
    if (!bounds.empty() && b <= bounds.back()) {
      b = std::nextafter(bounds.back(), std::numeric_limits<Scalar>::infinity());
    }
    bounds.push_back(b);
  }
  return bounds;
}

}  // namespace

ClusterAssignment polar_partition(const Matrix& coords, Index rho, Index theta,
                                  RadialMode mode, const Vector2* center) {
  if (coords.rows() < 1 || coords.cols() != 2) {
    throw std::invalid_argument("polar_partition: need an n x 2 matrix, n >= 1");
  }
  if (rho < 1 || theta < 1) {
    throw std::invalid_argument("polar_partition: rho and theta must be >= 1");
  }
  const Index n = coords.rows();

  ClusterAssignment a;
  a.rho = rho;
  a.theta = theta;
  a.center = center ? *center : Vector2(coords.col(0).mean(), coords.col(1).mean());

  std::vector<Scalar> radii(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Scalar dx = coords(i, 0) - a.center[0];
    const Scalar dy = coords(i, 1) - a.center[1];
    radii[static_cast<std::size_t>(i)] = std::hypot(dx, dy);
  }
  if (rho > 1) {
    a.radial_boundaries = mode == RadialMode::kQuantile
                              ? quantile_boundaries(radii, rho)
                              : equal_width_boundaries(radii, rho);
  }

  constexpr Scalar kPi = std::numbers::pi_v<Scalar>;
  a.assign.resize(static_cast<std::size_t>(n));
  a.sizes.assign(static_cast<std::size_t>(rho * theta), 0);
  for (Index i = 0; i < n; ++i) {
    const Scalar dx = coords(i, 0) - a.center[0];
    const Scalar dy = coords(i, 1) - a.center[1];
    const Scalar turn = (std::atan2(dy, dx) + kPi) / (2.0 * kPi);  // [0, 1]
    const Index angular = std::min<Index>(
        static_cast<Index>(std::floor(static_cast<Scalar>(theta) * turn)),
        theta - 1);
    // A radius tying a boundary stays in the lower annulus.
    const Index radial = static_cast<Index>(
        std::lower_bound(a.radial_boundaries.begin(),
                         a.radial_boundaries.end(),
                         radii[static_cast<std::size_t>(i)]) -
        a.radial_boundaries.begin());
    const Index cluster = radial * theta + angular;
    a.assign[static_cast<std::size_t>(i)] = cluster;
    ++a.sizes[static_cast<std::size_t>(cluster)];
  }
  return a;
}

SparseMatrix membership_matrix(const ClusterAssignment& a) {
  const Index n = static_cast<Index>(a.assign.size());
  SparseMatrix w(n, a.num_clusters());
  std::vector<Eigen::Triplet<Scalar>> trips;
  trips.reserve(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    trips.emplace_back(j, a.assign[static_cast<std::size_t>(j)], 1.0);
  }
  w.setFromTriplets(trips.begin(), trips.end());
  w.makeCompressed();
  return w;
}

}  // namespace hgcl
