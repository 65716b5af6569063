#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "uncseg/mask.hpp"
#include "uncseg/rng.hpp"
#include "uncseg/scene.hpp"

namespace uncseg {

double mask_iou(const Mask& a, const Mask& b);
/// Intersection over the smaller of the two masks.
double mask_iom(const Mask& a, const Mask& b);

struct PointSet {
  std::vector<Eigen::Vector3d> points;
  /// Pixel each point was observed at in the most recent frame, -1 if none.
  /// Either empty or the same length as `points`.
  std::vector<int> pixels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Points of `obs.cloud` under the mask, tagged with their pixels.
PointSet extract_points(const Observation& obs, const Mask& mask);

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  /// Rotation angle in radians.
  double angle() const;
  bool is_valid(double tol = 1e-9) const;
};

/// Points x with normal . x == offset; the normal has unit length.
struct Plane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;

  double signed_distance(const Eigen::Vector3d& p) const { return normal.dot(p) - offset; }
};

struct PlaneFit {
  Plane plane;
  std::vector<std::uint8_t> inliers;
  std::size_t inlier_count = 0;
};

/// RANSAC over 3-point samples followed by a least-squares refit on the
/// consensus set. The returned normal has a non-negative z component.
/// Throws on collinear input.
PlaneFit fit_plane_ransac(const std::vector<Eigen::Vector3d>& cloud, int iters, double inlier_dist,
                          Rng& rng);
Plane fit_plane_least_squares(const std::vector<Eigen::Vector3d>& points);

/// Least-squares rotation and translation mapping src[i] onto dst[i].
RigidTransform orthogonal_alignment(const std::vector<Eigen::Vector3d>& src,
                                    const std::vector<Eigen::Vector3d>& dst);

struct Registration {
  RigidTransform transform;
  double inlier_fraction = 0.0;
  std::vector<std::uint8_t> inliers;  // per correspondence
};

/// Correspondences are (index into src, index into dst). Throws
/// "underdetermined" with fewer than 3.
Registration register_rigid_ransac(const PointSet& src, const PointSet& dst,
                                   const std::vector<std::pair<int, int>>& correspondences,
                                   int iters, double inlier_dist, Rng& rng);

/// True when the masked points span less than `thickness` in height above
/// the support plane, counting the plane itself as part of the extent.
bool is_degenerate(const Mask& mask, const Observation& obs, double thickness,
                   const Plane& support = Plane{});

}  // namespace uncseg
