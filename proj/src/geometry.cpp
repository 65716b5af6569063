#include "uncseg/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "uncseg/error.hpp"

namespace uncseg {

namespace {

void require_same_grid(const Mask& a, const Mask& b) {
  if (!(a.shape() == b.shape())) throw Error("masks lie on different grids");
}

/// Draws three distinct indices in [0, n).
std::array<std::size_t, 3> sample3(Rng& rng, std::size_t n) {
  std::array<std::size_t, 3> idx{};
  idx[0] = uniform_index(rng, n);
  do idx[1] = uniform_index(rng, n);
  while (idx[1] == idx[0]);
  do idx[2] = uniform_index(rng, n);
  while (idx[2] == idx[0] || idx[2] == idx[1]);
  return idx;
}

bool collinear(const std::vector<Eigen::Vector3d>& pts) {
  if (pts.size() < 3) return true;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
  return ev[1] <= 1e-12 * std::max(ev[2], 1e-300);
}

std::size_t count_plane_inliers(const std::vector<Eigen::Vector3d>& cloud, const Plane& plane,
                                double inlier_dist, std::vector<std::uint8_t>* flags) {
  std::size_t count = 0;
  if (flags) flags->assign(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (std::abs(plane.signed_distance(cloud[i])) <= inlier_dist) {
      ++count;
      if (flags) (*flags)[i] = 1;
    }
  }
  return count;
}

}  // namespace

double mask_iou(const Mask& a, const Mask& b) {
  if (a.empty() || b.empty()) throw Error("empty mask");
  require_same_grid(a, b);
  const double inter = static_cast<double>(intersection_size(a, b));
  return inter / (static_cast<double>(a.size() + b.size()) - inter);
}

double mask_iom(const Mask& a, const Mask& b) {
  if (a.empty() || b.empty()) throw Error("empty mask");
  require_same_grid(a, b);
  return static_cast<double>(intersection_size(a, b)) /
         static_cast<double>(std::min(a.size(), b.size()));
}

PointSet extract_points(const Observation& obs, const Mask& mask) {
  PointSet out;
  out.points.reserve(mask.size());
  out.pixels.reserve(mask.size());
  for (int i : mask.indices()) {
    out.points.push_back(obs.cloud[i]);
    out.pixels.push_back(i);
  }
  return out;
}

double RigidTransform::angle() const {
  const double c = std::clamp((rotation.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

bool RigidTransform::is_valid(double tol) const {
  return (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
}

Plane fit_plane_least_squares(const std::vector<Eigen::Vector3d>& points) {
  if (collinear(points)) throw Error("degenerate point set: points are collinear");
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Plane plane;
  plane.normal = eig.eigenvectors().col(0).normalized();
  if (plane.normal.z() < 0) plane.normal = -plane.normal;
  plane.offset = plane.normal.dot(mean);
  return plane;
}

PlaneFit fit_plane_ransac(const std::vector<Eigen::Vector3d>& cloud, int iters, double inlier_dist,
                          Rng& rng) {
  if (cloud.size() < 3) throw Error("plane fit needs at least 3 points");
  if (collinear(cloud)) throw Error("degenerate point set: points are collinear");
  Plane best;
  std::size_t best_count = 0;
  for (int it = 0; it < iters; ++it) {
    const auto s = sample3(rng, cloud.size());
    const Eigen::Vector3d n = (cloud[s[1]] - cloud[s[0]]).cross(cloud[s[2]] - cloud[s[0]]);
    if (n.norm() < 1e-12) continue;
    Plane candidate;
    candidate.normal = n.normalized();
    if (candidate.normal.z() < 0) candidate.normal = -candidate.normal;
    candidate.offset = candidate.normal.dot(cloud[s[0]]);
    const std::size_t count = count_plane_inliers(cloud, candidate, inlier_dist, nullptr);
    if (count > best_count) {
      best_count = count;
      best = candidate;
    }
  }
  if (best_count == 0) throw Error("plane fit found no non-degenerate sample");

  PlaneFit fit;
  fit.plane = best;
  fit.inlier_count = count_plane_inliers(cloud, best, inlier_dist, &fit.inliers);
  std::vector<Eigen::Vector3d> consensus;
  consensus.reserve(fit.inlier_count);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (fit.inliers[i]) consensus.push_back(cloud[i]);
  if (!collinear(consensus)) {
    const Plane refit = fit_plane_least_squares(consensus);
    std::vector<std::uint8_t> flags;
    const std::size_t count = count_plane_inliers(cloud, refit, inlier_dist, &flags);
    if (count >= fit.inlier_count) {
      fit.plane = refit;
      fit.inliers = std::move(flags);
      fit.inlier_count = count;
    }
  }
  return fit;
}

RigidTransform orthogonal_alignment(const std::vector<Eigen::Vector3d>& src,
                                    const std::vector<Eigen::Vector3d>& dst) {
  if (src.size() != dst.size() || src.empty()) throw Error("alignment needs matched point lists");
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
  Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
  RigidTransform t;
  t.rotation = v * fix * u.transpose();
  t.translation = cd - t.rotation * cs;
  return t;
}

Registration register_rigid_ransac(const PointSet& src, const PointSet& dst,
                                   const std::vector<std::pair<int, int>>& corr, int iters,
                                   double inlier_dist, Rng& rng) {
  const std::size_t m = corr.size();
  if (m < 3) throw Error("underdetermined");
  for (const auto& [a, b] : corr)
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= src.size() ||
        static_cast<std::size_t>(b) >= dst.size())
      throw Error("correspondence index out of range");

  auto count_inliers = [&](const RigidTransform& t, std::vector<std::uint8_t>* flags) {
    std::size_t count = 0;
    if (flags) flags->assign(m, 0);
    for (std::size_t k = 0; k < m; ++k) {
      const double r = (t.apply(src.points[corr[k].first]) - dst.points[corr[k].second]).norm();
      if (r < inlier_dist) {
        ++count;
        if (flags) (*flags)[k] = 1;
      }
    }
    return count;
  };

  RigidTransform best;
  std::size_t best_count = 0;
  bool found = false;
  std::vector<Eigen::Vector3d> s(3), d(3);
  for (int it = 0; it < iters; ++it) {
    const auto idx = sample3(rng, m);
    for (int j = 0; j < 3; ++j) {
      s[j] = src.points[corr[idx[j]].first];
      d[j] = dst.points[corr[idx[j]].second];
    }
    if ((s[1] - s[0]).cross(s[2] - s[0]).norm() < 1e-12) continue;
    const RigidTransform t = orthogonal_alignment(s, d);
    const std::size_t count = count_inliers(t, nullptr);
    if (!found || count > best_count) {
      best = t;
      best_count = count;
      found = true;
    }
  }
  if (!found) throw Error("underdetermined");

  Registration reg;
  reg.transform = best;
  std::size_t count = count_inliers(best, &reg.inliers);
  // Consensus refit, repeated while the consensus set keeps growing or holds.
  for (int round = 0; round < 10 && count >= 3; ++round) {
    std::vector<Eigen::Vector3d> cs, cd;
    for (std::size_t k = 0; k < m; ++k)
      if (reg.inliers[k]) {
        cs.push_back(src.points[corr[k].first]);
        cd.push_back(dst.points[corr[k].second]);
      }
    if (collinear(cs)) break;
    const RigidTransform refit = orthogonal_alignment(cs, cd);
    std::vector<std::uint8_t> flags;
    const std::size_t refit_count = count_inliers(refit, &flags);
    if (refit_count < count) break;
    const bool unchanged = flags == reg.inliers;
    reg.transform = refit;
    reg.inliers = std::move(flags);
    count = refit_count;
    if (unchanged) break;
  }
  reg.inlier_fraction = static_cast<double>(count) / static_cast<double>(m);
  return reg;
}

bool is_degenerate(const Mask& mask, const Observation& obs, double thickness, const Plane& support) {
  double lo = 0.0, hi = 0.0;
  for (int i : mask.indices()) {
    const double h = support.signed_distance(obs.cloud[i]);
    lo = std::min(lo, h);
    hi = std::max(hi, h);
  }
  return hi - lo < thickness;
}

}  // namespace uncseg
