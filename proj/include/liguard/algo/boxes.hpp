#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "liguard/core/error.hpp"
#include "liguard/core/types.hpp"

namespace liguard::algo {

/// Inclusive [lo, hi] range.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct ClassRule {
  std::string name;
  Range length;
  Range width;
  Range height;
};

inline std::vector<ClassRule> default_class_table() {
  return {
      {"pedestrian", {0.2, 1.2}, {0.2, 1.2}, {1.2, 2.2}},
      {"cyclist", {1.2, 2.4}, {0.2, 1.2}, {1.2, 2.2}},
      {"car", {2.4, 5.5}, {1.4, 2.2}, {1.2, 2.2}},
      {"bus_truck", {5.5, 14.0}, {2.0, 3.0}, {2.2, 4.5}},
  };
}

/// First rule whose three ranges contain the box dims, else "Unknown".
inline std::string classify_box(const Eigen::Vector3d& extent, const std::vector<ClassRule>& table) {
  for (const auto& rule : table) {
    if (rule.length.contains(extent.x()) && rule.width.contains(extent.y()) &&
        rule.height.contains(extent.z())) {
      return rule.name;
    }
  }
  return "Unknown";
}

inline constexpr double kMinExtent = 0.05;

/// Wraps into (-pi/2, pi/2]; a box's heading is only defined modulo pi.
inline double wrap_half_pi(double a) {
  a = std::fmod(a, kPi);
  if (a <= -kPi / 2) a += kPi;
  if (a > kPi / 2) a -= kPi;
  return a;
}

/// Oriented z-up box around a point set.
///
/// Yaw follows the dominant eigenvector of the xy covariance; extents are
/// the point spans along the rotated axes with length >= width; every extent
/// is floored at kMinExtent.
inline Box3D fit_oriented_box(const std::vector<Eigen::Vector3d>& pts) {
  Box3D box;
  if (pts.empty()) {
    box.extent = Eigen::Vector3d::Constant(kMinExtent);
    return box;
  }
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p.head<2>();
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector2d d = p.head<2>() - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const Eigen::Vector2d axis = eig.eigenvectors().col(1);  // largest eigenvalue
  double yaw = wrap_half_pi(std::atan2(axis.y(), axis.x()));

  auto spans = [&](double angle, Eigen::Vector2d& lo, Eigen::Vector2d& hi) {
    const double c = std::cos(angle), s = std::sin(angle);
    lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    for (const auto& p : pts) {
      const Eigen::Vector2d local(c * p.x() + s * p.y(), -s * p.x() + c * p.y());
      lo = lo.cwiseMin(local);
      hi = hi.cwiseMax(local);
    }
  };
  Eigen::Vector2d lo, hi;
  spans(yaw, lo, hi);
  if (hi.x() - lo.x() < hi.y() - lo.y()) {
    yaw = wrap_half_pi(yaw + kPi / 2);
    spans(yaw, lo, hi);
  }

  double zmin = std::numeric_limits<double>::infinity();
  double zmax = -zmin;
  for (const auto& p : pts) {
    zmin = std::min(zmin, p.z());
    zmax = std::max(zmax, p.z());
  }

  const Eigen::Vector2d mid = (lo + hi) / 2;
  const double c = std::cos(yaw), s = std::sin(yaw);
  box.center = {c * mid.x() - s * mid.y(), s * mid.x() + c * mid.y(), (zmin + zmax) / 2};
  box.extent = {std::max(kMinExtent, hi.x() - lo.x()), std::max(kMinExtent, hi.y() - lo.y()),
                std::max(kMinExtent, zmax - zmin)};
  box.yaw = yaw;
  return box;
}

/// One labeled box per cluster id, ordered by id. Noise is ignored.
inline std::vector<ObjectLabel> cluster_to_object(const PointCloud& pc,
                                                  const std::vector<std::int32_t>& cluster_ids,
                                                  const std::vector<ClassRule>& table,
                                                  const std::string& source = "lidar") {
  if (cluster_ids.size() != pc.size()) {
    throw ParamError("cluster_ids not aligned with point cloud");
  }
  std::map<std::int32_t, std::vector<Eigen::Vector3d>> clusters;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (cluster_ids[i] < 0) continue;
    clusters[cluster_ids[i]].push_back(pc.points[i].position());
  }
  std::vector<ObjectLabel> out;
  out.reserve(clusters.size());
  for (const auto& [id, pts] : clusters) {
    ObjectLabel label;
    label.box3d = fit_oriented_box(pts);
    label.class_name = classify_box(label.box3d.extent, table);
    label.source = source;
    out.push_back(std::move(label));
  }
  return out;
}

}  // namespace liguard::algo
