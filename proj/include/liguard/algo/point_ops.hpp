#pragma once

#include <Eigen/Geometry>

#include <cmath>
#include <vector>

#include "liguard/core/error.hpp"
#include "liguard/core/types.hpp"

namespace liguard::algo {

using KeepMask = std::vector<bool>;

/// Keeps the points whose mask entry is set, preserving order. Colors follow
/// their points; organization is lost unless every point survives.
inline PointCloud select(const PointCloud& pc, const KeepMask& keep) {
  PointCloud out;
  std::size_t kept = 0;
  for (bool k : keep) kept += k ? 1 : 0;
  out.points.reserve(kept);
  if (pc.colors) out.colors.emplace().reserve(kept);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (!keep[i]) continue;
    out.points.push_back(pc.points[i]);
    if (pc.colors) out.colors->push_back((*pc.colors)[i]);
  }
  if (kept == pc.size()) out.organized = pc.organized;
  return out;
}

template <class T>
std::vector<T> select(const std::vector<T>& values, const KeepMask& keep) {
  std::vector<T> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (keep[i]) out.push_back(values[i]);
  }
  return out;
}

inline bool is_valid_point(const PointXYZI& p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) return false;
  return !(p.x == 0.0 && p.y == 0.0 && p.z == 0.0);
}

/// Drops points with any non-finite coordinate and exact-origin points.
inline KeepMask sanitize_mask(const PointCloud& pc) {
  KeepMask keep(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) keep[i] = is_valid_point(pc.points[i]);
  return keep;
}

inline PointCloud sanitize_pcd(const PointCloud& pc) { return select(pc, sanitize_mask(pc)); }

inline void check_bounds(const Eigen::Vector3d& min, const Eigen::Vector3d& max) {
  for (int a = 0; a < 3; ++a) {
    if (min[a] > max[a]) {
      throw ParamError("crop bounds: min " + std::to_string(min[a]) + " > max " +
                       std::to_string(max[a]) + " on axis " + "xyz"[a]);
    }
  }
}

/// Inclusive axis-aligned bounds test.
inline KeepMask crop_mask(const PointCloud& pc, const Eigen::Vector3d& min,
                          const Eigen::Vector3d& max) {
  check_bounds(min, max);
  KeepMask keep(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto& p = pc.points[i];
    keep[i] = p.x >= min.x() && p.x <= max.x() && p.y >= min.y() && p.y <= max.y() &&
              p.z >= min.z() && p.z <= max.z();
  }
  return keep;
}

inline PointCloud crop(const PointCloud& pc, const Eigen::Vector3d& min,
                       const Eigen::Vector3d& max) {
  return select(pc, crop_mask(pc, min, max));
}

/// R = Rz(yaw) * Ry(pitch) * Rx(roll), angles in radians.
inline Eigen::Matrix3d euler_xyz_to_matrix(const Eigen::Vector3d& euler) {
  return (Eigen::AngleAxisd(euler.z(), Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(euler.y(), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(euler.x(), Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

inline PointCloud rotate(const PointCloud& pc, const Eigen::Vector3d& euler_xyz) {
  const Eigen::Matrix3d r = euler_xyz_to_matrix(euler_xyz);
  PointCloud out = pc;
  for (auto& p : out.points) {
    const Eigen::Vector3d q = r * Eigen::Vector3d(p.x, p.y, p.z);
    p.x = q.x();
    p.y = q.y();
    p.z = q.z();
  }
  return out;
}

}  // namespace liguard::algo
