#pragma once

// Brute-force reference implementations the tests compare against.

#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "liguard/core/types.hpp"

namespace liguard::oracle {

/// O(N^2) DBSCAN: BFS over core points, border points to the lowest-index
/// core neighbor, ids by first member.
inline std::vector<std::int32_t> dbscan(const PointCloud& pc, double eps, std::size_t min_points) {
  const std::size_t n = pc.size();
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = (pc.points[i].position() - pc.points[j].position()).norm();
      if (d <= eps) nb[i].push_back(j);
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = nb[i].size() >= min_points;

  std::vector<long> comp(n, -1);
  long next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (!core[s] || comp[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    comp[s] = next;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t j : nb[i]) {
        if (core[j] && comp[j] < 0) {
          comp[j] = next;
          stack.push_back(j);
        }
      }
    }
    ++next;
  }
  std::vector<long> assigned(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      assigned[i] = comp[i];
      continue;
    }
    for (std::size_t j : nb[i]) {  // neighbor lists are in index order
      if (core[j]) {
        assigned[i] = comp[j];
        break;
      }
    }
  }
  std::map<long, std::int32_t> relabel;
  std::vector<std::int32_t> ids(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (assigned[i] < 0) continue;
    auto it = relabel.emplace(assigned[i], static_cast<std::int32_t>(relabel.size())).first;
    ids[i] = it->second;
  }
  return ids;
}

using Voxel = std::tuple<long long, long long, long long>;

inline Voxel voxel(const PointXYZI& p, double v) {
  return {static_cast<long long>(std::floor(p.x / v)), static_cast<long long>(std::floor(p.y / v)),
          static_cast<long long>(std::floor(p.z / v))};
}

/// Voxels seen in at least threshold * (sampled frames) of the sampled frames.
inline std::set<Voxel> stdf_background(const std::vector<PointCloud>& frames, double voxel_size,
                                       std::size_t n, std::size_t m_skip, std::size_t r,
                                       double threshold) {
  std::vector<std::size_t> sampled;
  for (std::size_t round = 0; round < r; ++round) {
    const std::size_t start = round * (n + m_skip);
    for (std::size_t k = 0; k < n; ++k) {
      if (start + k < frames.size()) sampled.push_back(start + k);
    }
  }
  std::map<Voxel, std::size_t> count;
  for (std::size_t i : sampled) {
    std::set<Voxel> seen;
    for (const auto& p : frames[i].points) seen.insert(voxel(p, voxel_size));
    for (const auto& v : seen) ++count[v];
  }
  std::set<Voxel> out;
  for (const auto& [v, c] : count) {
    if (static_cast<double>(c) / static_cast<double>(sampled.size()) >= threshold) out.insert(v);
  }
  return out;
}

/// Point inside an oriented box, tested in the box frame.
inline bool in_obb(const Box3D& b, const Eigen::Vector3d& p) {
  const Eigen::Vector3d local = Eigen::AngleAxisd(-b.yaw, Eigen::Vector3d::UnitZ()) * (p - b.center);
  return (local.cwiseAbs().array() <= (b.extent / 2).array()).all();
}

}  // namespace liguard::oracle
