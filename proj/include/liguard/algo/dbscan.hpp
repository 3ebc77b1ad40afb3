#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "liguard/algo/background.hpp"
#include "liguard/core/error.hpp"
#include "liguard/core/types.hpp"

namespace liguard::algo {

inline constexpr std::int32_t kNoise = -1;

/// Uniform hash grid for fixed-radius neighbor queries.
class RadiusGrid {
 public:
  RadiusGrid(const std::vector<PointXYZI>& points, double radius)
      : points_(points), radius_(radius), radius2_(radius * radius),
        // Slightly oversized cells keep every radius neighbor within +-1 cell.
        cell_(radius * (1.0 + 1e-9)) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!finite_xyz(points[i])) continue;
      cells_[key(points[i])].push_back(static_cast<std::uint32_t>(i));
    }
  }

  /// Calls fn(j) for every finite point j with |p_j - p_i| <= radius (i included).
  template <class Fn>
  void for_each_neighbor(std::size_t i, Fn&& fn) const {
    const auto& p = points_[i];
    if (!finite_xyz(p)) return;
    const VoxelKey c = key(p);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == cells_.end()) continue;
          for (std::uint32_t j : it->second) {
            const auto& q = points_[j];
            const double ex = p.x - q.x, ey = p.y - q.y, ez = p.z - q.z;
            if (ex * ex + ey * ey + ez * ez <= radius2_) fn(static_cast<std::size_t>(j));
          }
        }
      }
    }
  }

  double radius() const { return radius_; }

 private:
  VoxelKey key(const PointXYZI& p) const { return voxel_key(p, cell_); }

  const std::vector<PointXYZI>& points_;
  double radius_;
  double radius2_;
  double cell_;
  std::unordered_map<VoxelKey, std::vector<std::uint32_t>, VoxelKeyHash> cells_;
};

namespace dbscan_detail {

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[a] = b;  // root is always the smallest index
  }
};

}  // namespace dbscan_detail

/// Density-based clustering over 3D Euclidean distance.
///
/// A point is core when at least `min_points` points (itself included) lie
/// within `eps`. Core points connected through eps-neighborhoods form a
/// cluster; a non-core point joins the cluster of its lowest-index core
/// neighbor, or is noise (-1) without one. Cluster ids are 0..k-1 ordered by
/// each cluster's smallest point index. Non-finite points are noise.
inline std::vector<std::int32_t> dbscan(const PointCloud& pc, double eps, std::size_t min_points) {
  if (!(eps > 0)) throw ParamError("dbscan eps must be > 0");
  if (min_points < 1) throw ParamError("dbscan min_points must be >= 1");
  const std::size_t n = pc.size();
  std::vector<std::int32_t> ids(n, kNoise);
  if (n == 0) return ids;

  RadiusGrid grid(pc.points, eps);
  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    grid.for_each_neighbor(i, [&](std::size_t) { ++count; });
    core[i] = count >= min_points;
  }

  dbscan_detail::DisjointSet sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    grid.for_each_neighbor(i, [&](std::size_t j) {
      if (j > i && core[j]) sets.unite(i, j);
    });
  }

  // Component representative per point (SIZE_MAX = noise).
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> comp(n, kNone);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      comp[i] = sets.find(i);
      continue;
    }
    std::size_t best = kNone;
    grid.for_each_neighbor(i, [&](std::size_t j) {
      if (core[j] && j < best) best = j;
    });
    if (best != kNone) comp[i] = sets.find(best);
  }

  // Scanning in index order assigns ids by first member.
  std::unordered_map<std::size_t, std::int32_t> relabel;
  for (std::size_t i = 0; i < n; ++i) {
    if (comp[i] == kNone) continue;
    auto [it, inserted] = relabel.emplace(comp[i], static_cast<std::int32_t>(relabel.size()));
    ids[i] = it->second;
  }
  return ids;
}

}  // namespace liguard::algo
