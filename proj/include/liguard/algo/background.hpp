#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "liguard/algo/point_ops.hpp"
#include "liguard/core/error.hpp"
#include "liguard/core/types.hpp"

namespace liguard::algo {

struct VoxelKey {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

using VoxelSet = std::unordered_set<VoxelKey, VoxelKeyHash>;

inline VoxelKey voxel_key(const PointXYZI& p, double voxel_size) {
  return {static_cast<std::int64_t>(std::floor(p.x / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.y / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.z / voxel_size))};
}

inline bool finite_xyz(const PointXYZI& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

// ---------------------------------------------------------------------------
// Spatio-temporal density filter
// ---------------------------------------------------------------------------

struct StdfParams {
  double voxel_size = 0.5;
  /// Frames gathered per round.
  std::size_t n = 1;
  /// Frames skipped after each gather.
  std::size_t m_skip = 0;
  /// Gather/skip rounds.
  std::size_t r = 1;
  double threshold = 0.5;
};

/// Learned voxel occupancy; keys with occupancy >= threshold are background.
struct StdfFilter {
  double voxel_size = 0.5;
  double threshold = 0.5;
  std::size_t frames_sampled = 0;
  std::unordered_map<VoxelKey, double, VoxelKeyHash> occupancy;
  VoxelSet background;
};

/// Frame indices visited by r rounds of "take n, skip m_skip", clipped to total.
inline std::vector<std::size_t> stdf_sample_indices(std::size_t total, const StdfParams& p) {
  std::vector<std::size_t> out;
  std::size_t cursor = 0;
  for (std::size_t round = 0; round < p.r; ++round) {
    for (std::size_t k = 0; k < p.n && cursor < total; ++k) out.push_back(cursor++);
    cursor += p.m_skip;
  }
  return out;
}

inline void check_stdf_params(const StdfParams& p) {
  if (!(p.voxel_size > 0)) throw ParamError("STDF voxel_size must be > 0");
  if (p.n * p.r < 1) throw ParamError("STDF needs n * r >= 1");
  if (!(p.threshold > 0 && p.threshold <= 1)) {
    throw ParamError("STDF threshold must be in (0, 1]");
  }
}

struct StdfBuild {
  StdfFilter filter;
  /// Set when the dataset had fewer frames than the schedule asked for.
  std::optional<std::string> warning;
};

/// Builds the filter from `total` frames fetched lazily through `frame_at`.
inline StdfBuild stdf_build(std::size_t total,
                            const std::function<PointCloud(std::size_t)>& frame_at,
                            const StdfParams& params) {
  check_stdf_params(params);
  StdfBuild out;
  const auto indices = stdf_sample_indices(total, params);
  if (indices.size() < params.n * params.r) {
    out.warning = "STDF schedule wants " + std::to_string(params.n * params.r) +
                  " frames, built from " + std::to_string(indices.size());
  }
  auto& f = out.filter;
  f.voxel_size = params.voxel_size;
  f.threshold = params.threshold;
  f.frames_sampled = indices.size();

  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> counts;
  for (std::size_t idx : indices) {
    const PointCloud pc = frame_at(idx);
    VoxelSet seen;
    for (const auto& p : pc.points) {
      if (finite_xyz(p)) seen.insert(voxel_key(p, params.voxel_size));
    }
    for (const auto& k : seen) ++counts[k];
  }
  if (f.frames_sampled == 0) return out;
  const double denom = static_cast<double>(f.frames_sampled);
  for (const auto& [k, c] : counts) {
    const double occ = static_cast<double>(c) / denom;
    f.occupancy.emplace(k, occ);
    if (occ >= params.threshold) f.background.insert(k);
  }
  return out;
}

inline StdfBuild stdf_build(const std::vector<PointCloud>& frames, const StdfParams& params) {
  return stdf_build(frames.size(), [&](std::size_t i) { return frames[i]; }, params);
}

inline KeepMask stdf_mask(const StdfFilter& filter, const PointCloud& pc) {
  KeepMask keep(pc.size(), true);
  if (filter.background.empty()) return keep;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto& p = pc.points[i];
    if (finite_xyz(p) && filter.background.count(voxel_key(p, filter.voxel_size))) {
      keep[i] = false;
    }
  }
  return keep;
}

/// Foreground points only, order preserved.
inline PointCloud stdf_apply(const StdfFilter& filter, const PointCloud& pc) {
  return select(pc, stdf_mask(filter, pc));
}

// ---------------------------------------------------------------------------
// Dynamic histogram per point
// ---------------------------------------------------------------------------

/// Per-beam range histograms of an organized, fixed-geometry sensor.
struct DHistFilter {
  double bin_width = 0.5;
  double max_range = 200.0;
  std::size_t point_count = 0;
  std::size_t frames_seen = 0;
  /// histograms[i][b]: frames where point i's range fell in bin b.
  std::vector<std::vector<std::uint32_t>> histograms;
  /// Center of point i's modal bin; NaN when never observed.
  std::vector<double> background_range;
};

inline double point_range(const PointXYZI& p) {
  return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
}

inline DHistFilter dhistdpp_build(const std::vector<PointCloud>& frames, double bin_width,
                                  double max_range) {
  if (!(bin_width > 0)) throw ParamError("DHistDPP bin_width must be > 0");
  if (!(max_range > 0)) throw ParamError("DHistDPP max_range must be > 0");
  if (frames.empty()) throw ParamError("DHistDPP needs at least one frame");
  DHistFilter f;
  f.bin_width = bin_width;
  f.max_range = max_range;
  f.point_count = frames.front().size();
  const auto bins = static_cast<std::size_t>(std::ceil(max_range / bin_width));
  f.histograms.assign(f.point_count, std::vector<std::uint32_t>(bins, 0));
  for (const auto& pc : frames) {
    if (!pc.organized) throw ParamError("DHistDPP build input must be organized");
    if (pc.size() != f.point_count) {
      throw ParamError("DHistDPP build frames differ in point count (" +
                       std::to_string(pc.size()) + " vs " + std::to_string(f.point_count) + ")");
    }
    for (std::size_t i = 0; i < pc.size(); ++i) {
      const double r = point_range(pc.points[i]);
      if (!std::isfinite(r) || r >= max_range) continue;
      const auto b = std::min(bins - 1, static_cast<std::size_t>(r / bin_width));
      ++f.histograms[i][b];
    }
    ++f.frames_seen;
  }
  f.background_range.assign(f.point_count, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < f.point_count; ++i) {
    const auto& h = f.histograms[i];
    // First maximum wins ties, so the nearer bin is preferred.
    auto it = std::max_element(h.begin(), h.end());
    if (it != h.end() && *it > 0) {
      f.background_range[i] = (static_cast<double>(it - h.begin()) + 0.5) * bin_width;
    }
  }
  return f;
}

inline KeepMask dhistdpp_mask(const DHistFilter& filter, const PointCloud& pc, double tolerance) {
  if (pc.size() != filter.point_count) {
    throw ParamError("DHistDPP filter built for " + std::to_string(filter.point_count) +
                     " points, cloud has " + std::to_string(pc.size()));
  }
  KeepMask keep(pc.size(), true);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const double b = filter.background_range[i];
    if (std::isnan(b)) continue;
    if (std::abs(point_range(pc.points[i]) - b) <= tolerance) keep[i] = false;
  }
  return keep;
}

inline PointCloud dhistdpp_apply(const DHistFilter& filter, const PointCloud& pc,
                                 double tolerance) {
  return select(pc, dhistdpp_mask(filter, pc, tolerance));
}

}  // namespace liguard::algo
