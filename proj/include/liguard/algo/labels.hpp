#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <tuple>
#include <vector>

#include "liguard/algo/point_ops.hpp"
#include "liguard/core/types.hpp"

namespace liguard::algo {

/// Keeps labels whose box center lies inside the inclusive bounds.
inline std::vector<ObjectLabel> remove_out_of_bound_labels(const std::vector<ObjectLabel>& labels,
                                                           const Eigen::Vector3d& min,
                                                           const Eigen::Vector3d& max) {
  check_bounds(min, max);
  std::vector<ObjectLabel> out;
  for (const auto& l : labels) {
    const auto& c = l.box3d.center;
    if ((c.array() >= min.array()).all() && (c.array() <= max.array()).all()) out.push_back(l);
  }
  return out;
}

inline std::size_t count_points_in_box(const Box3D& box, const PointCloud& pc) {
  std::size_t n = 0;
  for (const auto& p : pc.points) {
    if (box.contains(p.position())) ++n;
  }
  return n;
}

inline std::vector<ObjectLabel> remove_less_point_labels(const std::vector<ObjectLabel>& labels,
                                                         const PointCloud& pc,
                                                         std::size_t min_points) {
  std::vector<ObjectLabel> out;
  for (const auto& l : labels) {
    if (min_points == 0 || count_points_in_box(l.box3d, pc) >= min_points) out.push_back(l);
  }
  return out;
}

inline Box2D enclosing_box(const Box2D& a, const Box2D& b) {
  return {std::min(a.xmin, b.xmin), std::min(a.ymin, b.ymin), std::max(a.xmax, b.xmax),
          std::max(a.ymax, b.ymax)};
}

/// Greedy cross-modality merge of 2D boxes.
///
/// Pairs (a, b) with IoU >= threshold are matched in descending IoU order,
/// each label at most once. A matched pair becomes one "fused" label at the
/// position of its `a` member; matched `b` labels disappear; everything else
/// passes through unchanged.
inline std::vector<ObjectLabel> fuse_2d_bboxes(const std::vector<ObjectLabel>& labels,
                                               const std::string& modality_a,
                                               const std::string& modality_b,
                                               double iou_threshold) {
  struct Candidate {
    double iou;
    std::size_t a;
    std::size_t b;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].source != modality_a || !labels[i].box2d) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (j == i || labels[j].source != modality_b || !labels[j].box2d) continue;
      const double v = iou(*labels[i].box2d, *labels[j].box2d);
      if (v >= iou_threshold) candidates.push_back({v, i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    return std::tie(y.iou, x.a, x.b) < std::tie(x.iou, y.a, y.b);
  });

  std::vector<std::ptrdiff_t> partner(labels.size(), -1);
  std::vector<bool> used(labels.size(), false);
  for (const auto& c : candidates) {
    if (used[c.a] || used[c.b]) continue;
    used[c.a] = used[c.b] = true;
    partner[c.a] = static_cast<std::ptrdiff_t>(c.b);
  }

  std::vector<ObjectLabel> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (used[i] && partner[i] < 0) continue;  // consumed b side
    if (partner[i] < 0) {
      out.push_back(labels[i]);
      continue;
    }
    const auto& a = labels[i];
    const auto& b = labels[static_cast<std::size_t>(partner[i])];
    ObjectLabel fused = a;
    fused.box2d = enclosing_box(*a.box2d, *b.box2d);
    fused.class_name = a.class_name == "Unknown" ? b.class_name : a.class_name;
    fused.source = "fused";
    out.push_back(std::move(fused));
  }
  return out;
}

}  // namespace liguard::algo
