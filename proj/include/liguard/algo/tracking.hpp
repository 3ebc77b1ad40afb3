#pragma once

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <tuple>
#include <vector>

#include "liguard/core/types.hpp"

namespace liguard::algo {

// ---------------------------------------------------------------------------
// Spatial index
// ---------------------------------------------------------------------------

/// Static 3D kd-tree over a fixed point set, answering radius queries.
class KdTree {
 public:
  explicit KdTree(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    build(0, order_.size(), 0);
  }

  /// Indices of all points within `radius` of `q` (inclusive), unordered.
  std::vector<std::size_t> radius_search(const Eigen::Vector3d& q, double radius) const {
    std::vector<std::size_t> out;
    search(0, order_.size(), 0, q, radius * radius, out);
    return out;
  }

  std::size_t size() const { return points_.size(); }
  const Eigen::Vector3d& point(std::size_t i) const { return points_[i]; }

 private:
  // Subtree [lo, hi) is stored with its median at mid = (lo + hi) / 2.
  void build(std::size_t lo, std::size_t hi, int axis) {
    if (hi - lo <= 1) return;
    const std::size_t mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(hi),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
  }

  void search(std::size_t lo, std::size_t hi, int axis, const Eigen::Vector3d& q, double r2,
              std::vector<std::size_t>& out) const {
    if (lo >= hi) return;
    const std::size_t mid = (lo + hi) / 2;
    const std::size_t idx = order_[mid];
    const Eigen::Vector3d& p = points_[idx];
    if ((p - q).squaredNorm() <= r2) out.push_back(idx);
    const double diff = q[axis] - p[axis];
    const int next = (axis + 1) % 3;
    if (diff <= 0 || diff * diff <= r2) search(lo, mid, next, q, r2, out);
    if (diff >= 0 || diff * diff <= r2) search(mid + 1, hi, next, q, r2, out);
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::size_t> order_;
};

// ---------------------------------------------------------------------------
// Past trajectories
// ---------------------------------------------------------------------------

/// Tracks alive after the previous frame, keyed by id.
struct TrackState {
  std::map<std::int64_t, std::vector<Eigen::Vector3d>> history;
  std::int64_t next_id = 0;
  std::optional<std::size_t> last_frame;

  void reset() {
    history.clear();
    last_frame.reset();
  }
};

/// Links current labels to previous-frame tracks by nearest center.
///
/// Candidate pairs within `match_radius` are taken greedily by ascending
/// distance, one-to-one. Matched labels inherit the id and extend the
/// track's history (truncated to `max_history`); unmatched labels start new
/// tracks. Tracks without a match end.
inline std::vector<ObjectLabel> kdtree_past_trajectory(std::vector<ObjectLabel> labels,
                                                       TrackState& state, double match_radius,
                                                       std::size_t max_history) {
  max_history = std::max<std::size_t>(1, max_history);
  std::vector<std::int64_t> prev_ids;
  std::vector<Eigen::Vector3d> prev_centers;
  for (const auto& [id, traj] : state.history) {
    prev_ids.push_back(id);
    prev_centers.push_back(traj.back());
  }
  KdTree tree(prev_centers);

  struct Pair {
    double dist;
    std::size_t label;
    std::size_t prev;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& c = labels[i].box3d.center;
    for (std::size_t j : tree.radius_search(c, match_radius)) {
      pairs.push_back({(tree.point(j) - c).norm(), i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.dist, a.label, a.prev) < std::tie(b.dist, b.label, b.prev);
  });

  std::vector<std::optional<std::size_t>> match(labels.size());
  std::vector<bool> prev_used(prev_ids.size(), false);
  for (const auto& p : pairs) {
    if (match[p.label] || prev_used[p.prev]) continue;
    match[p.label] = p.prev;
    prev_used[p.prev] = true;
  }

  std::map<std::int64_t, std::vector<Eigen::Vector3d>> next_history;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& l = labels[i];
    std::vector<Eigen::Vector3d> traj;
    std::int64_t id;
    if (match[i]) {
      id = prev_ids[*match[i]];
      traj = state.history[id];
    } else {
      id = state.next_id++;
    }
    traj.push_back(l.box3d.center);
    if (traj.size() > max_history) {
      traj.erase(traj.begin(), traj.end() - static_cast<std::ptrdiff_t>(max_history));
    }
    l.track_id = id;
    l.past_trajectory = traj;
    next_history[id] = std::move(traj);
  }
  state.history = std::move(next_history);
  return labels;
}

// ---------------------------------------------------------------------------
// Future trajectories
// ---------------------------------------------------------------------------

/// Natural cubic spline through samples y_k at t = k (unit spacing).
class NaturalCubicSpline {
 public:
  explicit NaturalCubicSpline(std::vector<double> y) : y_(std::move(y)) {
    const std::size_t n = y_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    // Thomas algorithm on M[k-1] + 4 M[k] + M[k+1] = 6 (y[k+1] - 2 y[k] + y[k-1]).
    const std::size_t inner = n - 2;
    std::vector<double> c(inner), d(inner);
    for (std::size_t k = 0; k < inner; ++k) {
      const double rhs = 6.0 * (y_[k + 2] - 2.0 * y_[k + 1] + y_[k]);
      const double denom = 4.0 - (k ? c[k - 1] : 0.0);
      c[k] = 1.0 / denom;
      d[k] = (rhs - (k ? d[k - 1] : 0.0)) / denom;
    }
    for (std::size_t k = inner; k-- > 0;) {
      m_[k + 1] = d[k] - c[k] * (k + 1 < inner ? m_[k + 2] : 0.0);
    }
  }

  /// Evaluates the segment containing t; t beyond the ends extends the
  /// first or last segment's cubic.
  double operator()(double t) const {
    const std::size_t n = y_.size();
    if (n == 1) return y_[0];
    const double last = static_cast<double>(n - 2);
    const std::size_t seg = t <= 0 ? 0 : t >= last ? n - 2 : static_cast<std::size_t>(std::floor(t));
    return eval_segment(seg, t);
  }

  double eval_segment(std::size_t i, double t) const {
    const double a = static_cast<double>(i + 1) - t;
    const double b = t - static_cast<double>(i);
    return m_[i] * a * a * a / 6.0 + m_[i + 1] * b * b * b / 6.0 + (y_[i] - m_[i] / 6.0) * a +
           (y_[i + 1] - m_[i + 1] / 6.0) * b;
  }

  const std::vector<double>& second_derivatives() const { return m_; }

 private:
  std::vector<double> y_;
  std::vector<double> m_;
};

inline constexpr std::size_t kMinSplineHistory = 4;

/// Future points from the final spline segment, or nullopt when the history
/// is shorter than kMinSplineHistory. Step j (1-based) lands at sample index
/// (n - 1) + j * dt / dt_hist.
inline std::optional<std::vector<Eigen::Vector3d>> spline_future(
    const std::vector<Eigen::Vector3d>& past, std::size_t k_future, double dt, double dt_hist) {
  const std::size_t n = past.size();
  if (n < kMinSplineHistory) return std::nullopt;
  std::array<std::unique_ptr<NaturalCubicSpline>, 3> splines;
  for (int a = 0; a < 3; ++a) {
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) y[k] = past[k][a];
    splines[a] = std::make_unique<NaturalCubicSpline>(std::move(y));
  }
  std::vector<Eigen::Vector3d> out;
  const double step = dt_hist > 0 ? dt / dt_hist : 1.0;
  for (std::size_t j = 1; j <= k_future; ++j) {
    const double t = static_cast<double>(n - 1) + static_cast<double>(j) * step;
    out.emplace_back(splines[0]->eval_segment(n - 2, t), splines[1]->eval_segment(n - 2, t),
                     splines[2]->eval_segment(n - 2, t));
  }
  return out;
}

/// Least-squares polynomial per coordinate against sample index, evaluated
/// at the next k_future indices. nullopt when underdetermined or rank
/// deficient.
inline std::optional<std::vector<Eigen::Vector3d>> polyfit_future(
    const std::vector<Eigen::Vector3d>& past, std::size_t degree, std::size_t k_future) {
  const std::size_t n = past.size();
  if (n < degree + 1) return std::nullopt;
  // Map indices onto [-1, 1] to keep the Vandermonde system well conditioned.
  const double center = static_cast<double>(n - 1) / 2.0;
  const double scale = n > 1 ? center : 1.0;
  auto norm_t = [&](double t) { return (t - center) / scale; };

  Eigen::MatrixXd a(n, degree + 1);
  for (std::size_t i = 0; i < n; ++i) {
    double pw = 1.0;
    const double t = norm_t(static_cast<double>(i));
    for (std::size_t d = 0; d <= degree; ++d) {
      a(i, d) = pw;
      pw *= t;
    }
  }
  Eigen::MatrixXd y(n, 3);
  for (std::size_t i = 0; i < n; ++i) y.row(i) = past[i].transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < static_cast<Eigen::Index>(degree + 1)) return std::nullopt;
  const Eigen::MatrixXd coeffs = qr.solve(y);

  std::vector<Eigen::Vector3d> out;
  for (std::size_t j = 0; j < k_future; ++j) {
    const double t = norm_t(static_cast<double>(n + j));
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    double pw = 1.0;
    for (std::size_t d = 0; d <= degree; ++d) {
      v += coeffs.row(d).transpose() * pw;
      pw *= t;
    }
    out.push_back(v);
  }
  return out;
}

/// (p_last - p_prev) * fps, or nullopt with fewer than two samples.
inline std::optional<Eigen::Vector3d> velocity_from_trajectory(const std::vector<Eigen::Vector3d>& past,
                                                               double fps) {
  if (past.size() < 2) return std::nullopt;
  return (past[past.size() - 1] - past[past.size() - 2]) * fps;
}

}  // namespace liguard::algo
