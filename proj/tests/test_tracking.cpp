#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "liguard/algo/tracking.hpp"

using namespace liguard;
using namespace liguard::algo;

namespace {

ObjectLabel at(double x, double y, double z = 0) {
  ObjectLabel l;
  l.box3d.center = {x, y, z};
  return l;
}

std::vector<Eigen::Vector3d> sampled(std::size_t n, const std::function<Eigen::Vector3d(double)>& f) {
  std::vector<Eigen::Vector3d> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(f(static_cast<double>(k)));
  return out;
}

/// Second derivatives of the natural spline through y at unit spacing, from
/// the full dense system.
Eigen::VectorXd dense_natural_moments(const std::vector<double>& y) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  a(0, 0) = 1;
  a(n - 1, n - 1) = 1;
  for (Eigen::Index k = 1; k + 1 < n; ++k) {
    a(k, k - 1) = 1;
    a(k, k) = 4;
    a(k, k + 1) = 1;
    b(k) = 6 * (y[k + 1] - 2 * y[k] + y[k - 1]);
  }
  return a.fullPivLu().solve(b);
}

}  // namespace

TEST(KdTree, RadiusSearchMatchesBruteForce) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-20, 20);
  std::vector<Eigen::Vector3d> pts(500);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  const KdTree tree(pts);
  for (int q = 0; q < 100; ++q) {
    const Eigen::Vector3d c(u(rng), u(rng), u(rng));
    const double r = 1 + std::abs(u(rng)) / 4;
    std::set<std::size_t> expected;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if ((pts[i] - c).norm() <= r) expected.insert(i);
    }
    const auto got = tree.radius_search(c, r);
    EXPECT_EQ(std::set<std::size_t>(got.begin(), got.end()), expected);
    EXPECT_EQ(got.size(), expected.size());
  }
  EXPECT_TRUE(KdTree({}).radius_search({0, 0, 0}, 5).empty());
}

TEST(Tracker, FirstFrameFreshIds) {
  TrackState st;
  const auto out = kdtree_past_trajectory({at(0, 0), at(10, 0)}, st, 2, 5);
  EXPECT_EQ(out[0].track_id, 0);
  EXPECT_EQ(out[1].track_id, 1);
  EXPECT_EQ(out[0].past_trajectory.size(), 1u);
}

TEST(Tracker, SingleIdOverTenFrames) {
  for (std::size_t max_history : {4u, 10u, 20u}) {
    TrackState st;
    std::vector<ObjectLabel> out;
    for (int f = 0; f < 10; ++f) out = kdtree_past_trajectory({at(0.5 * f, 1)}, st, 2, max_history);
    EXPECT_EQ(out[0].track_id, 0);
    EXPECT_EQ(out[0].past_trajectory.size(), std::min<std::size_t>(10, max_history));
    for (std::size_t k = 1; k < out[0].past_trajectory.size(); ++k) {
      EXPECT_NEAR(out[0].past_trajectory[k].x() - out[0].past_trajectory[k - 1].x(), 0.5, 1e-12);
    }
  }
}

TEST(Tracker, CrossingObjectsKeepIds) {
  TrackState st;
  std::int64_t a_id = -1, b_id = -1;
  for (int f = 0; f < 12; ++f) {
    const double t = f;
    const auto out = kdtree_past_trajectory({at(t, 0.2 * t - 1.2), at(12 - t, 1.2 - 0.2 * t, 0.5)}, st, 1.5, 50);
    if (f == 0) {
      a_id = *out[0].track_id;
      b_id = *out[1].track_id;
    }
    EXPECT_EQ(out[0].track_id, a_id);
    EXPECT_EQ(out[1].track_id, b_id);
    EXPECT_NE(*out[0].track_id, *out[1].track_id);
  }
}

TEST(Tracker, OutOfRadiusStartsNewTrack) {
  TrackState st;
  kdtree_past_trajectory({at(0, 0)}, st, 2, 5);
  const auto out = kdtree_past_trajectory({at(5, 0)}, st, 2, 5);
  EXPECT_EQ(out[0].track_id, 1);
  EXPECT_EQ(st.history.size(), 1u);
}

TEST(Spline, LinearContinues) {
  const auto past = sampled(6, [](double t) { return Eigen::Vector3d(1 + 2 * t, -t, 0.5); });
  const auto fut = *spline_future(past, 4, 0.1, 0.1);
  for (std::size_t j = 0; j < 4; ++j) {
    const double t = 6 + static_cast<double>(j);
    EXPECT_NEAR((fut[j] - Eigen::Vector3d(1 + 2 * t, -t, 0.5)).norm(), 0, 1e-6);
  }
  const auto half = *spline_future(past, 2, 0.05, 0.1);
  EXPECT_NEAR(half[0].x(), 1 + 2 * 5.5, 1e-6);
}

TEST(Spline, MatchesDenseSolve) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3, 3);
  for (std::size_t n : {3u, 4u, 7u, 15u}) {
    std::vector<double> y(n);
    for (auto& v : y) v = u(rng);
    const NaturalCubicSpline s(y);
    const Eigen::VectorXd m = dense_natural_moments(y);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(s.second_derivatives()[k], m(static_cast<Eigen::Index>(k)), 1e-12);
      EXPECT_NEAR(s(static_cast<double>(k)), y[k], 1e-12);
    }
  }
}

TEST(Spline, ExtrapolationIsFinalSegmentCubic) {
  const auto past = sampled(5, [](double t) { return Eigen::Vector3d(t * t * t, t, 0); });
  const auto fut = *spline_future(past, 3, 1, 1);
  std::vector<double> xs;
  for (const auto& p : past) xs.push_back(p.x());
  const NaturalCubicSpline s(xs);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(fut[j].x(), s.eval_segment(3, 5.0 + j));
}

TEST(Spline, ShortHistoryRejected) {
  EXPECT_FALSE(spline_future(sampled(3, [](double t) { return Eigen::Vector3d(t, 0, 0); }), 2, 1, 1));
}

TEST(Polyfit, ExactOnPolynomials) {
  const auto line = sampled(5, [](double t) { return Eigen::Vector3d(3 - t, 2 * t, 7); });
  const auto f1 = *polyfit_future(line, 1, 3);
  for (std::size_t j = 0; j < 3; ++j) {
    const double t = 5.0 + j;
    EXPECT_NEAR((f1[j] - Eigen::Vector3d(3 - t, 2 * t, 7)).norm(), 0, 1e-9);
  }
  auto quad = [](double t) { return Eigen::Vector3d(0.5 * t * t - t + 2, -0.25 * t * t, t); };
  const auto f2 = *polyfit_future(sampled(8, quad), 2, 4);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR((f2[j] - quad(8.0 + j)).norm(), 0, 1e-9);
}

TEST(Polyfit, Underdetermined) {
  EXPECT_FALSE(polyfit_future(sampled(3, [](double t) { return Eigen::Vector3d(t, 0, 0); }), 3, 2));
}

TEST(Velocity, Examples) {
  EXPECT_EQ(*velocity_from_trajectory({{0, 0, 0}, {1, 0, 0}}, 10), Eigen::Vector3d(10, 0, 0));
  EXPECT_EQ(*velocity_from_trajectory({{2, 2, 2}, {2, 2, 2}, {2, 2, 2}}, 10), Eigen::Vector3d::Zero());
  EXPECT_FALSE(velocity_from_trajectory({{1, 2, 3}}, 10));
}

TEST(Velocity, CircularMotionChordBound) {
  const double r = 5, omega = 0.8, fps = 10;
  const auto past = sampled(20, [&](double k) {
    const double t = k / fps;
    return Eigen::Vector3d(r * std::cos(omega * t), r * std::sin(omega * t), 0);
  });
  const double speed = velocity_from_trajectory(past, fps)->norm();
  EXPECT_NEAR(speed, 2 * r * std::sin(omega / (2 * fps)) * fps, 1e-9);
  EXPECT_LE(speed, r * omega);
  EXPECT_NEAR(speed, r * omega, r * omega * omega * omega / (24 * fps * fps) + 1e-12);
}
