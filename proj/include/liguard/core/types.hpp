#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "liguard/core/error.hpp"

namespace liguard {

/// One lidar return. Coordinates in meters, intensity normalized to [0,1].
/// Stored in double; file formats narrow to float32 at the boundary.
struct PointXYZI {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  bool operator==(const PointXYZI&) const = default;

  Eigen::Vector3d position() const { return {x, y, z}; }
};

/// Per-point color, each channel in [0,1].
struct ColorRGB {
  float r = 0.0f;
  float g = 0.0f;
  float b = 0.0f;

  bool operator==(const ColorRGB&) const = default;
};

struct OrganizedDims {
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  bool operator==(const OrganizedDims&) const = default;
};

/// A single lidar sweep.
///
/// `colors`, when set, is aligned 1:1 with `points`. `organized`, when set,
/// satisfies width * height == points.size().
struct PointCloud {
  std::vector<PointXYZI> points;
  std::optional<std::vector<ColorRGB>> colors;
  std::optional<OrganizedDims> organized;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  bool operator==(const PointCloud&) const = default;

  /// Throws SlotError when an invariant is broken.
  void validate() const {
    if (colors && colors->size() != points.size()) {
      throw SlotError("point cloud colors (" + std::to_string(colors->size()) +
                      ") not aligned with points (" +
                      std::to_string(points.size()) + ")");
    }
    if (organized && static_cast<std::size_t>(organized->width) *
                             organized->height !=
                         points.size()) {
      throw SlotError("organized dims " + std::to_string(organized->width) +
                      "x" + std::to_string(organized->height) +
                      " do not match point count " +
                      std::to_string(points.size()));
    }
  }
};

/// Row-major 8-bit RGB raster.
struct ImageRaster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> data;

  ImageRaster() = default;
  ImageRaster(std::uint32_t w, std::uint32_t h)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool operator==(const ImageRaster&) const = default;

  std::uint8_t* pixel(std::uint32_t x, std::uint32_t y) {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* pixel(std::uint32_t x, std::uint32_t y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  void validate() const {
    if (data.size() != static_cast<std::size_t>(width) * height * 3) {
      throw SlotError("image data length does not match width*height*3");
    }
  }
};

using Matrix34 = Eigen::Matrix<double, 3, 4, Eigen::RowMajor>;
using Matrix33 = Eigen::Matrix<double, 3, 3, Eigen::RowMajor>;

inline double orthonormality_error(const Eigen::Matrix3d& r) {
  return (r * r.transpose() - Eigen::Matrix3d::Identity())
      .cwiseAbs()
      .maxCoeff();
}

/// KITTI-style calibration chain: pixel ~ P2 * R0_rect * Tr_velo_to_cam * p.
struct Calibration {
  static constexpr double kOrthoTolerance = 1e-3;

  Matrix34 tr_velo_to_cam = Matrix34::Identity();
  Matrix33 r0_rect = Matrix33::Identity();
  Matrix34 p2 = Matrix34::Identity();

  bool operator==(const Calibration& o) const {
    return tr_velo_to_cam == o.tr_velo_to_cam && r0_rect == o.r0_rect &&
           p2 == o.p2;
  }

  void validate() const {
    if (orthonormality_error(r0_rect) > kOrthoTolerance) {
      throw SlotError("R0_rect is not orthonormal within 1e-3");
    }
    if (orthonormality_error(tr_velo_to_cam.leftCols<3>()) > kOrthoTolerance) {
      throw SlotError("Tr_velo_to_cam rotation is not orthonormal within 1e-3");
    }
  }

  /// Homogeneous 4x4 lidar -> rectified camera transform.
  Eigen::Matrix4d lidar_to_rect() const {
    Eigen::Matrix4d tr = Eigen::Matrix4d::Identity();
    tr.topRows<3>() = tr_velo_to_cam;
    Eigen::Matrix4d r0 = Eigen::Matrix4d::Identity();
    r0.topLeftCorner<3, 3>() = r0_rect;
    return r0 * tr;
  }

  /// Homogeneous projection (u*w, v*w, w) of a lidar point.
  Eigen::Vector3d project(const Eigen::Vector3d& p) const {
    Eigen::Vector4d cam = lidar_to_rect() * p.homogeneous();
    return p2 * cam;
  }
};

struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  /// (length, width, height) along the box's local x, y, z.
  Eigen::Vector3d extent = Eigen::Vector3d::Ones();
  /// Rotation about +z, radians.
  double yaw = 0.0;

  bool operator==(const Box3D& o) const {
    return center == o.center && extent == o.extent && yaw == o.yaw;
  }

  /// Point expressed in the box frame (origin at center, x along length).
  Eigen::Vector3d to_local(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d d = p - center;
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    return {c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()};
  }

  bool contains(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d local = to_local(p);
    return std::abs(local.x()) <= extent.x() / 2 &&
           std::abs(local.y()) <= extent.y() / 2 &&
           std::abs(local.z()) <= extent.z() / 2;
  }

  std::array<Eigen::Vector3d, 8> corners() const {
    std::array<Eigen::Vector3d, 8> out;
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    std::size_t k = 0;
    for (int sx : {-1, 1}) {
      for (int sy : {-1, 1}) {
        for (int sz : {-1, 1}) {
          const double lx = sx * extent.x() / 2;
          const double ly = sy * extent.y() / 2;
          const double lz = sz * extent.z() / 2;
          out[k++] = center + Eigen::Vector3d(c * lx - s * ly, s * lx + c * ly, lz);
        }
      }
    }
    return out;
  }
};

struct Box2D {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  bool operator==(const Box2D&) const = default;

  double area() const {
    return std::max(0.0, xmax - xmin) * std::max(0.0, ymax - ymin);
  }
};

inline double iou(const Box2D& a, const Box2D& b) {
  const double ix = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double iy = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

/// Object annotation in the lidar frame.
struct ObjectLabel {
  std::string class_name = "Unknown";
  Box3D box3d;
  std::optional<Box2D> box2d;
  std::optional<std::int64_t> track_id;
  std::vector<Eigen::Vector3d> past_trajectory;    // oldest -> newest
  std::vector<Eigen::Vector3d> future_trajectory;  // nearest -> farthest
  std::optional<Eigen::Vector3d> velocity;         // m/s
  std::string source = "ground_truth";

  bool operator==(const ObjectLabel&) const = default;

  void validate() const {
    if (!(box3d.extent.array() > 0).all()) {
      throw SlotError("label '" + class_name + "' has non-positive extent");
    }
    if (box2d && (box2d->xmin > box2d->xmax || box2d->ymin > box2d->ymax)) {
      throw SlotError("label '" + class_name + "' has inverted box2d");
    }
    for (const auto* traj : {&past_trajectory, &future_trajectory}) {
      for (const auto& p : *traj) {
        if (!p.allFinite()) {
          throw SlotError("label '" + class_name + "' trajectory not finite");
        }
      }
    }
  }
};

/// A KITTI label line as stored on disk (camera frame, bottom-center location).
struct RawKittiLabel {
  std::string type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  Box2D bbox;
  double h = 0.0;
  double w = 0.0;
  double l = 0.0;
  Eigen::Vector3d location = Eigen::Vector3d::Zero();
  double rotation_y = 0.0;
  bool dont_care = false;

  bool operator==(const RawKittiLabel&) const = default;
};

enum class LogLevel { debug, info, warning, error };

inline const char* to_string(LogLevel level) {
  switch (level) {
    case LogLevel::debug: return "debug";
    case LogLevel::info: return "info";
    case LogLevel::warning: return "warning";
    case LogLevel::error: return "error";
  }
  return "info";
}

inline LogLevel log_level_from_string(const std::string& s) {
  if (s == "debug") return LogLevel::debug;
  if (s == "info") return LogLevel::info;
  if (s == "warning") return LogLevel::warning;
  if (s == "error") return LogLevel::error;
  throw ConfigError("unknown log level '" + s + "'");
}

struct LogEntry {
  LogLevel level = LogLevel::info;
  std::string source;
  std::string message;

  bool operator==(const LogEntry&) const = default;
};

constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2 * kPi);
  if (a <= -kPi) a += 2 * kPi;
  if (a > kPi) a -= 2 * kPi;
  return a;
}

}  // namespace liguard
