#pragma once

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "liguard/core/error.hpp"
#include "liguard/core/types.hpp"

namespace liguard::algo {

/// Pixel hit by a lidar point, or nullopt when behind the camera or off-raster.
struct PixelHit {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  double depth = 0.0;
};

inline std::optional<PixelHit> project_to_pixel(const Calibration& calib, const Eigen::Vector3d& p,
                                                std::uint32_t width, std::uint32_t height) {
  const Eigen::Vector3d h = calib.project(p);
  if (!(h.z() > 0)) return std::nullopt;
  const double u = h.x() / h.z();
  const double v = h.y() / h.z();
  if (!(u >= 0 && v >= 0 && u < width && v < height)) return std::nullopt;
  return PixelHit{static_cast<std::uint32_t>(std::floor(u)),
                  static_cast<std::uint32_t>(std::floor(v)), h.z()};
}

/// Colors every point with the pixel it projects onto; unseen points are black.
inline PointCloud colorize_points_from_image(const PointCloud& pc, const ImageRaster& img,
                                             const Calibration& calib) {
  PointCloud out = pc;
  out.colors.emplace(pc.size(), ColorRGB{});
  for (std::size_t i = 0; i < pc.size(); ++i) {
    auto hit = project_to_pixel(calib, pc.points[i].position(), img.width, img.height);
    if (!hit) continue;
    const std::uint8_t* px = img.pixel(hit->x, hit->y);
    (*out.colors)[i] = {px[0] / 255.0f, px[1] / 255.0f, px[2] / 255.0f};
  }
  return out;
}

/// Near (depth 0) is red, depth >= max_depth is blue, linear in between.
inline std::array<std::uint8_t, 3> depth_color(double depth, double max_depth) {
  const double t = std::clamp(max_depth > 0 ? depth / max_depth : 1.0, 0.0, 1.0);
  return {static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t))), 0,
          static_cast<std::uint8_t>(std::lround(255.0 * t))};
}

/// Draws visible points as depth-colored squares onto a copy of `img`.
inline ImageRaster project_points_to_image(const ImageRaster& img, const PointCloud& pc,
                                           const Calibration& calib, int point_size,
                                           double max_depth) {
  ImageRaster out = img;
  const int size = std::max(1, point_size);
  const int lo = -(size - 1) / 2;
  const int hi = size / 2;
  for (const auto& p : pc.points) {
    auto hit = project_to_pixel(calib, p.position(), img.width, img.height);
    if (!hit) continue;
    const auto color = depth_color(hit->depth, max_depth);
    for (int dy = lo; dy <= hi; ++dy) {
      for (int dx = lo; dx <= hi; ++dx) {
        const std::int64_t x = static_cast<std::int64_t>(hit->x) + dx;
        const std::int64_t y = static_cast<std::int64_t>(hit->y) + dy;
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
        std::uint8_t* px = out.pixel(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
        px[0] = color[0];
        px[1] = color[1];
        px[2] = color[2];
      }
    }
  }
  return out;
}

/// Image-plane bounds of a 3D box, clipped to [0,w]x[0,h]. Corners behind the
/// camera are ignored; nullopt when all are.
inline std::optional<Box2D> project_box(const Box3D& box, const Calibration& calib,
                                        std::uint32_t width, std::uint32_t height) {
  bool any = false;
  Box2D out{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& c : box.corners()) {
    const Eigen::Vector3d h = calib.project(c);
    if (!(h.z() > 0)) continue;
    any = true;
    const double u = h.x() / h.z();
    const double v = h.y() / h.z();
    out.xmin = std::min(out.xmin, u);
    out.ymin = std::min(out.ymin, v);
    out.xmax = std::max(out.xmax, u);
    out.ymax = std::max(out.ymax, v);
  }
  if (!any) return std::nullopt;
  const double w = width, hgt = height;
  out.xmin = std::clamp(out.xmin, 0.0, w);
  out.xmax = std::clamp(out.xmax, 0.0, w);
  out.ymin = std::clamp(out.ymin, 0.0, hgt);
  out.ymax = std::clamp(out.ymax, 0.0, hgt);
  return out;
}

inline std::vector<ObjectLabel> gen_bbox_2d(std::vector<ObjectLabel> labels, const Calibration& calib,
                                            std::uint32_t width, std::uint32_t height) {
  for (auto& l : labels) l.box2d = project_box(l.box3d, calib, width, height);
  return labels;
}

inline void check_invertible(const Calibration& calib) {
  const double d_r0 = Eigen::Matrix3d(calib.r0_rect).determinant();
  const double d_tr = Eigen::Matrix3d(calib.tr_velo_to_cam.leftCols<3>()).determinant();
  if (std::abs(d_r0) < 1e-12 || std::abs(d_tr) < 1e-12) {
    throw ParamError("calibration rotation is singular; cannot invert");
  }
}

/// Rectified-camera point -> lidar point.
inline Eigen::Vector3d rect_to_lidar(const Calibration& calib, const Eigen::Vector3d& p) {
  check_invertible(calib);
  const Eigen::Matrix4d inv = calib.lidar_to_rect().inverse();
  return (inv * p.homogeneous()).head<3>();
}

inline Eigen::Vector3d lidar_to_rect(const Calibration& calib, const Eigen::Vector3d& p) {
  return (calib.lidar_to_rect() * p.homogeneous()).head<3>();
}

struct ConvertedLabels {
  std::vector<ObjectLabel> labels;
  std::vector<std::string> skipped;
};

/// KITTI camera-frame labels -> lidar-frame center boxes.
///
/// The bottom-center location is inverted through R0_rect and
/// Tr_velo_to_cam, then lifted by h/2 along lidar +z. (h,w,l) becomes
/// extent (l,w,h) and yaw = -ry - pi/2 wrapped to (-pi, pi]. DontCare rows
/// are dropped.
inline ConvertedLabels convert_labels_camera_to_lidar(const std::vector<RawKittiLabel>& raw,
                                                      const Calibration& calib) {
  check_invertible(calib);
  const Eigen::Matrix4d inv = calib.lidar_to_rect().inverse();
  ConvertedLabels out;
  for (const auto& r : raw) {
    if (r.dont_care) continue;
    if (!(r.h > 0 && r.w > 0 && r.l > 0)) {
      out.skipped.push_back(r.type + ": non-positive dimensions");
      continue;
    }
    ObjectLabel l;
    l.class_name = r.type;
    const Eigen::Vector3d bottom = (inv * r.location.homogeneous()).head<3>();
    l.box3d.center = bottom + Eigen::Vector3d(0, 0, r.h / 2);
    l.box3d.extent = {r.l, r.w, r.h};
    l.box3d.yaw = wrap_angle(-r.rotation_y - kPi / 2);
    if (r.bbox.xmin <= r.bbox.xmax && r.bbox.ymin <= r.bbox.ymax) l.box2d = r.bbox;
    l.source = "ground_truth";
    out.labels.push_back(std::move(l));
  }
  return out;
}

/// Inverse of the location part of convert_labels_camera_to_lidar.
inline Eigen::Vector3d camera_location_from_lidar(const ObjectLabel& label, const Calibration& calib) {
  const Eigen::Vector3d bottom = label.box3d.center - Eigen::Vector3d(0, 0, label.box3d.extent.z() / 2);
  return lidar_to_rect(calib, bottom);
}

/// Inverse of the heading part: ry = -yaw - pi/2 wrapped to (-pi, pi].
inline double camera_rotation_y_from_lidar(double yaw) { return wrap_angle(-yaw - kPi / 2); }

}  // namespace liguard::algo
