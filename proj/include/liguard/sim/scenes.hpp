#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "liguard/core/config.hpp"
#include "liguard/core/types.hpp"
#include "liguard/engine/builtins.hpp"
#include "liguard/engine/pipeline_dir.hpp"
#include "liguard/io/bytes.hpp"
#include "liguard/io/kitti.hpp"
#include "liguard/io/pcd.hpp"

namespace liguard::sim {

namespace fs = std::filesystem;

/// Uniform doubles from mt19937_64 bits; stable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(gen_() >> 11) * 0x1.0p-53); }
  std::uint64_t bits() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Static plane with a short-lived cluster
// ---------------------------------------------------------------------------

struct PlaneScene {
  std::vector<PointCloud> frames;
  /// transient[f][i]: point i of frame f belongs to the transient cluster.
  std::vector<std::vector<bool>> transient;
  std::vector<std::size_t> transient_frames;
};

/// `frames` scans of a 10x10 m plane (plane_points random points each) and a
/// cluster of cluster_points points that is present only in transient_frames.
inline PlaneScene plane_scene(std::uint64_t seed = 1, std::size_t frames = 20, std::size_t plane_points = 5000,
                              std::size_t cluster_points = 200, std::vector<std::size_t> transient_frames = {7, 8}) {
  Rng rng(seed);
  PlaneScene s;
  s.transient_frames = transient_frames;
  for (std::size_t f = 0; f < frames; ++f) {
    PointCloud pc;
    std::vector<bool> flags;
    for (std::size_t i = 0; i < plane_points; ++i) {
      pc.points.push_back({rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0), rng.uniform(0.1, 0.4), 0.3});
      flags.push_back(false);
    }
    if (std::find(transient_frames.begin(), transient_frames.end(), f) != transient_frames.end()) {
      for (std::size_t i = 0; i < cluster_points; ++i) {
        pc.points.push_back({rng.uniform(4.0, 5.0), rng.uniform(4.0, 5.0), rng.uniform(1.0, 2.0), 0.9});
        flags.push_back(true);
      }
    }
    s.frames.push_back(std::move(pc));
    s.transient.push_back(std::move(flags));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Roadside scene
// ---------------------------------------------------------------------------

struct SceneObject {
  std::string class_name;
  Box3D box;
};

struct RoadsideScene {
  std::vector<PointCloud> frames;
  /// Every object present in each frame, including ones outside the crop.
  std::vector<std::vector<SceneObject>> objects;
  Eigen::Vector3d crop_min{-46.0, -25.0, -3.0};
  Eigen::Vector3d crop_max{46.0, 25.0, 5.0};

  bool in_crop(const Box3D& b) const {
    for (const auto& c : b.corners()) {
      if ((c.array() < crop_min.array()).any() || (c.array() > crop_max.array()).any()) return false;
    }
    return true;
  }

  /// Objects a correct crop -> background filter -> cluster -> box chain finds.
  std::size_t expected_count(std::size_t frame) const {
    std::size_t n = 0;
    for (const auto& o : objects.at(frame)) n += in_crop(o.box);
    return n;
  }
};

namespace scene_detail {

struct Track {
  std::string class_name;
  Eigen::Vector3d extent;
  Eigen::Vector2d start;
  Eigen::Vector2d velocity;  // m per frame
  std::size_t first = 0;
  std::size_t last = 0;
};

inline constexpr double kGroundZ = -1.75;
inline constexpr double kObjectBase = -1.45;

/// Jittered grid filling the box volume; spacing <= 0.3 m.
inline void fill_box(const Box3D& box, Rng& rng, std::vector<PointXYZI>& out) {
  const double step = 0.3;
  const int nx = static_cast<int>(std::ceil(box.extent.x() / step));
  const int ny = static_cast<int>(std::ceil(box.extent.y() / step));
  const int nz = static_cast<int>(std::ceil(box.extent.z() / step));
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      for (int k = 0; k <= nz; ++k) {
        const double lx = std::clamp(-box.extent.x() / 2 + i * box.extent.x() / nx + rng.uniform(-0.03, 0.03),
                                     -box.extent.x() / 2, box.extent.x() / 2);
        const double ly = std::clamp(-box.extent.y() / 2 + j * box.extent.y() / ny + rng.uniform(-0.03, 0.03),
                                     -box.extent.y() / 2, box.extent.y() / 2);
        const double lz = std::clamp(-box.extent.z() / 2 + k * box.extent.z() / nz + rng.uniform(-0.03, 0.03),
                                     -box.extent.z() / 2, box.extent.z() / 2);
        out.push_back({box.center.x() + c * lx - s * ly, box.center.y() + s * lx + c * ly, box.center.z() + lz, 0.8});
      }
    }
  }
}

/// Point near the center of a 0.5 m voxel, so static structure stays in the
/// same voxels in every scan.
inline double voxel_center(double v) { return (std::floor(v / 0.5) + 0.5) * 0.5; }

}  // namespace scene_detail

/// Ten scans from a fixed roadside sensor: ground, a wall and a far building
/// that never move, plus road users that move far enough between scans that
/// no voxel holds one of them in more than two scans.
inline RoadsideScene roadside_scene(std::uint64_t seed = 7, std::size_t frames = 10) {
  using namespace scene_detail;
  Rng rng(seed);
  const std::vector<Track> tracks = {
      {"car", {4.4, 1.8, 1.5}, {-30, 5}, {6, 0}, 0, 9},
      {"car", {4.2, 1.7, 1.4}, {30, -5}, {-6, 0}, 2, 9},
      {"bus_truck", {9.0, 2.5, 3.2}, {35, -12}, {-8, 0}, 0, 4},
      {"cyclist", {1.8, 0.6, 1.6}, {-15, 12}, {2, 0}, 3, 9},
      {"pedestrian", {0.6, 0.5, 1.7}, {-5, 16}, {1, 0}, 0, 9},
      {"car", {4.4, 1.8, 1.5}, {55, -20}, {0, 6}, 0, 6},
  };

  std::vector<PointXYZI> statics;
  for (double x = -45.0; x <= 45.0; x += 1.0) {
    for (double y = -20.0; y <= 20.0; y += 1.0) statics.push_back({voxel_center(x), voxel_center(y), kGroundZ, 0.2});
  }
  for (double x = -45.0; x <= 45.0; x += 0.5) {
    for (double z = -1.5; z <= 2.0; z += 0.5) statics.push_back({voxel_center(x), 22.25, voxel_center(z), 0.5});
  }
  for (double y = -10.0; y <= 10.0; y += 0.5) {
    for (double z = -1.5; z <= 6.0; z += 0.5) statics.push_back({60.25, voxel_center(y), voxel_center(z), 0.5});
  }

  RoadsideScene scene;
  for (std::size_t f = 0; f < frames; ++f) {
    PointCloud pc;
    for (const auto& p : statics) {
      pc.points.push_back({p.x + rng.uniform(-0.1, 0.1), p.y + rng.uniform(-0.1, 0.1), p.z + rng.uniform(-0.05, 0.05),
                           p.intensity});
    }
    std::vector<SceneObject> present;
    for (const auto& t : tracks) {
      if (f < t.first || f > t.last) continue;
      const Eigen::Vector2d xy = t.start + t.velocity * static_cast<double>(f - t.first);
      Box3D box;
      box.center = {xy.x(), xy.y(), kObjectBase + t.extent.z() / 2};
      box.extent = t.extent;
      box.yaw = std::atan2(t.velocity.y(), t.velocity.x());
      fill_box(box, rng, pc.points);
      present.push_back({t.class_name, box});
    }
    scene.frames.push_back(std::move(pc));
    scene.objects.push_back(std::move(present));
  }
  return scene;
}

/// Pipeline config for the roadside scene: crop, STDF, DBSCAN, boxes, export.
inline PipelineConfig roadside_config(const RoadsideScene& scene) {
  PipelineConfig cfg = engine::default_config();
  cfg.data.main_dir = "data";
  cfg.data.lidar_dir = "lidar";
  cfg.data.pcd_type = ".pcd";
  cfg.data.replay_hz = 10.0;
  auto enable = [&](Category c, const std::string& name, ParamMap params) {
    FunctionEntry* e = cfg.find(c, name);
    e->enabled = true;
    for (auto& [k, v] : params) e->params[k] = v;
  };
  enable(Category::lidar, "crop",
         {{"min_x", scene.crop_min.x()},
          {"min_y", scene.crop_min.y()},
          {"min_z", scene.crop_min.z()},
          {"max_x", scene.crop_max.x()},
          {"max_y", scene.crop_max.y()},
          {"max_z", scene.crop_max.z()}});
  enable(Category::lidar, "BGFilterSTDF",
         {{"voxel_size", 0.5}, {"n", std::int64_t{2}}, {"m_skip", std::int64_t{1}}, {"r", std::int64_t{3}},
          {"threshold", 0.5}});
  enable(Category::lidar, "O3D_DBSCAN", {{"eps", 0.6}, {"min_points", std::int64_t{5}}});
  enable(Category::lidar, "Cluster2Object", {});
  enable(Category::post, "create_pcdet_dataset", {{"out_dir", std::string("outputs/pcdet")}});
  return cfg;
}

/// Writes base_config.yml and data/lidar/NNNNNN.pcd (binary) under dir.
inline void write_roadside_pipeline(const fs::path& dir, const RoadsideScene& scene) {
  fs::create_directories(dir / "data" / "lidar");
  for (Category c : kCategories) fs::create_directories(dir / "algo" / std::string(category_name(c)));
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.pcd", f);
    io::write_file(dir / "data" / "lidar" / name, io::write_pcd(scene.frames[f], io::PcdMode::binary));
  }
  save_config(engine::base_config_path(dir), roadside_config(scene));
}

// ---------------------------------------------------------------------------
// KITTI-format fixtures
// ---------------------------------------------------------------------------

/// Pinhole camera f=100, c=(50,50) looking down lidar +x with no offset.
inline Calibration axis_swap_calibration() {
  Calibration c;
  c.tr_velo_to_cam << 0, -1, 0, 0, 0, 0, -1, 0, 1, 0, 0, 0;
  c.r0_rect.setIdentity();
  c.p2 << 100, 0, 50, 0, 0, 100, 50, 0, 0, 0, 1, 0;
  return c;
}

/// Unit cube on the optical axis whose near face is 10 m from the camera.
inline ObjectLabel unit_cube_label() {
  ObjectLabel l;
  l.class_name = "Misc";
  l.box3d.center = {10.5, 0.0, 0.0};
  l.box3d.extent = {1.0, 1.0, 1.0};
  return l;
}

/// KITTI-like calibration: axis swap, lever arm and a small rectification.
inline Calibration kitti_like_calibration() {
  Calibration c = axis_swap_calibration();
  c.tr_velo_to_cam(0, 3) = 0.06;
  c.tr_velo_to_cam(1, 3) = -0.08;
  c.tr_velo_to_cam(2, 3) = -0.27;
  const Eigen::Matrix3d r0 = Eigen::AngleAxisd(0.01, Eigen::Vector3d::UnitY()).toRotationMatrix() *
                             Eigen::AngleAxisd(-0.004, Eigen::Vector3d::UnitX()).toRotationMatrix();
  c.r0_rect = r0;
  c.p2 << 721.5377, 0, 609.5593, 44.85728, 0, 721.5377, 172.854, 0.2163791, 0, 0, 1, 0.002745884;
  return c;
}

struct KittiFrame {
  PointCloud cloud;
  Calibration calib;
  std::vector<RawKittiLabel> labels;
};

/// Three frames of camera-frame labels, a matching calibration and a cloud
/// with points inside every labeled box.
inline std::vector<KittiFrame> kitti_fixture(std::uint64_t seed = 3) {
  Rng rng(seed);
  std::vector<KittiFrame> out;
  for (std::size_t f = 0; f < 3; ++f) {
    KittiFrame kf;
    kf.calib = kitti_like_calibration();
    const double shift = 1.5 * static_cast<double>(f);
    auto add = [&](const std::string& type, double h, double w, double l, Eigen::Vector3d loc, double ry) {
      RawKittiLabel r;
      r.type = type;
      r.h = h;
      r.w = w;
      r.l = l;
      r.location = loc;
      r.rotation_y = ry;
      r.bbox = {100.0 + 10 * f, 150.0, 220.0 + 10 * f, 210.0};
      kf.labels.push_back(r);
    };
    add("Car", 1.52, 1.63, 3.88, {-3.1 + 0.25 * shift, 1.71, 12.6 + shift}, -1.57 + 0.1 * f);
    add("Pedestrian", 1.76, 0.62, 0.81, {4.2, 1.65, 8.9 - 0.3 * shift}, 0.37);
    add("Cyclist", 1.74, 0.55, 1.76, {1.05 + shift, 1.58, 22.4}, 2.9);
    RawKittiLabel dc;
    dc.type = "DontCare";
    dc.dont_care = true;
    dc.h = dc.w = dc.l = -1;
    dc.location = {-1000, -1000, -1000};
    dc.rotation_y = -10;
    dc.bbox = {500, 160, 540, 190};
    kf.labels.push_back(dc);

    for (std::size_t i = 0; i < 2000; ++i) {
      kf.cloud.points.push_back({rng.uniform(0.0, 40.0), rng.uniform(-15.0, 15.0), rng.uniform(-1.8, 1.0),
                                 rng.uniform(0.0, 1.0)});
    }
    out.push_back(std::move(kf));
  }
  return out;
}

/// Pipeline config for the KITTI fixture: crop, detector stub, label conversion.
inline PipelineConfig kitti_config() {
  PipelineConfig cfg = engine::default_config();
  cfg.data.main_dir = "data";
  cfg.data.lidar_dir = "velodyne";
  cfg.data.calib_dir = "calib";
  cfg.data.label_dir = "label_2";
  cfg.data.pcd_type = ".bin";
  cfg.data.calib_enabled = true;
  cfg.data.label_enabled = true;
  cfg.find(Category::lidar, "crop")->enabled = true;
  cfg.find(Category::lidar, "crop")->params["min_x"] = 0.0;
  cfg.find(Category::lidar, "crop")->params["max_x"] = 40.0;
  cfg.find(Category::lidar, "PointPillarDetection")->enabled = true;
  cfg.find(Category::label, "convert_labels_camera_to_lidar")->enabled = true;
  return cfg;
}

inline void write_kitti_pipeline(const fs::path& dir, const std::vector<KittiFrame>& frames) {
  for (const char* sub : {"velodyne", "calib", "label_2"}) fs::create_directories(dir / "data" / sub);
  for (Category c : kCategories) fs::create_directories(dir / "algo" / std::string(category_name(c)));
  for (std::size_t f = 0; f < frames.size(); ++f) {
    char stem[16];
    std::snprintf(stem, sizeof(stem), "%06zu", f);
    io::write_file(dir / "data" / "velodyne" / (std::string(stem) + ".bin"), io::write_kitti_bin(frames[f].cloud));
    io::write_file(dir / "data" / "calib" / (std::string(stem) + ".txt"), io::write_kitti_calib(frames[f].calib));
    io::write_file(dir / "data" / "label_2" / (std::string(stem) + ".txt"), io::write_kitti_label(frames[f].labels));
  }
  save_config(engine::base_config_path(dir), kitti_config());
}

}  // namespace liguard::sim
