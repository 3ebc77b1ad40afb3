#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "liguard/core/error.hpp"
#include "liguard/core/types.hpp"
#include "liguard/io/bytes.hpp"
#include "liguard/io/kitti.hpp"

namespace liguard::algo {

/// "x y z dx dy dz heading class" with six decimals.
inline std::string pcdet_label_line(const ObjectLabel& l) {
  const auto& b = l.box3d;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %.6f %.6f %.6f %.6f ", b.center.x(), b.center.y(),
                b.center.z(), b.extent.x(), b.extent.y(), b.extent.z(), b.yaw);
  return buf + l.class_name + "\n";
}

inline std::string pcdet_label_text(const std::vector<ObjectLabel>& labels) {
  std::string out;
  for (const auto& l : labels) out += pcdet_label_line(l);
  return out;
}

namespace export_detail {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

}  // namespace export_detail

/// Writes points/<stem>.bin and labels/<stem>.txt under out_dir.
inline std::vector<std::filesystem::path> export_pcdet(const PointCloud& pc,
                                                       const std::vector<ObjectLabel>& labels,
                                                       const std::string& stem,
                                                       const std::filesystem::path& out_dir) {
  const auto points_dir = out_dir / "points";
  const auto labels_dir = out_dir / "labels";
  export_detail::ensure_dir(points_dir);
  export_detail::ensure_dir(labels_dir);
  const auto bin = points_dir / (stem + ".bin");
  const auto txt = labels_dir / (stem + ".txt");
  io::write_file(bin, io::write_kitti_bin(pc));
  io::write_file(txt, pcdet_label_text(labels));
  return {bin, txt};
}

/// Writes objects/<stem>_<k>.bin (points inside label k's box) and the
/// matching single-line objects/<stem>_<k>.txt.
inline std::vector<std::filesystem::path> export_per_object_pcdet(
    const PointCloud& pc, const std::vector<ObjectLabel>& labels, const std::string& stem,
    const std::filesystem::path& out_dir) {
  const auto dir = out_dir / "objects";
  export_detail::ensure_dir(dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    PointCloud inside;
    for (const auto& p : pc.points) {
      if (labels[k].box3d.contains(p.position())) inside.points.push_back(p);
    }
    const std::string base = stem + "_" + std::to_string(k);
    const auto bin = dir / (base + ".bin");
    const auto txt = dir / (base + ".txt");
    io::write_file(bin, io::write_kitti_bin(inside));
    io::write_file(txt, pcdet_label_line(labels[k]));
    written.push_back(bin);
    written.push_back(txt);
  }
  return written;
}

}  // namespace liguard::algo
