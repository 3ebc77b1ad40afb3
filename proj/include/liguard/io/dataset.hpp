#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "liguard/core/config.hpp"
#include "liguard/core/error.hpp"
#include "liguard/core/frame.hpp"
#include "liguard/io/bytes.hpp"
#include "liguard/io/kitti.hpp"
#include "liguard/io/pcd.hpp"
#include "liguard/io/png.hpp"

namespace liguard::io {

namespace fs = std::filesystem;

/// Numeric-aware string ordering: "2" < "10", "a9" < "a10".
inline bool natural_less(std::string_view a, std::string_view b) {
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (is_digit(a[i]) && is_digit(b[j])) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && is_digit(a[ie])) ++ie;
      while (je < b.size() && is_digit(b[je])) ++je;
      std::size_t iz = i, jz = j;
      while (iz + 1 < ie && a[iz] == '0') ++iz;
      while (jz + 1 < je && b[jz] == '0') ++jz;
      const std::string_view na = a.substr(iz, ie - iz);
      const std::string_view nb = b.substr(jz, je - jz);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      // Equal value: fewer leading zeros first keeps the order total.
      if ((ie - i) != (je - j)) return (ie - i) < (je - j);
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return (a.size() - i) < (b.size() - j);
}

struct FrameFiles {
  std::string stem;
  std::optional<fs::path> pcd;
  std::optional<fs::path> img;
  std::optional<fs::path> calib;
  std::optional<fs::path> label;

  bool operator==(const FrameFiles&) const = default;
};

/// Per-frame file tuples, sorted by stem in natural order.
struct FrameIndex {
  std::vector<FrameFiles> frames;
  std::vector<std::string> warnings;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
};

inline fs::path resolve_main_dir(const DataConfig& data, const fs::path& base_dir) {
  fs::path main = data.main_dir;
  if (main.is_relative()) main = base_dir / main;
  return main;
}

namespace dataset_detail {

inline std::map<std::string, fs::path> list_stream(const fs::path& dir,
                                                   const std::string& ext,
                                                   std::vector<std::string>& warnings) {
  std::map<std::string, fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    warnings.push_back("stream directory " + dir.string() + " does not exist");
    return out;
  }
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (p.extension().string() != ext) continue;
    out.emplace(p.stem().string(), p);
  }
  return out;
}

}  // namespace dataset_detail

/// Pairs the enabled streams' files by basename stem.
///
/// The primary stream (lidar if enabled, else camera, else calib, else label)
/// defines the frame list; other streams fill in matching stems.
inline FrameIndex scan_dataset(const DataConfig& data, const fs::path& base_dir = ".") {
  const fs::path main = resolve_main_dir(data, base_dir);
  std::error_code ec;
  if (!fs::is_directory(main, ec)) {
    throw ConfigError("data.main_dir " + main.string() + " does not exist");
  }
  if (!data.lidar_enabled && !data.camera_enabled && !data.calib_enabled &&
      !data.label_enabled) {
    throw ConfigError("no data stream is enabled");
  }

  FrameIndex index;
  using Streams = std::map<std::string, fs::path>;
  std::optional<Streams> lidar, camera, calib, label;
  if (data.lidar_enabled) {
    lidar = dataset_detail::list_stream(main / data.lidar_dir, data.pcd_type, index.warnings);
  }
  if (data.camera_enabled) {
    camera = dataset_detail::list_stream(main / data.camera_dir, data.img_type, index.warnings);
  }
  if (data.calib_enabled) {
    calib = dataset_detail::list_stream(main / data.calib_dir, data.calib_type, index.warnings);
  }
  if (data.label_enabled) {
    label = dataset_detail::list_stream(main / data.label_dir, data.label_type, index.warnings);
  }

  const Streams& primary = lidar ? *lidar : camera ? *camera : calib ? *calib : *label;
  std::vector<std::string> stems;
  stems.reserve(primary.size());
  for (const auto& [stem, _] : primary) stems.push_back(stem);
  std::sort(stems.begin(), stems.end(), natural_less);

  auto lookup = [](const std::optional<Streams>& s, const std::string& stem)
      -> std::optional<fs::path> {
    if (!s) return std::nullopt;
    auto it = s->find(stem);
    if (it == s->end()) return std::nullopt;
    return it->second;
  };
  for (const auto& stem : stems) {
    index.frames.push_back({stem, lookup(lidar, stem), lookup(camera, stem),
                            lookup(calib, stem), lookup(label, stem)});
  }
  if (index.frames.empty()) {
    index.warnings.push_back("dataset at " + main.string() + " has no matching files");
  }
  return index;
}

inline PointCloud read_point_cloud_file(const fs::path& path) {
  const std::string bytes = read_file(path);
  const std::string ext = path.extension().string();
  if (ext == ".bin") return read_kitti_bin(bytes);
  if (ext == ".pcd") return read_pcd(bytes);
  throw ParseError("unsupported point cloud type '" + ext + "'");
}

/// Reads every available file of a frame. Read failures are logged on the
/// frame and leave the slot empty.
inline Frame load_frame(const FrameFiles& files, std::size_t index, double replay_hz) {
  Frame frame;
  frame.index = index;
  frame.stem = files.stem;
  frame.timestamp = replay_hz > 0 ? static_cast<double>(index) / replay_hz : 0.0;
  auto guarded = [&](const char* what, const fs::path& path, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      frame.log(LogLevel::error, "reader",
                std::string(what) + " " + path.string() + ": " + e.what());
    }
  };
  if (files.pcd) {
    guarded("point cloud", *files.pcd, [&] { frame.set_point_cloud(read_point_cloud_file(*files.pcd)); });
  }
  if (files.img) {
    guarded("image", *files.img, [&] { frame.set_image(read_image(read_file(*files.img))); });
  }
  if (files.calib) {
    guarded("calibration", *files.calib,
            [&] { frame.set_calibration(read_kitti_calib(read_file(*files.calib))); });
  }
  if (files.label) {
    guarded("labels", *files.label, [&] {
      auto parsed = read_kitti_label(read_file(*files.label));
      for (const auto& err : parsed.errors) {
        frame.log(LogLevel::warning, "reader", files.label->string() + " " + err + " (skipped)");
      }
      frame.set_raw_labels(std::move(parsed.labels));
    });
  }
  return frame;
}

}  // namespace liguard::io
