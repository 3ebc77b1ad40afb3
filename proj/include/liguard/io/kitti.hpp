#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "liguard/core/error.hpp"
#include "liguard/core/types.hpp"
#include "liguard/io/bytes.hpp"
#include "liguard/io/pcd.hpp"

namespace liguard::io {

/// KITTI velodyne scan: packed little-endian float32 (x, y, z, intensity).
inline PointCloud read_kitti_bin(std::string_view bytes) {
  if (bytes.size() % 16 != 0) {
    throw ParseError("KITTI bin: " + std::to_string(bytes.size()) +
                     " bytes is not a multiple of 16");
  }
  PointCloud pc;
  pc.points.resize(bytes.size() / 16);
  for (std::size_t i = 0; i < pc.points.size(); ++i) {
    const char* p = bytes.data() + i * 16;
    pc.points[i] = {load_le<float>(p), load_le<float>(p + 4), load_le<float>(p + 8),
                    load_le<float>(p + 12)};
  }
  return pc;
}

inline std::string write_kitti_bin(const PointCloud& pc) {
  std::string out;
  out.reserve(pc.size() * 16);
  for (const auto& p : pc.points) {
    store_le(out, static_cast<float>(p.x));
    store_le(out, static_cast<float>(p.y));
    store_le(out, static_cast<float>(p.z));
    store_le(out, static_cast<float>(p.intensity));
  }
  return out;
}

namespace kitti_detail {

inline std::vector<double> parse_numbers(std::string_view text, const std::string& what) {
  std::vector<double> out;
  for (auto tok : pcd_detail::split_ws(text)) {
    double v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      throw ParseError(what + ": bad number '" + std::string(tok) + "'");
    }
    out.push_back(v);
  }
  return out;
}

/// Shortest text that parses back to the same double.
inline std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_row(const double* v, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += shortest(v[i]);
  }
  return out;
}

}  // namespace kitti_detail

/// Parses "KEY: v1 v2 ..." lines; needs P2 (12), R0_rect (9), Tr_velo_to_cam (12).
inline Calibration read_kitti_calib(std::string_view text) {
  std::map<std::string, std::vector<double>, std::less<>> values;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string key(line.substr(0, colon));
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    if (key != "P2" && key != "R0_rect" && key != "Tr_velo_to_cam") continue;
    values[key] = kitti_detail::parse_numbers(line.substr(colon + 1), key);
  }
  auto take = [&](const char* key, std::size_t n) -> const std::vector<double>& {
    auto it = values.find(key);
    if (it == values.end()) throw ParseError(std::string("calib: missing ") + key);
    if (it->second.size() != n) {
      throw ParseError(std::string(key) + " expects " + std::to_string(n) +
                       " values, got " + std::to_string(it->second.size()));
    }
    return it->second;
  };
  Calibration c;
  const auto& p2 = take("P2", 12);
  const auto& r0 = take("R0_rect", 9);
  const auto& tr = take("Tr_velo_to_cam", 12);
  c.p2 = Eigen::Map<const Matrix34>(p2.data());
  c.r0_rect = Eigen::Map<const Matrix33>(r0.data());
  c.tr_velo_to_cam = Eigen::Map<const Matrix34>(tr.data());
  try {
    c.validate();
  } catch (const SlotError& e) {
    throw ParseError(std::string("calib: ") + e.what());
  }
  return c;
}

inline std::string write_kitti_calib(const Calibration& c) {
  std::string out;
  out += "P2: " + kitti_detail::format_row(c.p2.data(), 12) + "\n";
  out += "R0_rect: " + kitti_detail::format_row(c.r0_rect.data(), 9) + "\n";
  out += "Tr_velo_to_cam: " + kitti_detail::format_row(c.tr_velo_to_cam.data(), 12) + "\n";
  return out;
}

struct KittiLabelFile {
  std::vector<RawKittiLabel> labels;
  /// One message per skipped line.
  std::vector<std::string> errors;
};

/// Parses 15-field KITTI label lines. Bad lines are skipped and reported.
inline KittiLabelFile read_kitti_label(std::string_view text) {
  KittiLabelFile out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    auto tok = pcd_detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 15) {
      out.errors.push_back("line " + std::to_string(line_no) + ": expected 15 fields, got " +
                           std::to_string(tok.size()));
      continue;
    }
    std::array<double, 14> v{};
    bool ok = true;
    for (std::size_t i = 0; i < 14; ++i) {
      auto t = tok[i + 1];
      auto res = std::from_chars(t.data(), t.data() + t.size(), v[i]);
      if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        out.errors.push_back("line " + std::to_string(line_no) + ": bad number '" +
                             std::string(t) + "'");
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    RawKittiLabel l;
    l.type = std::string(tok[0]);
    l.truncated = v[0];
    l.occluded = static_cast<int>(v[1]);
    l.alpha = v[2];
    l.bbox = {v[3], v[4], v[5], v[6]};
    l.h = v[7];
    l.w = v[8];
    l.l = v[9];
    l.location = {v[10], v[11], v[12]};
    l.rotation_y = v[13];
    l.dont_care = l.type == "DontCare";
    out.labels.push_back(std::move(l));
  }
  return out;
}

inline std::string write_kitti_label(const std::vector<RawKittiLabel>& labels) {
  std::string out;
  char trunc[16];
  for (const auto& l : labels) {
    std::snprintf(trunc, sizeof(trunc), "%.2f", l.truncated);
    const double rest[] = {l.alpha, l.bbox.xmin, l.bbox.ymin, l.bbox.xmax, l.bbox.ymax, l.h, l.w,
                           l.l, l.location.x(), l.location.y(), l.location.z(), l.rotation_y};
    out += l.type + " " + trunc + " " + std::to_string(l.occluded) + " " +
           kitti_detail::format_row(rest, std::size(rest)) + "\n";
  }
  return out;
}

}  // namespace liguard::io
