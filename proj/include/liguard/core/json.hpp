#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "liguard/core/config.hpp"
#include "liguard/core/error.hpp"
#include "liguard/core/frame.hpp"
#include "liguard/core/types.hpp"

namespace liguard {

using json = nlohmann::json;

inline json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Eigen::Vector3d vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected [x, y, z], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json trajectory_to_json(const std::vector<Eigen::Vector3d>& t) {
  json out = json::array();
  for (const auto& p : t) out.push_back(vec3_to_json(p));
  return out;
}

inline std::vector<Eigen::Vector3d> trajectory_from_json(const json& j) {
  std::vector<Eigen::Vector3d> out;
  for (const auto& p : j) out.push_back(vec3_from_json(p));
  return out;
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

inline json box2d_to_json(const Box2D& b) { return json::array({b.xmin, b.ymin, b.xmax, b.ymax}); }

inline Box2D box2d_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("expected [xmin, ymin, xmax, ymax]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline json label_to_json(const ObjectLabel& l) {
  json j = {
      {"class_name", l.class_name},
      {"center", vec3_to_json(l.box3d.center)},
      {"extent", vec3_to_json(l.box3d.extent)},
      {"yaw", l.box3d.yaw},
      {"source", l.source},
      {"past_trajectory", trajectory_to_json(l.past_trajectory)},
      {"future_trajectory", trajectory_to_json(l.future_trajectory)},
  };
  j["box2d"] = l.box2d ? box2d_to_json(*l.box2d) : json(nullptr);
  j["track_id"] = l.track_id ? json(*l.track_id) : json(nullptr);
  j["velocity"] = l.velocity ? vec3_to_json(*l.velocity) : json(nullptr);
  return j;
}

inline ObjectLabel label_from_json(const json& j) {
  ObjectLabel l;
  l.class_name = j.value("class_name", std::string("Unknown"));
  l.box3d.center = vec3_from_json(j.at("center"));
  l.box3d.extent = vec3_from_json(j.at("extent"));
  l.box3d.yaw = j.value("yaw", 0.0);
  l.source = j.value("source", std::string("ground_truth"));
  if (j.contains("box2d") && !j["box2d"].is_null()) l.box2d = box2d_from_json(j["box2d"]);
  if (j.contains("track_id") && !j["track_id"].is_null()) l.track_id = j["track_id"].get<std::int64_t>();
  if (j.contains("velocity") && !j["velocity"].is_null()) l.velocity = vec3_from_json(j["velocity"]);
  if (j.contains("past_trajectory")) l.past_trajectory = trajectory_from_json(j["past_trajectory"]);
  if (j.contains("future_trajectory")) l.future_trajectory = trajectory_from_json(j["future_trajectory"]);
  return l;
}

inline json labels_to_json(const std::vector<ObjectLabel>& labels) {
  json out = json::array();
  for (const auto& l : labels) out.push_back(label_to_json(l));
  return out;
}

inline std::vector<ObjectLabel> labels_from_json(const json& j) {
  std::vector<ObjectLabel> out;
  for (const auto& l : j) out.push_back(label_from_json(l));
  return out;
}

// ---------------------------------------------------------------------------
// Clouds, calibration, logs
// ---------------------------------------------------------------------------

inline json cloud_to_json(const PointCloud& pc) {
  json pts = json::array();
  for (const auto& p : pc.points) pts.push_back({p.x, p.y, p.z, p.intensity});
  json j = {{"points", std::move(pts)}};
  if (pc.colors) {
    json cols = json::array();
    for (const auto& c : *pc.colors) cols.push_back({c.r, c.g, c.b});
    j["colors"] = std::move(cols);
  }
  if (pc.organized) j["organized"] = {pc.organized->width, pc.organized->height};
  return j;
}

inline PointCloud cloud_from_json(const json& j) {
  PointCloud pc;
  for (const auto& p : j.at("points")) {
    if (p.size() < 3) throw ParseError("point needs at least x, y, z");
    pc.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>(),
                         p.size() > 3 ? p[3].get<double>() : 0.0});
  }
  if (j.contains("colors") && !j["colors"].is_null()) {
    std::vector<ColorRGB> cols;
    for (const auto& c : j["colors"]) cols.push_back({c.at(0).get<float>(), c.at(1).get<float>(), c.at(2).get<float>()});
    pc.colors = std::move(cols);
  }
  if (j.contains("organized") && !j["organized"].is_null()) {
    pc.organized = OrganizedDims{j["organized"].at(0).get<std::uint32_t>(),
                                 j["organized"].at(1).get<std::uint32_t>()};
  }
  pc.validate();
  return pc;
}

inline json calibration_to_json(const Calibration& c) {
  auto rows = [](const auto& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) out.push_back(m(r, k));
    }
    return out;
  };
  return {{"Tr_velo_to_cam", rows(c.tr_velo_to_cam)}, {"R0_rect", rows(c.r0_rect)}, {"P2", rows(c.p2)}};
}

inline Calibration calibration_from_json(const json& j) {
  Calibration c;
  auto fill = [&](const char* key, auto& m) {
    const auto& v = j.at(key);
    if (v.size() != static_cast<std::size_t>(m.size())) {
      throw ParseError(std::string(key) + " expects " + std::to_string(m.size()) + " values");
    }
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) m(r, k) = v[i++].template get<double>();
    }
  };
  fill("Tr_velo_to_cam", c.tr_velo_to_cam);
  fill("R0_rect", c.r0_rect);
  fill("P2", c.p2);
  return c;
}

inline json log_to_json(const LogEntry& e) {
  return {{"level", to_string(e.level)}, {"source", e.source}, {"message", e.message}};
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace json_detail {

template <class Section>
json section_to_json(const Section& s) {
  json out = json::object();
  for (const auto& f : Section::fields()) {
    out[std::string(f.name)] = param_to_json(detail::read_field(s, f));
  }
  return out;
}

}  // namespace json_detail

/// Config tree as JSON. proc is an object of categories in execution order,
/// each an array of {name, enabled, priority, params}.
inline json config_to_json(const PipelineConfig& cfg) {
  json proc = json::object();
  for (Category c : kCategories) {
    json fns = json::array();
    for (const auto& e : cfg.functions(c)) {
      json params = json::object();
      for (const auto& [k, v] : e.params) params[k] = param_to_json(v);
      fns.push_back({{"name", e.name}, {"enabled", e.enabled}, {"priority", e.priority}, {"params", params}});
    }
    proc[std::string(category_name(c))] = std::move(fns);
  }
  return {{"data", json_detail::section_to_json(cfg.data)},
          {"proc", std::move(proc)},
          {"visualization", json_detail::section_to_json(cfg.visualization)},
          {"logging", json_detail::section_to_json(cfg.logging)}};
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

/// Frame as JSON for out-of-process functions. The image travels as
/// dimensions only.
inline json frame_to_json(const Frame& f) {
  json j = {{"index", f.index}, {"timestamp", f.timestamp}, {"stem", f.stem}};
  j["point_cloud"] = f.point_cloud() ? cloud_to_json(*f.point_cloud()) : json(nullptr);
  j["calibration"] = f.calibration() ? calibration_to_json(*f.calibration()) : json(nullptr);
  j["image"] = f.image() ? json{{"width", f.image()->width}, {"height", f.image()->height}} : json(nullptr);
  j["labels"] = labels_to_json(f.labels());
  j["cluster_ids"] = f.cluster_ids() ? json(*f.cluster_ids()) : json(nullptr);
  json extras = json::object();
  for (const auto& [k, v] : f.extras()) extras[k] = v;
  j["extras"] = std::move(extras);
  j["logs"] = json::array();
  return j;
}

/// Writes back the slots an out-of-process function may change. Everything
/// is decoded before the frame is touched, so a malformed result leaves the
/// frame as it was.
inline void apply_frame_json(Frame& f, const json& j, const std::string& source) {
  std::optional<PointCloud> pc;
  std::optional<std::optional<ClusterIds>> ids;
  std::optional<Calibration> calib;
  std::optional<std::vector<ObjectLabel>> labels;
  if (j.contains("point_cloud") && !j["point_cloud"].is_null()) pc = cloud_from_json(j["point_cloud"]);
  if (j.contains("cluster_ids")) {
    ids = j["cluster_ids"].is_null() ? std::optional<ClusterIds>{}
                                     : std::optional<ClusterIds>{j["cluster_ids"].get<ClusterIds>()};
  }
  if (j.contains("calibration") && !j["calibration"].is_null()) {
    calib = calibration_from_json(j["calibration"]);
    calib->validate();
  }
  if (j.contains("labels")) {
    labels = labels_from_json(j["labels"]);
    for (const auto& l : *labels) l.validate();
  }
  const std::size_t n = pc ? pc->size() : (f.point_cloud() ? f.point_cloud()->size() : 0);
  if (ids && *ids && (*ids)->size() != n) {
    throw SlotError("cluster_ids length does not match point count");
  }

  if (pc || ids) {
    PointCloud cloud = pc ? std::move(*pc) : f.point_cloud().value_or(PointCloud{});
    std::optional<ClusterIds> cids = ids ? std::move(*ids) : f.cluster_ids();
    if (cids && cids->size() != cloud.size()) cids.reset();
    if (pc || f.point_cloud()) f.set_point_cloud_with_ids(std::move(cloud), std::move(cids));
  }
  if (calib) f.set_calibration(std::move(*calib));
  if (labels) f.set_labels(std::move(*labels));
  if (j.contains("extras") && j["extras"].is_object()) {
    for (const auto& [k, v] : j["extras"].items()) f.set_extra(k, v);
  }
  if (j.contains("logs") && j["logs"].is_array()) {
    for (const auto& e : j["logs"]) {
      LogLevel level = LogLevel::info;
      std::string msg;
      if (e.is_string()) {
        msg = e.get<std::string>();
      } else {
        level = log_level_from_string(e.value("level", std::string("info")));
        msg = e.value("message", std::string());
      }
      f.log(level, source, msg);
    }
  }
}

}  // namespace liguard
