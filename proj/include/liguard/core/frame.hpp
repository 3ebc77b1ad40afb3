#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "liguard/core/error.hpp"
#include "liguard/core/types.hpp"

namespace liguard {

/// Typed slots of the shared frame store.
enum class Slot {
  point_cloud,
  image,
  calibration,
  raw_labels,
  labels,
  cluster_ids,
};

inline constexpr std::array<Slot, 6> kAllSlots = {
    Slot::point_cloud, Slot::image,  Slot::calibration,
    Slot::raw_labels,  Slot::labels, Slot::cluster_ids};

inline std::string_view slot_name(Slot s) {
  switch (s) {
    case Slot::point_cloud: return "point_cloud";
    case Slot::image: return "image";
    case Slot::calibration: return "calibration";
    case Slot::raw_labels: return "raw_labels";
    case Slot::labels: return "labels";
    case Slot::cluster_ids: return "cluster_ids";
  }
  return "";
}

inline std::optional<Slot> slot_from_name(std::string_view name) {
  for (Slot s : kAllSlots) {
    if (slot_name(s) == name) return s;
  }
  return std::nullopt;
}

using ClusterIds = std::vector<std::int32_t>;

/// Anything a slot can hold. `monostate` is the absent marker; `json` values
/// live in the extras map.
using SlotValue =
    std::variant<std::monostate, PointCloud, ImageRaster, Calibration,
                 std::vector<RawKittiLabel>, std::vector<ObjectLabel>,
                 ClusterIds, nlohmann::json>;

/// One time-step's bundle of data flowing through the pipeline.
///
/// Functions never call each other; they communicate only through the slots
/// of this store. Writes go through put() so alignment invariants between
/// the point cloud and cluster ids are enforced at the boundary.
class Frame {
 public:
  std::size_t index = 0;
  double timestamp = 0.0;
  /// File basename shared by the frame's source files ("000042").
  std::string stem;
  std::vector<LogEntry> logs;

  // --- typed access -------------------------------------------------------

  const std::optional<PointCloud>& point_cloud() const { return point_cloud_; }
  const std::optional<ImageRaster>& image() const { return image_; }
  const std::optional<Calibration>& calibration() const { return calibration_; }
  const std::optional<std::vector<RawKittiLabel>>& raw_labels() const {
    return raw_labels_;
  }
  /// Empty list when nothing was stored.
  const std::vector<ObjectLabel>& labels() const { return labels_; }
  const std::optional<ClusterIds>& cluster_ids() const { return cluster_ids_; }
  const std::map<std::string, nlohmann::json>& extras() const { return extras_; }

  bool has(Slot s) const {
    switch (s) {
      case Slot::point_cloud: return point_cloud_.has_value();
      case Slot::image: return image_.has_value();
      case Slot::calibration: return calibration_.has_value();
      case Slot::raw_labels: return raw_labels_.has_value();
      case Slot::labels: return labels_set_;
      case Slot::cluster_ids: return cluster_ids_.has_value();
    }
    return false;
  }

  void set_point_cloud(PointCloud pc) {
    pc.validate();
    if (cluster_ids_ && cluster_ids_->size() != pc.size()) {
      throw SlotError("point_cloud of " + std::to_string(pc.size()) +
                      " points would misalign existing cluster_ids (" +
                      std::to_string(cluster_ids_->size()) + ")");
    }
    point_cloud_ = std::move(pc);
  }

  void set_image(ImageRaster img) {
    img.validate();
    image_ = std::move(img);
  }

  void set_calibration(Calibration c) {
    c.validate();
    calibration_ = std::move(c);
  }

  void set_raw_labels(std::vector<RawKittiLabel> raw) {
    raw_labels_ = std::move(raw);
  }

  void set_labels(std::vector<ObjectLabel> labels) {
    for (const auto& l : labels) l.validate();
    labels_ = std::move(labels);
    labels_set_ = true;
  }

  void set_cluster_ids(ClusterIds ids) {
    const std::size_t n = point_cloud_ ? point_cloud_->size() : 0;
    if (ids.size() != n) {
      throw SlotError("cluster_ids length " + std::to_string(ids.size()) +
                      " does not match point count " + std::to_string(n));
    }
    cluster_ids_ = std::move(ids);
  }

  /// Replaces the cloud and its cluster ids together, keeping them aligned.
  void set_point_cloud_with_ids(PointCloud pc, std::optional<ClusterIds> ids) {
    pc.validate();
    if (ids && ids->size() != pc.size()) {
      throw SlotError("cluster_ids length does not match point count");
    }
    point_cloud_ = std::move(pc);
    cluster_ids_ = std::move(ids);
  }

  void set_extra(const std::string& key, nlohmann::json value) {
    extras_[key] = std::move(value);
  }

  const nlohmann::json* extra(const std::string& key) const {
    auto it = extras_.find(key);
    return it == extras_.end() ? nullptr : &it->second;
  }

  void erase(Slot s) {
    switch (s) {
      case Slot::point_cloud:
        point_cloud_.reset();
        cluster_ids_.reset();
        break;
      case Slot::image: image_.reset(); break;
      case Slot::calibration: calibration_.reset(); break;
      case Slot::raw_labels: raw_labels_.reset(); break;
      case Slot::labels:
        labels_.clear();
        labels_set_ = false;
        break;
      case Slot::cluster_ids: cluster_ids_.reset(); break;
    }
  }

  void erase_extra(const std::string& key) { extras_.erase(key); }

  // --- keyed access -------------------------------------------------------

  /// Generic read by slot name or extras key. Returns monostate when empty,
  /// except `labels`, which reads as an empty list.
  SlotValue get(const std::string& key) const {
    if (auto s = slot_from_name(key)) {
      switch (*s) {
        case Slot::point_cloud:
          return point_cloud_ ? SlotValue{*point_cloud_} : SlotValue{};
        case Slot::image: return image_ ? SlotValue{*image_} : SlotValue{};
        case Slot::calibration:
          return calibration_ ? SlotValue{*calibration_} : SlotValue{};
        case Slot::raw_labels:
          return raw_labels_ ? SlotValue{*raw_labels_} : SlotValue{};
        case Slot::labels: return SlotValue{labels_};
        case Slot::cluster_ids:
          return cluster_ids_ ? SlotValue{*cluster_ids_} : SlotValue{};
      }
    }
    if (auto* e = extra(key)) return SlotValue{*e};
    return SlotValue{};
  }

  /// Generic write. The value's alternative must match the slot; any other
  /// key is stored as an extra and must hold json.
  void put(const std::string& key, SlotValue value) {
    auto mismatch = [&] {
      return SlotError("value type does not match slot '" + key + "'");
    };
    if (auto s = slot_from_name(key)) {
      if (std::holds_alternative<std::monostate>(value)) {
        erase(*s);
        return;
      }
      switch (*s) {
        case Slot::point_cloud:
          if (auto* v = std::get_if<PointCloud>(&value)) return set_point_cloud(std::move(*v));
          throw mismatch();
        case Slot::image:
          if (auto* v = std::get_if<ImageRaster>(&value)) return set_image(std::move(*v));
          throw mismatch();
        case Slot::calibration:
          if (auto* v = std::get_if<Calibration>(&value)) return set_calibration(std::move(*v));
          throw mismatch();
        case Slot::raw_labels:
          if (auto* v = std::get_if<std::vector<RawKittiLabel>>(&value)) return set_raw_labels(std::move(*v));
          throw mismatch();
        case Slot::labels:
          if (auto* v = std::get_if<std::vector<ObjectLabel>>(&value)) return set_labels(std::move(*v));
          throw mismatch();
        case Slot::cluster_ids:
          if (auto* v = std::get_if<ClusterIds>(&value)) return set_cluster_ids(std::move(*v));
          throw mismatch();
      }
    }
    if (std::holds_alternative<std::monostate>(value)) {
      erase_extra(key);
      return;
    }
    if (auto* v = std::get_if<nlohmann::json>(&value)) {
      set_extra(key, std::move(*v));
      return;
    }
    throw SlotError("extras key '" + key + "' only accepts json values");
  }

  void log(LogLevel level, std::string source, std::string message) {
    logs.push_back({level, std::move(source), std::move(message)});
  }

 private:
  std::optional<PointCloud> point_cloud_;
  std::optional<ImageRaster> image_;
  std::optional<Calibration> calibration_;
  std::optional<std::vector<RawKittiLabel>> raw_labels_;
  std::vector<ObjectLabel> labels_;
  bool labels_set_ = false;
  std::optional<ClusterIds> cluster_ids_;
  std::map<std::string, nlohmann::json> extras_;
};

}  // namespace liguard
