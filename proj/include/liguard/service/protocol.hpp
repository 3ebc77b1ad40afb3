#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "liguard/core/error.hpp"
#include "liguard/core/frame.hpp"
#include "liguard/core/json.hpp"
#include "liguard/engine/engine.hpp"
#include "liguard/io/bytes.hpp"
#include "liguard/io/png.hpp"

namespace liguard::service {

inline constexpr const char* kProtocol = "liguard-proto/1";

/// Event channels a client can subscribe to.
inline const std::vector<std::string>& event_channels() {
  static const std::vector<std::string> c = {"frame", "log", "config", "state"};
  return c;
}

struct Request {
  json id;
  std::string cmd;
  json args = json::object();
};

/// Parses a request text frame; ParseError carries a message for the client.
inline Request parse_request(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed request: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("malformed request: expected an object");
  Request r;
  r.id = j.contains("id") ? j["id"] : json(nullptr);
  if (!j.contains("cmd") || !j["cmd"].is_string()) throw ParseError("malformed request: missing cmd");
  r.cmd = j["cmd"].get<std::string>();
  if (j.contains("args") && !j["args"].is_null()) {
    if (!j["args"].is_object()) throw ParseError("malformed request: args must be an object");
    r.args = j["args"];
  }
  return r;
}

inline json ok_response(const json& id, json payload) {
  return {{"id", id}, {"ok", true}, {"payload", std::move(payload)}};
}

inline json error_response(const json& id, const std::string& error) {
  return {{"id", id}, {"ok", false}, {"error", error}};
}

inline json event(const std::string& type, json payload) {
  return {{"type", type}, {"payload", std::move(payload)}};
}

inline json state_payload(const engine::PlaybackState& s) {
  return {{"current", s.current}, {"playing", s.playing}, {"total", s.total}};
}

// ---------------------------------------------------------------------------
// Binary attachments: [u32 LE id][u32 LE length][bytes]
// ---------------------------------------------------------------------------

inline std::string encode_attachment(std::uint32_t id, std::string_view bytes) {
  std::string out;
  out.reserve(8 + bytes.size());
  io::store_le<std::uint32_t>(out, id);
  io::store_le<std::uint32_t>(out, static_cast<std::uint32_t>(bytes.size()));
  out.append(bytes);
  return out;
}

struct Attachment {
  std::uint32_t id = 0;
  std::string bytes;
};

inline Attachment decode_attachment(std::string_view frame) {
  if (frame.size() < 8) throw ParseError("attachment shorter than its 8-byte header");
  Attachment a;
  a.id = io::load_le<std::uint32_t>(frame.data());
  const auto len = io::load_le<std::uint32_t>(frame.data() + 4);
  if (frame.size() - 8 != len) {
    throw ParseError("attachment length " + std::to_string(len) + " does not match payload " +
                     std::to_string(frame.size() - 8));
  }
  a.bytes.assign(frame.substr(8));
  return a;
}

template <class T>
std::vector<T> decode_le_array(std::string_view bytes) {
  if (bytes.size() % sizeof(T) != 0) throw ParseError("attachment size not a multiple of element size");
  std::vector<T> out(bytes.size() / sizeof(T));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = io::load_le<T>(bytes.data() + i * sizeof(T));
  return out;
}

/// Indices streamed for a cloud of n points under the cap: every stride-th point.
inline std::size_t stream_stride(std::size_t n, std::size_t max_points) {
  if (max_points == 0 || n <= max_points) return 1;
  return (n + max_points - 1) / max_points;
}

/// A JSON text message plus the binary frames that follow it.
struct Outbound {
  std::string text;
  std::vector<std::string> binary;
  std::string channel;
  /// Slow clients may skip droppable messages (frame events only).
  bool droppable = false;
};

/// Frame event: metadata and labels as JSON; points (f32 xyz), colors
/// (u8 rgb), cluster ids (i32) and the image (PNG) as attachments whose ids
/// the JSON references.
inline Outbound frame_event(const Frame& f, std::size_t max_points, std::uint32_t& next_attachment) {
  Outbound out;
  out.channel = "frame";
  out.droppable = true;
  json payload = {{"index", f.index}, {"stem", f.stem}, {"timestamp", f.timestamp}};
  json attachments = json::object();

  if (const auto& pc = f.point_cloud()) {
    const std::size_t stride = stream_stride(pc->size(), max_points);
    std::string pts, cols, ids;
    std::size_t streamed = 0;
    for (std::size_t i = 0; i < pc->size(); i += stride) {
      const auto& p = pc->points[i];
      io::store_le<float>(pts, static_cast<float>(p.x));
      io::store_le<float>(pts, static_cast<float>(p.y));
      io::store_le<float>(pts, static_cast<float>(p.z));
      if (pc->colors) {
        const auto& c = (*pc->colors)[i];
        for (float ch : {c.r, c.g, c.b}) {
          cols.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(ch, 0.0f, 1.0f) * 255.0f))));
        }
      }
      if (f.cluster_ids()) io::store_le<std::int32_t>(ids, (*f.cluster_ids())[i]);
      ++streamed;
    }
    payload["point_count"] = pc->size();
    payload["streamed_points"] = streamed;
    payload["stride"] = stride;
    attachments["points"] = next_attachment;
    out.binary.push_back(encode_attachment(next_attachment++, pts));
    if (pc->colors) {
      attachments["colors"] = next_attachment;
      out.binary.push_back(encode_attachment(next_attachment++, cols));
    }
    if (f.cluster_ids()) {
      attachments["cluster_ids"] = next_attachment;
      out.binary.push_back(encode_attachment(next_attachment++, ids));
    }
  } else {
    payload["point_count"] = nullptr;
  }
  if (const auto& img = f.image()) {
    payload["image"] = {{"width", img->width}, {"height", img->height}};
    attachments["image"] = next_attachment;
    out.binary.push_back(encode_attachment(next_attachment++, io::write_png(*img)));
  }
  payload["labels"] = labels_to_json(f.labels());
  json logs = json::array();
  for (const auto& e : f.logs) logs.push_back(log_to_json(e));
  payload["logs"] = std::move(logs);
  payload["attachments"] = std::move(attachments);
  out.text = event("frame", std::move(payload)).dump();
  return out;
}

inline Outbound text_event(const std::string& type, json payload) {
  Outbound out;
  out.channel = type;
  out.text = event(type, std::move(payload)).dump();
  return out;
}

inline Outbound log_event(const LogEntry& e, std::optional<std::size_t> frame_index) {
  json p = log_to_json(e);
  p["frame"] = frame_index ? json(*frame_index) : json(nullptr);
  return text_event("log", std::move(p));
}

}  // namespace liguard::service
