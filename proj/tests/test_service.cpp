#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <deque>
#include <map>

#include "liguard/io/png.hpp"
#include "liguard/service/server.hpp"
#include "liguard/sim/scenes.hpp"
#include "test_util.hpp"

using namespace liguard;
using namespace liguard::service;
using liguard::test::TempDir;

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

std::vector<Frame> cloud_frames(std::size_t count, std::size_t points) {
  std::vector<Frame> frames(count);
  for (auto& f : frames) {
    PointCloud pc;
    for (std::size_t i = 0; i < points; ++i) pc.points.push_back({static_cast<double>(i) + 0.5, 0, 0, 0});
    f.set_point_cloud(pc);
  }
  return frames;
}

engine::Engine memory_engine(std::size_t frames = 10, std::size_t points = 10) {
  return engine::Engine(engine::default_config(), std::make_shared<engine::MemorySource>(cloud_frames(frames, points)));
}

/// Blocking WebSocket client with a per-read timeout.
class Client {
 public:
  explicit Client(unsigned short port, bool offer_protocol = true) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    if (offer_protocol) {
      ws_.set_option(websocket::stream_base::decorator(
          [](websocket::request_type& req) { req.set(http::field::sec_websocket_protocol, "liguard-proto/1"); }));
    }
    ws_.handshake(response_, "127.0.0.1", "/");
  }

  const websocket::response_type& response() const { return response_; }

  void send(const std::string& text) {
    ws_.text(true);
    ws_.write(net::buffer(text));
  }

  void send(const json& j) { send(j.dump()); }

  /// Next text message; binary frames are queued in binaries().
  json next() {
    while (true) {
      beast::flat_buffer buf;
      beast::error_code ec = net::error::would_block;
      ws_.async_read(buf, [&](beast::error_code e, std::size_t) { ec = e; });
      ioc_.restart();
      ioc_.run_for(std::chrono::seconds(10));
      if (ec == net::error::would_block) throw std::runtime_error("timed out reading");
      if (ec) throw beast::system_error(ec);
      std::string body = beast::buffers_to_string(buf.data());
      if (!ws_.got_text()) {
        binaries_.push_back(std::move(body));
        continue;
      }
      return json::parse(body);
    }
  }

  /// First message matching pred; messages skipped on the way are kept for
  /// later waits.
  json wait_for(const std::function<bool(const json&)>& pred) {
    for (auto it = backlog_.begin(); it != backlog_.end(); ++it) {
      if (pred(*it)) {
        json j = std::move(*it);
        backlog_.erase(it);
        return j;
      }
    }
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(20);
    while (std::chrono::steady_clock::now() < deadline) {
      json j = next();
      if (pred(j)) return j;
      backlog_.push_back(std::move(j));
    }
    throw std::runtime_error("timed out waiting for message");
  }

  json wait_event(const std::string& type) {
    return wait_for([&](const json& j) { return j.value("type", "") == type; });
  }

  json request(const std::string& cmd, json args = json::object(), json id = json(nullptr)) {
    if (id.is_null()) id = next_id_++;
    send(json{{"id", id}, {"cmd", cmd}, {"args", std::move(args)}});
    return wait_for([&](const json& j) { return j.contains("ok") && j["id"] == id; });
  }

  std::deque<std::string>& binaries() { return binaries_; }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
  websocket::response_type response_;
  std::deque<std::string> binaries_;
  std::deque<json> backlog_;
  std::int64_t next_id_ = 1000;
};

struct Running {
  explicit Running(engine::Engine e) : session(std::move(e)), server(session) {
    server.start();
    session.start();
  }
  ~Running() {
    server.stop();
    session.stop();
  }
  Session session;
  Server server;
};

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_file(e.path());
  }
  return out;
}

}  // namespace

TEST(Protocol, ParseRequest) {
  const auto r = parse_request(R"({"id": "a1", "cmd": "seek", "args": {"n": 3}})");
  EXPECT_EQ(r.id, "a1");
  EXPECT_EQ(r.cmd, "seek");
  EXPECT_EQ(r.args["n"], 3);
  EXPECT_TRUE(parse_request(R"({"cmd": "play"})").id.is_null());
  EXPECT_THROW(parse_request("{nope"), ParseError);
  EXPECT_THROW(parse_request("[1, 2]"), ParseError);
  EXPECT_THROW(parse_request(R"({"id": 1})"), ParseError);
  EXPECT_THROW(parse_request(R"({"cmd": 5})"), ParseError);
  EXPECT_THROW(parse_request(R"({"cmd": "x", "args": 3})"), ParseError);
}

TEST(Protocol, Envelopes) {
  EXPECT_EQ(ok_response(7, {{"a", 1}}), json::parse(R"({"id": 7, "ok": true, "payload": {"a": 1}})"));
  EXPECT_EQ(error_response(nullptr, "bad"), json::parse(R"({"id": null, "ok": false, "error": "bad"})"));
  EXPECT_EQ(event("state", {{"x", 1}}), json::parse(R"({"type": "state", "payload": {"x": 1}})"));
  EXPECT_EQ(state_payload({4, true, 10}), json::parse(R"({"current": 4, "playing": true, "total": 10})"));
}

TEST(Protocol, AttachmentCodec) {
  const std::string raw("\x00\x01\xff payload", 11);
  const std::string enc = encode_attachment(0x01020304u, raw);
  EXPECT_EQ(enc.substr(0, 8), std::string("\x04\x03\x02\x01\x0b\x00\x00\x00", 8));
  const auto a = decode_attachment(enc);
  EXPECT_EQ(a.id, 0x01020304u);
  EXPECT_EQ(a.bytes, raw);
  EXPECT_THROW(decode_attachment("1234567"), ParseError);
  EXPECT_THROW(decode_attachment(enc.substr(0, enc.size() - 1)), ParseError);
  EXPECT_THROW(decode_le_array<float>("abc"), ParseError);
}

TEST(Protocol, StreamStride) {
  EXPECT_EQ(stream_stride(10, 0), 1u);
  EXPECT_EQ(stream_stride(10, 10), 1u);
  EXPECT_EQ(stream_stride(100, 10), 10u);
  EXPECT_EQ(stream_stride(101, 10), 11u);
  for (std::size_t n : {1u, 99u, 1000u, 123457u}) {
    for (std::size_t cap : {1u, 7u, 100u}) {
      const std::size_t s = stream_stride(n, cap);
      EXPECT_LE((n + s - 1) / s, cap);
      if (s > 1) EXPECT_GT((n + s - 2) / (s - 1), cap);
    }
  }
}

TEST(Protocol, FrameEventIsLossless) {
  Frame f;
  f.index = 3;
  f.stem = "000003";
  f.timestamp = 0.3;
  PointCloud pc;
  pc.colors.emplace();
  for (int i = 0; i < 5; ++i) {
    pc.points.push_back({0.25 * i, -1.5f + i, 3.0f * i, 0.5});
    pc.colors->push_back({0.2f * i, 1.0f, 0.0f});
  }
  f.set_point_cloud(pc);
  f.set_cluster_ids({0, 0, 1, -1, 1});
  ImageRaster img(3, 2);
  img.pixel(2, 1)[0] = 200;
  f.set_image(img);
  ObjectLabel l;
  l.class_name = "car";
  l.box3d.center = {1.1, 2.2, 3.3};
  l.box3d.extent = {4, 2, 1.5};
  l.box3d.yaw = 0.3;
  f.set_labels({l});
  f.log(LogLevel::warning, "lidar.crop", "hello");

  std::uint32_t next = 40;
  const auto out = frame_event(f, 0, next);
  EXPECT_EQ(next, 44u);
  const json j = json::parse(out.text);
  EXPECT_EQ(j["type"], "frame");
  const json& p = j["payload"];
  EXPECT_EQ(p["index"], 3);
  EXPECT_EQ(p["stem"], "000003");
  EXPECT_EQ(p["point_count"], 5);
  EXPECT_EQ(p["streamed_points"], 5);
  EXPECT_EQ(labels_from_json(p["labels"]), f.labels());
  EXPECT_EQ(p["logs"][0]["message"], "hello");
  EXPECT_EQ(p["logs"][0]["source"], "lidar.crop");

  std::map<std::uint32_t, std::string> by_id;
  for (const auto& b : out.binary) {
    auto a = decode_attachment(b);
    by_id[a.id] = a.bytes;
  }
  const auto xyz = decode_le_array<float>(by_id.at(p["attachments"]["points"]));
  ASSERT_EQ(xyz.size(), 15u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(xyz[3 * i], static_cast<float>(pc.points[i].x));
    EXPECT_EQ(xyz[3 * i + 1], static_cast<float>(pc.points[i].y));
    EXPECT_EQ(xyz[3 * i + 2], static_cast<float>(pc.points[i].z));
  }
  const std::string& cols = by_id.at(p["attachments"]["colors"]);
  ASSERT_EQ(cols.size(), 15u);
  EXPECT_EQ(static_cast<std::uint8_t>(cols[3 * 2]), 102);  // 0.4 * 255 = 102
  EXPECT_EQ(static_cast<std::uint8_t>(cols[3 * 2 + 1]), 255);
  EXPECT_EQ(decode_le_array<std::int32_t>(by_id.at(p["attachments"]["cluster_ids"])), *f.cluster_ids());
  EXPECT_EQ(io::read_image(by_id.at(p["attachments"]["image"])), img);
}

TEST(Protocol, FrameEventRespectsCap) {
  auto frames = cloud_frames(1, 1001);
  std::uint32_t next = 0;
  const auto out = frame_event(frames[0], 100, next);
  const json p = json::parse(out.text)["payload"];
  EXPECT_EQ(p["stride"], 11);
  EXPECT_EQ(p["streamed_points"], 91);
  EXPECT_EQ(p["point_count"], 1001);
  const auto xyz = decode_le_array<float>(decode_attachment(out.binary[0]).bytes);
  ASSERT_EQ(xyz.size(), 91u * 3);
  EXPECT_EQ(xyz[3], 11.5f);
}

TEST(Server, RejectsMissingSubprotocol) {
  Running r(memory_engine());
  try {
    Client c(r.server.port(), false);
    FAIL() << "handshake should fail";
  } catch (const beast::system_error&) {
  }
  Client ok(r.server.port());
  EXPECT_EQ(ok.response()[http::field::sec_websocket_protocol], "liguard-proto/1");
}

TEST(Server, ServesIndexOverHttp) {
  Running r(memory_engine());
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), r.server.port()));
  http::request<http::empty_body> req(http::verb::get, "/", 11);
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(stream, buf, res);
  EXPECT_EQ(res.result(), http::status::ok);
  EXPECT_NE(res.body().find("liguard-proto/1"), std::string::npos);
}

TEST(Server, StateAndConfigOnConnect) {
  Running r(memory_engine(7));
  Client c(r.server.port());
  const json state = c.wait_event("state");
  EXPECT_EQ(state["payload"], json::parse(R"({"current": -1, "playing": false, "total": 7})"));
  const json cfg = c.wait_event("config");
  EXPECT_EQ(cfg["payload"], config_to_json(engine::default_config()));
}

TEST(Server, UnknownAndMalformed) {
  Running r(memory_engine());
  Client c(r.server.port());
  const json u = c.request("frobnicate", json::object(), "x-1");
  EXPECT_EQ(u, json::parse(R"({"id": "x-1", "ok": false, "error": "unknown cmd"})"));
  c.send(std::string("{not json"));
  const json m = c.wait_for([](const json& j) { return j.contains("ok"); });
  EXPECT_TRUE(m["id"].is_null());
  EXPECT_FALSE(m["ok"]);
  const json bad = c.request("seek", {{"n", "three"}});
  EXPECT_FALSE(bad["ok"]);
  EXPECT_NE(bad["error"].get<std::string>().find("integer"), std::string::npos);
}

TEST(Server, IdsPairAcrossPipelinedRequests) {
  Running r(memory_engine());
  Client c(r.server.port());
  std::vector<json> ids;
  for (int i = 0; i < 20; ++i) {
    json id = i % 2 ? json(i) : json("s" + std::to_string(i));
    ids.push_back(id);
    c.send(json{{"id", id}, {"cmd", i % 3 ? "get_state" : "step"}});
  }
  std::vector<json> got;
  while (got.size() < ids.size()) {
    const json j = c.wait_for([](const json& m) { return m.contains("ok"); });
    got.push_back(j["id"]);
  }
  EXPECT_EQ(got, ids);
}

TEST(Server, PatchBroadcastsConfig) {
  Running r(memory_engine());
  Client a(r.server.port());
  Client b(r.server.port());
  a.wait_event("config");
  b.wait_event("config");
  const json resp = a.request("patch_config", {{"path", "proc.lidar.crop.enabled"}, {"value", true}});
  ASSERT_TRUE(resp["ok"]) << resp.dump();
  for (Client* c : {&a, &b}) {
    const json lidar = c->wait_event("config")["payload"]["proc"]["lidar"];
    const auto crop = std::find_if(lidar.begin(), lidar.end(), [](const json& f) { return f["name"] == "crop"; });
    ASSERT_NE(crop, lidar.end());
    EXPECT_EQ((*crop)["enabled"], true);
  }
}

TEST(Server, CropPatchThenStep) {
  Running r(memory_engine());
  Client c(r.server.port());
  ASSERT_TRUE(c.request("step")["ok"]);
  EXPECT_EQ(c.wait_event("frame")["payload"]["point_count"], 10);
  ASSERT_TRUE(c.request("patch_config", {{"path", "proc.lidar.crop.enabled"}, {"value", true}})["ok"]);
  ASSERT_TRUE(c.request("patch_config", {{"path", "proc.lidar.crop.max_x"}, {"value", 4}})["ok"]);
  const json s = c.request("step");
  EXPECT_EQ(s["payload"]["index"], 1);
  const json f = c.wait_event("frame");
  EXPECT_EQ(f["payload"]["index"], 1);
  EXPECT_EQ(f["payload"]["point_count"], 4);
  const json g = c.request("get_frame");
  EXPECT_EQ(g["payload"]["index"], 1);
  EXPECT_EQ(c.wait_event("frame")["payload"]["point_count"], 4);
}

TEST(Server, RejectedPatchLogsAndKeepsConfig) {
  Running r(memory_engine());
  Client c(r.server.port());
  const json resp = c.request("patch_config", {{"path", "proc.lidar.crop.priority"}, {"value", "high"}});
  EXPECT_FALSE(resp["ok"]);
  const json log = c.wait_event("log");
  EXPECT_EQ(log["payload"]["level"], "warning");
  EXPECT_NE(log["payload"]["message"].get<std::string>().find("patch rejected"), std::string::npos);
  EXPECT_EQ(c.request("get_config")["payload"], config_to_json(engine::default_config()));
}

TEST(Server, SubscribeFiltersChannels) {
  Running r(memory_engine());
  Client c(r.server.port());
  const json sub = c.request("subscribe", {{"channels", {"state"}}});
  EXPECT_EQ(sub["payload"]["channels"], json({"state"}));
  EXPECT_FALSE(c.request("subscribe", {{"channels", {"bogus"}}})["ok"]);
  c.request("step");
  c.request("play");
  const json ev = c.wait_for([](const json& j) { return j.contains("type"); });
  EXPECT_EQ(ev["type"], "state");
}

TEST(Server, ServeMatchesHeadlessRun) {
  TempDir tmp;
  const auto scene = sim::roadside_scene(7, 6);
  const auto head = tmp.path() / "headless";
  const auto served = tmp.path() / "served";
  sim::write_roadside_pipeline(head, scene);
  sim::write_roadside_pipeline(served, scene);

  auto e = engine::Engine::open(head);
  e.run_all();

  {
    Running r(engine::Engine::open(served));
    Client c(r.server.port());
    c.wait_event("state");
    ASSERT_TRUE(c.request("play")["ok"]);
    c.wait_for([](const json& j) {
      return j.value("type", "") == "state" && !j["payload"]["playing"].get<bool>() && j["payload"]["current"] == 5;
    });
  }
  const auto a = read_tree(head / "outputs");
  const auto b = read_tree(served / "outputs");
  EXPECT_EQ(a.size(), 12u);
  EXPECT_TRUE(a == b);
}
