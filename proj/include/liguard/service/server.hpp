#pragma once

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <algorithm>
#include <atomic>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "liguard/io/bytes.hpp"
#include "liguard/service/protocol.hpp"
#include "liguard/service/session.hpp"

namespace liguard::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
namespace fs = std::filesystem;

struct ServerOptions {
  std::string address = "127.0.0.1";
  /// 0 picks a free port; see Server::port().
  unsigned short port = 0;
  std::optional<fs::path> web_root;
  /// Frame events a client may have queued before the oldest is dropped.
  std::size_t max_pending_frames = 2;
};

inline constexpr const char* kBuiltinIndex =
    "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>liguard</title></head>\n"
    "<body><h1>liguard</h1><p>Control service is running. Connect a WebSocket client with "
    "subprotocol <code>liguard-proto/1</code>.</p></body></html>\n";

/// True when a Sec-WebSocket-Protocol header offers `proto`.
inline bool offers_subprotocol(std::string_view header, std::string_view proto) {
  std::size_t pos = 0;
  while (pos <= header.size()) {
    std::size_t end = header.find(',', pos);
    if (end == std::string_view::npos) end = header.size();
    auto tok = header.substr(pos, end - pos);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (tok == proto) return true;
    pos = end + 1;
  }
  return false;
}

inline std::string mime_type(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

namespace server_detail {

class WsConnection;

/// State shared with the session sink; outlives the Server if a sink call
/// is still in flight while it shuts down.
struct Hub {
  net::io_context ioc{1};
  std::vector<std::weak_ptr<WsConnection>> clients;
  std::atomic<std::size_t> client_count{0};

  void prune() {
    clients.erase(std::remove_if(clients.begin(), clients.end(), [](const auto& w) { return w.expired(); }),
                  clients.end());
    client_count = clients.size();
  }
};

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(beast::tcp_stream stream, Session& session, std::weak_ptr<Hub> hub, std::size_t max_pending)
      : ws_(std::move(stream)), session_(session), hub_(std::move(hub)), max_pending_(max_pending) {
    for (const auto& c : event_channels()) channels_.insert(c);
  }

  void run(http::request<http::string_body> req) {
    beast::get_lowest_layer(ws_).expires_never();
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.set_option(websocket::stream_base::decorator([](websocket::response_type& res) {
      res.set(http::field::sec_websocket_protocol, kProtocol);
      res.set(http::field::server, "liguard");
    }));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  /// Queues one outbound message, dropping the oldest pending frame event
  /// when a slow client is already `max_pending` behind.
  void deliver(const OutboundPtr& msg) {
    if (closed_) return;
    if (!msg->channel.empty() && !channels_.count(msg->channel)) return;
    if (msg->droppable) {
      std::size_t pending = 0;
      for (const auto& m : queue_) pending += m->droppable;
      while (pending >= max_pending_ && pending > 0) {
        auto it = std::find_if(queue_.begin(), queue_.end(), [](const auto& m) { return m->droppable; });
        queue_.erase(it);
        --pending;
        ++dropped_;
      }
      if (max_pending_ == 0) {
        ++dropped_;
        return;
      }
    }
    queue_.push_back(msg);
    if (!writing_) write_next();
  }

  std::size_t dropped() const { return dropped_; }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    auto hub = hub_.lock();
    if (!hub) return;
    hub->clients.push_back(weak_from_this());
    hub->client_count = hub->clients.size();
    std::weak_ptr<WsConnection> weak = weak_from_this();
    session_.async([weak, w = hub_](engine::Engine& e) {
      auto hub = w.lock();
      if (!hub) return;
      auto state = std::make_shared<const Outbound>(text_event("state", state_payload(e.state())));
      auto config = std::make_shared<const Outbound>(text_event("config", config_to_json(e.config())));
      net::post(hub->ioc, [weak, state, config] {
        if (auto c = weak.lock()) {
          c->deliver(state);
          c->deliver(config);
        }
      });
    });
    read();
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      close();
      return;
    }
    const bool text = ws_.got_text();
    const std::string body = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    if (!text) {
      reply(error_response(nullptr, "malformed request: binary frames are not accepted"));
    } else {
      handle(body);
    }
    read();
  }

  void handle(const std::string& body) {
    Request req;
    try {
      req = parse_request(body);
    } catch (const ParseError& e) {
      reply(error_response(nullptr, e.what()));
      return;
    }
    if (req.cmd == "subscribe") {
      subscribe(req);
      return;
    }
    std::weak_ptr<WsConnection> weak = weak_from_this();
    session_.submit(std::move(req), [weak, w = hub_](json resp, std::vector<OutboundPtr> direct) {
      auto hub = w.lock();
      if (!hub) return;
      net::post(hub->ioc, [weak, resp = std::move(resp), direct = std::move(direct)] {
        if (auto c = weak.lock()) {
          c->reply(resp);
          for (const auto& d : direct) c->deliver(d);
        }
      });
    });
  }

  void subscribe(const Request& req) {
    std::set<std::string> next;
    if (!req.args.contains("channels")) {
      next.insert(event_channels().begin(), event_channels().end());
    } else {
      const auto& list = req.args["channels"];
      if (!list.is_array()) {
        reply(error_response(req.id, "arg 'channels' must be an array"));
        return;
      }
      for (const auto& c : list) {
        const auto& known = event_channels();
        if (!c.is_string() || std::find(known.begin(), known.end(), c.get<std::string>()) == known.end()) {
          reply(error_response(req.id, "unknown channel " + c.dump()));
          return;
        }
        next.insert(c.get<std::string>());
      }
    }
    channels_ = std::move(next);
    queue_.erase(std::remove_if(queue_.begin(), queue_.end(),
                                [&](const auto& m) { return !m->channel.empty() && !channels_.count(m->channel); }),
                 queue_.end());
    reply(ok_response(req.id, {{"channels", json(std::vector<std::string>(channels_.begin(), channels_.end()))}}));
  }

  void reply(const json& resp) {
    auto out = std::make_shared<Outbound>();
    out->text = resp.dump();
    deliver(out);
  }

  void write_next() {
    if (!writing_) {
      if (queue_.empty()) return;
      writing_ = queue_.front();
      queue_.pop_front();
      part_ = 0;
    }
    const bool is_text = part_ == 0;
    const std::string& data = is_text ? writing_->text : writing_->binary[part_ - 1];
    ws_.text(is_text);
    ws_.binary(!is_text);
    ws_.async_write(net::buffer(data), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_write(ec);
    });
  }

  void on_write(beast::error_code ec) {
    if (ec) {
      close();
      return;
    }
    if (++part_ > writing_->binary.size()) writing_.reset();
    write_next();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    if (auto hub = hub_.lock()) {
      Hub* raw = hub.get();
      net::post(hub->ioc, [raw] { raw->prune(); });
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  Session& session_;
  std::weak_ptr<Hub> hub_;
  std::size_t max_pending_;
  beast::flat_buffer buffer_;
  std::deque<OutboundPtr> queue_;
  OutboundPtr writing_;
  std::size_t part_ = 0;
  std::set<std::string> channels_;
  std::size_t dropped_ = 0;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, Session& session, std::weak_ptr<Hub> hub, const ServerOptions& opts)
      : stream_(std::move(socket)), session_(session), hub_(std::move(hub)), opts_(opts) {}

  void run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

 private:
  void on_read(beast::error_code ec) {
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      const auto offered = req_[http::field::sec_websocket_protocol];
      if (!offers_subprotocol(std::string_view(offered.data(), offered.size()), kProtocol)) {
        respond(http::status::bad_request, "text/plain",
                std::string("websocket subprotocol ") + kProtocol + " required\n");
        return;
      }
      std::make_shared<WsConnection>(std::move(stream_), session_, hub_, opts_.max_pending_frames)
          ->run(std::move(req_));
      return;
    }
    if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
      respond(http::status::method_not_allowed, "text/plain", "method not allowed\n");
      return;
    }
    serve_static(std::string(req_.target()));
  }

  void serve_static(std::string target) {
    if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (target.empty() || target.front() != '/' || target.find("..") != std::string::npos) {
      respond(http::status::bad_request, "text/plain", "bad path\n");
      return;
    }
    if (target == "/") target = "/index.html";
    if (opts_.web_root) {
      const fs::path p = *opts_.web_root / target.substr(1);
      std::error_code ec;
      if (fs::is_regular_file(p, ec)) {
        respond(http::status::ok, mime_type(p), io::read_file(p));
        return;
      }
    }
    if (target == "/index.html") {
      respond(http::status::ok, "text/html", kBuiltinIndex);
      return;
    }
    respond(http::status::not_found, "text/plain", "not found\n");
  }

  void respond(http::status status, const std::string& type, std::string body) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::server, "liguard");
    res->set(http::field::content_type, type);
    res->keep_alive(false);
    if (req_.method() != http::verb::head) res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  Session& session_;
  std::weak_ptr<Hub> hub_;
  const ServerOptions& opts_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace server_detail

/// HTTP and WebSocket front end for one Session.
///
/// All sockets run on one I/O thread. Session events are broadcast to every
/// connected client that subscribed to the event's channel.
class Server {
 public:
  Server(Session& session, ServerOptions opts = {}) : session_(session), opts_(std::move(opts)) {}
  ~Server() { stop(); }
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds, starts the I/O thread and hooks the session's event sink.
  void start() {
    if (thread_.joinable()) return;
    hub_ = std::make_shared<server_detail::Hub>();
    acceptor_.emplace(hub_->ioc);
    const tcp::endpoint ep(net::ip::make_address(opts_.address), opts_.port);
    beast::error_code ec;
    acceptor_->open(ep.protocol(), ec);
    if (!ec) acceptor_->set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_->bind(ep, ec);
    if (!ec) acceptor_->listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw IoError("cannot listen on " + opts_.address + ":" + std::to_string(opts_.port) + ": " + ec.message());
    port_ = acceptor_->local_endpoint().port();

    std::weak_ptr<server_detail::Hub> weak = hub_;
    session_.set_sink([weak](OutboundPtr msg) {
      auto hub = weak.lock();
      if (!hub) return;
      server_detail::Hub* raw = hub.get();
      net::post(hub->ioc, [raw, msg] {
        for (const auto& w : raw->clients) {
          if (auto c = w.lock()) c->deliver(msg);
        }
      });
    });
    accept();
    thread_ = std::thread([hub = hub_.get()] { hub->ioc.run(); });
  }

  void stop() {
    if (!thread_.joinable()) return;
    session_.set_sink(nullptr);
    hub_->ioc.stop();
    thread_.join();
    acceptor_.reset();
    hub_.reset();
  }

  unsigned short port() const { return port_; }
  std::size_t client_count() const { return hub_ ? hub_->client_count.load() : 0; }

 private:
  void accept() {
    acceptor_->async_accept(net::make_strand(hub_->ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<server_detail::HttpSession>(std::move(socket), session_, hub_, opts_)->run();
      accept();
    });
  }

  Session& session_;
  ServerOptions opts_;
  std::shared_ptr<server_detail::Hub> hub_;
  std::optional<tcp::acceptor> acceptor_;
  std::thread thread_;
  unsigned short port_ = 0;
};

}  // namespace liguard::service
