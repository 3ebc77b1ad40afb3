#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "liguard/core/json.hpp"
#include "liguard/engine/engine.hpp"
#include "liguard/service/protocol.hpp"

namespace liguard::service {

using OutboundPtr = std::shared_ptr<const Outbound>;

/// Runs one Engine on its own thread.
///
/// Commands from any thread are queued and executed between frames, so a
/// patch never lands in the middle of a frame. Events go to the sink, which
/// is called on the session thread.
class Session {
 public:
  using Sink = std::function<void(OutboundPtr)>;
  using Reply = std::function<void(json response, std::vector<OutboundPtr> direct)>;

  explicit Session(engine::Engine engine) : engine_(std::move(engine)) {
    engine_.on_frame([this](const Frame& f) { publish_frame(f); });
  }

  ~Session() { stop(); }
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  void set_sink(Sink sink) {
    std::lock_guard lock(mu_);
    sink_ = std::move(sink);
  }

  void start() {
    std::lock_guard lock(mu_);
    if (thread_.joinable()) return;
    stopping_ = false;
    thread_ = std::thread([this] { loop(); });
  }

  void stop() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
  }

  /// Queues a request; `reply` runs on the session thread.
  void submit(Request req, Reply reply) {
    post([this, req = std::move(req), reply = std::move(reply)](engine::Engine&) {
      std::vector<OutboundPtr> direct;
      json resp = dispatch(req, direct);
      if (reply) reply(std::move(resp), std::move(direct));
    });
  }

  /// Runs fn(engine) on the session thread and waits for its result.
  template <class F>
  auto call(F&& fn) -> decltype(fn(std::declval<engine::Engine&>())) {
    using R = decltype(fn(std::declval<engine::Engine&>()));
    auto task = std::make_shared<std::packaged_task<R(engine::Engine&)>>(std::forward<F>(fn));
    auto fut = task->get_future();
    post([task](engine::Engine& e) { (*task)(e); });
    return fut.get();
  }

  /// Queues fn(engine) on the session thread without waiting.
  void async(std::function<void(engine::Engine&)> fn) { post(std::move(fn)); }

  /// Direct access for single-threaded use before start() or after stop().
  engine::Engine& engine() { return engine_; }

 private:
  using Task = std::function<void(engine::Engine&)>;

  void post(Task t) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back(std::move(t));
    }
    cv_.notify_all();
  }

  void emit(OutboundPtr ev) {
    Sink sink;
    {
      std::lock_guard lock(mu_);
      sink = sink_;
    }
    if (sink) sink(std::move(ev));
  }

  void emit_state() { emit(std::make_shared<Outbound>(text_event("state", state_payload(engine_.state())))); }

  void emit_config() { emit(std::make_shared<Outbound>(text_event("config", config_to_json(engine_.config())))); }

  void emit_log(LogLevel level, const std::string& msg) {
    emit(std::make_shared<Outbound>(log_event({level, "engine", msg}, std::nullopt)));
  }

  void publish_frame(const Frame& f) {
    const auto cap = static_cast<std::size_t>(engine_.config().visualization.max_stream_points);
    emit(std::make_shared<Outbound>(frame_event(f, cap, next_attachment_)));
    for (const auto& e : f.logs) emit(std::make_shared<Outbound>(log_event(e, f.index)));
  }

  void loop() {
    std::unique_lock lock(mu_);
    while (true) {
      if (stopping_) return;
      if (!queue_.empty()) {
        auto task = std::move(queue_.front());
        queue_.pop_front();
        lock.unlock();
        task(engine_);
        lock.lock();
        continue;
      }
      if (auto due = engine_.next_due()) {
        const double wait = *due - engine_.clock().now();
        if (wait > 0) {
          cv_.wait_for(lock, std::chrono::duration<double>(wait));
          continue;
        }
        lock.unlock();
        const bool was_playing = engine_.state().playing;
        engine_.tick();
        if (was_playing && !engine_.state().playing) emit_state();
        lock.lock();
        continue;
      }
      cv_.wait(lock);
    }
  }

  static const json& arg(const Request& r, const char* name) {
    if (!r.args.contains(name)) throw ParamError(std::string("missing arg '") + name + "'");
    return r.args[name];
  }

  static std::string string_arg(const Request& r, const char* name) {
    const auto& v = arg(r, name);
    if (!v.is_string()) throw ParamError(std::string("arg '") + name + "' must be a string");
    return v.get<std::string>();
  }

  static std::int64_t int_arg(const Request& r, const char* name) {
    const auto& v = arg(r, name);
    if (!v.is_number_integer()) throw ParamError(std::string("arg '") + name + "' must be an integer");
    return v.get<std::int64_t>();
  }

  json frame_reply(const Frame* f) {
    json p = state_payload(engine_.state());
    p["index"] = f ? json(f->index) : json(nullptr);
    return p;
  }

  json dispatch(const Request& r, std::vector<OutboundPtr>& direct) {
    try {
      if (r.cmd == "get_config") return ok_response(r.id, config_to_json(engine_.config()));
      if (r.cmd == "get_state") return ok_response(r.id, state_payload(engine_.state()));
      if (r.cmd == "patch_config") {
        const std::string path = string_arg(r, "path");
        try {
          engine_.patch(path, arg(r, "value"));
        } catch (const PatchRejected& e) {
          emit_log(LogLevel::warning, std::string("patch rejected: ") + e.what());
          return error_response(r.id, e.what());
        }
        emit_config();
        return ok_response(r.id, config_to_json(engine_.config()));
      }
      if (r.cmd == "toggle_function") {
        const Category c = parse_category(string_arg(r, "category"));
        try {
          engine_.toggle(c, string_arg(r, "name"));
        } catch (const PatchRejected& e) {
          emit_log(LogLevel::warning, std::string("patch rejected: ") + e.what());
          return error_response(r.id, e.what());
        }
        emit_config();
        return ok_response(r.id, config_to_json(engine_.config()));
      }
      if (r.cmd == "scaffold_function") {
        auto files = engine_.scaffold(string_arg(r, "category"), string_arg(r, "name"));
        json list = json::array();
        for (const auto& f : files) list.push_back(f.string());
        emit_config();
        return ok_response(r.id, {{"files", list}});
      }
      if (r.cmd == "play") {
        engine_.play();
        emit_state();
        return ok_response(r.id, state_payload(engine_.state()));
      }
      if (r.cmd == "pause") {
        engine_.pause();
        emit_state();
        return ok_response(r.id, state_payload(engine_.state()));
      }
      if (r.cmd == "step") {
        const Frame* f = engine_.step();
        if (!f) emit_state();
        return ok_response(r.id, frame_reply(f));
      }
      if (r.cmd == "seek") return ok_response(r.id, frame_reply(engine_.seek(int_arg(r, "n"))));
      if (r.cmd == "get_frame") {
        const auto& last = engine_.last_frame();
        const bool wants_other = r.args.contains("n") && (!last || int_arg(r, "n") != static_cast<std::int64_t>(last->index));
        if (wants_other) return ok_response(r.id, frame_reply(engine_.seek(int_arg(r, "n"))));
        if (last) {
          auto ev = frame_event(*last, static_cast<std::size_t>(engine_.config().visualization.max_stream_points),
                                next_attachment_);
          ev.droppable = false;
          direct.push_back(std::make_shared<Outbound>(std::move(ev)));
        }
        return ok_response(r.id, frame_reply(last ? &*last : nullptr));
      }
      return error_response(r.id, "unknown cmd");
    } catch (const std::exception& e) {
      return error_response(r.id, e.what());
    }
  }

  engine::Engine engine_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Task> queue_;
  Sink sink_;
  bool stopping_ = false;
  std::thread thread_;
  std::uint32_t next_attachment_ = 0;
};

}  // namespace liguard::service
