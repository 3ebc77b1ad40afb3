#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <thread>

#include "liguard/core/error.hpp"

namespace liguard::io {

/// Time source in seconds. Injected so replay timing is testable.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;
  virtual void sleep_until(double t) = 0;
};

class SteadyClock final : public Clock {
 public:
  double now() override {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
  }
  void sleep_until(double t) override {
    const double dt = t - now();
    if (dt > 0) std::this_thread::sleep_for(std::chrono::duration<double>(dt));
  }
};

/// Manually advanced clock; sleeping jumps straight to the deadline.
class FakeClock final : public Clock {
 public:
  explicit FakeClock(double start = 0.0) : t_(start) {}
  double now() override { return t_; }
  void sleep_until(double t) override {
    if (t > t_) t_ = t;
  }
  void advance(double dt) { t_ += dt; }

 private:
  double t_;
};

/// Simulated live sensor replaying a recorded index.
///
/// Frame k becomes available at start + k / hz. A consumer that keeps up gets
/// every frame; one that falls behind gets the newest available frame and the
/// skipped ones count as dropped. Delivered indices are strictly increasing.
class ReplaySensor {
 public:
  ReplaySensor(std::size_t total, double hz, Clock& clock)
      : total_(total), hz_(hz), clock_(clock) {
    if (!(hz > 0)) throw ConfigError("replay_hz must be > 0");
    start_ = clock_.now();
  }

  /// Index of the next delivered frame; nullopt at end of stream.
  std::optional<std::size_t> next() {
    const std::size_t wanted = last_ ? *last_ + 1 : 0;
    if (wanted >= total_) return std::nullopt;
    const double elapsed = clock_.now() - start_;
    // Small epsilon so a frame due exactly "now" counts as available.
    const double produced = std::floor(elapsed * hz_ + 1e-9);
    std::size_t latest = produced < 0 ? 0 : static_cast<std::size_t>(produced);
    if (latest >= total_) latest = total_ - 1;
    std::size_t deliver = wanted;
    if (produced < static_cast<double>(wanted)) {
      clock_.sleep_until(start_ + static_cast<double>(wanted) / hz_);
    } else {
      deliver = latest;
      dropped_ += latest - wanted;
    }
    last_ = deliver;
    ++delivered_;
    return deliver;
  }

  std::size_t delivered() const { return delivered_; }
  std::size_t dropped() const { return dropped_; }
  std::size_t total() const { return total_; }

 private:
  std::size_t total_;
  double hz_;
  Clock& clock_;
  double start_ = 0.0;
  std::optional<std::size_t> last_;
  std::size_t delivered_ = 0;
  std::size_t dropped_ = 0;
};

}  // namespace liguard::io
