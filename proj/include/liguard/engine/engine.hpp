#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "liguard/core/config.hpp"
#include "liguard/core/error.hpp"
#include "liguard/core/frame.hpp"
#include "liguard/engine/builtins.hpp"
#include "liguard/engine/pipeline_dir.hpp"
#include "liguard/engine/registry.hpp"
#include "liguard/engine/schedule.hpp"
#include "liguard/io/dataset.hpp"
#include "liguard/io/replay.hpp"

namespace liguard::engine {

/// Where frames come from: index -> freshly loaded frame.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::size_t size() const = 0;
  virtual Frame load(std::size_t index) const = 0;
};

class DatasetSource final : public FrameSource {
 public:
  DatasetSource(io::FrameIndex index, double replay_hz) : index_(std::move(index)), hz_(replay_hz) {}
  std::size_t size() const override { return index_.size(); }
  Frame load(std::size_t i) const override { return io::load_frame(index_.frames.at(i), i, hz_); }
  const io::FrameIndex& index() const { return index_; }

 private:
  io::FrameIndex index_;
  double hz_;
};

/// Frames held in memory; mostly for tests and embedding.
class MemorySource final : public FrameSource {
 public:
  explicit MemorySource(std::vector<Frame> frames) : frames_(std::move(frames)) {
    for (std::size_t i = 0; i < frames_.size(); ++i) frames_[i].index = i;
  }
  std::size_t size() const override { return frames_.size(); }
  Frame load(std::size_t i) const override { return frames_.at(i); }

 private:
  std::vector<Frame> frames_;
};

struct PlaybackState {
  /// Last processed frame, -1 before the first.
  std::int64_t current = -1;
  bool playing = false;
  std::size_t total = 0;

  bool operator==(const PlaybackState&) const = default;
};

struct RunSummary {
  std::size_t frames = 0;
  std::size_t dropped = 0;
  std::size_t errors = 0;
  std::size_t io_errors = 0;
  std::size_t warnings = 0;
  TimingTable timings;
};

/// One pipeline: config, registry, frame source, schedule and playback.
///
/// Not thread-safe; a Session serializes access from other threads.
class Engine {
 public:
  using FrameListener = std::function<void(const Frame&)>;

  Engine(PipelineConfig config, std::shared_ptr<const FrameSource> source, fs::path pipeline_dir = ".",
         FunctionRegistry registry = builtin_registry(), std::shared_ptr<io::Clock> clock = nullptr)
      : config_(std::move(config)),
        registry_(std::move(registry)),
        source_(std::move(source)),
        dir_(std::move(pipeline_dir)),
        clock_(clock ? std::move(clock) : std::make_shared<io::SteadyClock>()) {
    schedule_ = build_schedule(config_, registry_);
    wire_context();
  }

  /// Opens a pipeline directory: base_config.yml, custom functions, dataset.
  static Engine open(const fs::path& dir, std::shared_ptr<io::Clock> clock = nullptr) {
    const fs::path cfg_path = base_config_path(dir);
    if (!fs::exists(cfg_path)) throw ConfigError("missing " + cfg_path.string());
    PipelineConfig cfg = load_config(cfg_path);
    FunctionRegistry reg = builtin_registry();
    auto warnings = discover_custom_functions(dir, reg, cfg);
    auto index = io::scan_dataset(cfg.data, dir);
    warnings.insert(warnings.end(), index.warnings.begin(), index.warnings.end());
    auto source = std::make_shared<DatasetSource>(std::move(index), cfg.data.replay_hz);
    Engine e(std::move(cfg), std::move(source), dir, std::move(reg), std::move(clock));
    e.startup_warnings_ = std::move(warnings);
    return e;
  }

  const PipelineConfig& config() const { return config_; }
  const FunctionRegistry& registry() const { return registry_; }
  const Schedule& schedule() const { return schedule_; }
  const fs::path& pipeline_dir() const { return dir_; }
  const std::vector<std::string>& startup_warnings() const { return startup_warnings_; }
  std::size_t total() const { return source_->size(); }
  FunctionContext& context() { return ctx_; }
  io::Clock& clock() { return *clock_; }

  PlaybackState state() const { return {current_, playing_, total()}; }
  const std::optional<Frame>& last_frame() const { return last_; }

  void on_frame(FrameListener fn) { listener_ = std::move(fn); }

  // --- configuration --------------------------------------------------------

  /// Applies one patch; the next processed frame uses the new schedule.
  const PipelineConfig& patch(const std::string& path, const ParamValue& value) {
    return commit(apply_config_patch(config_, path, value, registry_));
  }

  const PipelineConfig& patch(const std::string& path, const nlohmann::json& value) {
    return commit(apply_config_patch(config_, path, value, registry_));
  }

  const PipelineConfig& toggle(Category c, const std::string& name) {
    const FunctionEntry* e = config_.find(c, name);
    if (!e) throw PatchRejected("no function '" + name + "' in " + std::string(category_name(c)));
    return patch("proc." + std::string(category_name(c)) + "." + name + ".enabled", ParamValue{!e->enabled});
  }

  /// Replaces the whole config after validating that it schedules.
  const PipelineConfig& set_config(PipelineConfig cfg) {
    schedule_ = build_schedule(cfg, registry_);
    config_ = std::move(cfg);
    return config_;
  }

  /// Re-discovers custom functions; the in-memory config keeps its edits.
  std::vector<std::string> reload() {
    PipelineConfig cfg = config_;
    FunctionRegistry reg = registry_;
    auto warnings = discover_custom_functions(dir_, reg, cfg);
    Schedule sched = build_schedule(cfg, reg);
    registry_ = std::move(reg);
    config_ = std::move(cfg);
    schedule_ = std::move(sched);
    return warnings;
  }

  std::vector<fs::path> scaffold(const std::string& category, const std::string& name) {
    auto files = scaffold_custom_function(dir_, category, name, builtin_registry());
    reload();
    return files;
  }

  // --- playback ---------------------------------------------------------------

  /// Loads and processes frame `index` with the current schedule.
  const Frame& process(std::size_t index) {
    Frame f = source_->load(index);
    execute_frame(f, schedule_, config_, ctx_, &timings_);
    current_ = static_cast<std::int64_t>(index);
    last_ = std::move(f);
    if (listener_) listener_(*last_);
    return *last_;
  }

  /// Processes the frame after the current one; nullopt at the end.
  const Frame* step() {
    const auto next = static_cast<std::size_t>(current_ + 1);
    if (next >= total()) {
      playing_ = false;
      return nullptr;
    }
    return &process(next);
  }

  /// Jumps to frame n (clamped into range) and processes it.
  const Frame* seek(std::int64_t n) {
    if (total() == 0) return nullptr;
    std::optional<std::string> warning;
    const auto last = static_cast<std::int64_t>(total()) - 1;
    if (n < 0 || n > last) {
      const std::int64_t clamped = std::clamp<std::int64_t>(n, 0, last);
      warning = "seek(" + std::to_string(n) + ") out of range; clamped to " + std::to_string(clamped);
      n = clamped;
    }
    Frame f = source_->load(static_cast<std::size_t>(n));
    if (warning) f.log(LogLevel::warning, "engine", *warning);
    execute_frame(f, schedule_, config_, ctx_, &timings_);
    current_ = n;
    last_ = std::move(f);
    if (listener_) listener_(*last_);
    return &*last_;
  }

  void play() {
    if (static_cast<std::size_t>(current_ + 1) >= total()) return;
    playing_ = true;
    next_due_ = clock_->now();
  }

  void pause() { playing_ = false; }

  /// Seconds until the next frame is due while playing.
  std::optional<double> next_due() const {
    if (!playing_) return std::nullopt;
    return next_due_;
  }

  /// Processes one frame if playing and due. Stops at the end of the data.
  const Frame* tick() {
    if (!playing_) return nullptr;
    const double now = clock_->now();
    if (now < next_due_) return nullptr;
    const Frame* f = step();
    next_due_ = std::max(next_due_ + 1.0 / config_.data.replay_hz, now);
    if (static_cast<std::size_t>(current_ + 1) >= total()) playing_ = false;
    return f;
  }

  // --- batch ------------------------------------------------------------------

  /// Processes every frame from the start, or through the replay sensor when
  /// data.live_replay is set.
  RunSummary run_all(const std::function<void(const Frame&)>& each = nullptr) {
    timings_.clear();
    ctx_.clear_state();
    current_ = -1;
    RunSummary s;
    auto account = [&](const Frame& f) {
      ++s.frames;
      for (const auto& e : f.logs) {
        if (e.level == LogLevel::error) {
          ++s.errors;
          if (e.source == "reader") ++s.io_errors;
        }
        if (e.level == LogLevel::warning) ++s.warnings;
      }
      if (each) each(f);
    };
    if (config_.data.live_replay) {
      io::ReplaySensor sensor(total(), config_.data.replay_hz, *clock_);
      while (auto i = sensor.next()) account(process(*i));
      s.dropped = sensor.dropped();
    } else {
      for (std::size_t i = 0; i < total(); ++i) account(process(i));
    }
    s.timings = timings_;
    for (const auto& [name, t] : timings_) s.io_errors += t.io_errors;
    return s;
  }

  const TimingTable& timings() const { return timings_; }

 private:
  const PipelineConfig& commit(PipelineConfig cfg) {
    Schedule sched;
    try {
      sched = build_schedule(cfg, registry_);
    } catch (const ScheduleError& e) {
      throw PatchRejected(e.what());
    }
    config_ = std::move(cfg);
    schedule_ = std::move(sched);
    return config_;
  }

  void wire_context() {
    ctx_.pipeline_dir = dir_;
    ctx_.total_frames = source_->size();
    std::weak_ptr<const FrameSource> weak = source_;
    ctx_.load_cloud = [weak](std::size_t i) -> std::optional<PointCloud> {
      auto src = weak.lock();
      if (!src || i >= src->size()) return std::nullopt;
      return src->load(i).point_cloud();
    };
  }

  PipelineConfig config_;
  FunctionRegistry registry_;
  std::shared_ptr<const FrameSource> source_;
  fs::path dir_;
  std::shared_ptr<io::Clock> clock_;
  Schedule schedule_;
  FunctionContext ctx_;
  TimingTable timings_;
  std::vector<std::string> startup_warnings_;
  std::int64_t current_ = -1;
  bool playing_ = false;
  double next_due_ = 0.0;
  std::optional<Frame> last_;
  FrameListener listener_;
};

}  // namespace liguard::engine
