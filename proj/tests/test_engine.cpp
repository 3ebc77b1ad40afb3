#include <gtest/gtest.h>

#include <cstdlib>

#include "liguard/engine/engine.hpp"
#include "liguard/io/bytes.hpp"
#include "test_util.hpp"

using namespace liguard;
using namespace liguard::engine;
using liguard::test::TempDir;

namespace {

std::vector<std::string> names(const Schedule& s) {
  std::vector<std::string> out;
  for (const auto& it : s) out.push_back(it.qualified_name());
  return out;
}

FunctionSpec noop(Category c, std::string name, std::vector<Slot> slots = {}) {
  FunctionSpec s;
  s.category = c;
  s.name = std::move(name);
  s.requires_slots = std::move(slots);
  s.run = [](Frame&, const ParamMap&, const PipelineConfig&, FunctionContext&) {};
  return s;
}

void enable(PipelineConfig& cfg, Category c, const std::string& name, std::int64_t priority) {
  FunctionEntry* e = cfg.find(c, name);
  if (!e) {
    cfg.functions(c).push_back({name});
    e = &cfg.functions(c).back();
  }
  e->enabled = true;
  e->priority = priority;
}

PointCloud line_cloud(std::size_t n, double spacing = 1.0) {
  PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) pc.points.push_back({spacing * static_cast<double>(i) + 0.5, 0, 0, 0});
  return pc;
}

std::vector<Frame> cloud_frames(std::size_t count, std::size_t points) {
  std::vector<Frame> frames(count);
  for (auto& f : frames) f.set_point_cloud(line_cloud(points));
  return frames;
}

std::size_t count_logs(const Frame& f, LogLevel level) {
  std::size_t n = 0;
  for (const auto& e : f.logs) n += e.level == level;
  return n;
}

bool have_python() { return std::system("python3 -c 'import json' >/dev/null 2>&1") == 0; }

}  // namespace

TEST(Schedule, LowerPriorityRunsFirst) {
  PipelineConfig cfg = default_config();
  enable(cfg, Category::lidar, "crop", 2);
  enable(cfg, Category::lidar, "rotate", 1);
  EXPECT_EQ(names(build_schedule(cfg, builtin_registry())), (std::vector<std::string>{"lidar.rotate", "lidar.crop"}));
}

TEST(Schedule, AllDisabledIsEmpty) { EXPECT_TRUE(build_schedule(default_config(), builtin_registry()).empty()); }

TEST(Schedule, TieBreakByName) {
  FunctionRegistry reg = builtin_registry();
  reg.add(noop(Category::lidar, "b"));
  reg.add(noop(Category::lidar, "a"));
  PipelineConfig cfg;
  enable(cfg, Category::lidar, "b", 1);
  enable(cfg, Category::lidar, "a", 1);
  EXPECT_EQ(names(build_schedule(cfg, reg)), (std::vector<std::string>{"lidar.a", "lidar.b"}));
}

TEST(Schedule, CategoryOrderBeatsPriority) {
  FunctionRegistry reg;
  for (Category c : {Category::post, Category::pre, Category::label, Category::lidar}) reg.add(noop(c, "f"));
  PipelineConfig cfg;
  enable(cfg, Category::post, "f", -100);
  enable(cfg, Category::label, "f", 0);
  enable(cfg, Category::pre, "f", 100);
  enable(cfg, Category::lidar, "f", 5);
  EXPECT_EQ(names(build_schedule(cfg, reg)), (std::vector<std::string>{"pre.f", "lidar.f", "label.f", "post.f"}));
}

TEST(Schedule, UnresolvableEntryNamed) {
  PipelineConfig cfg;
  enable(cfg, Category::camera, "ghost", 1);
  try {
    build_schedule(cfg, builtin_registry());
    FAIL();
  } catch (const ScheduleError& e) {
    EXPECT_NE(std::string(e.what()).find("(camera, ghost)"), std::string::npos);
  }
}

TEST(Execute, MissingSlotWarnsAndSkips) {
  PipelineConfig cfg = default_config();
  enable(cfg, Category::lidar, "crop", 1);
  FunctionContext ctx;
  TimingTable t;
  Frame f;
  execute_frame(f, build_schedule(cfg, builtin_registry()), cfg, ctx, &t);
  ASSERT_EQ(f.logs.size(), 1u);
  EXPECT_EQ(f.logs[0].level, LogLevel::warning);
  EXPECT_EQ(f.logs[0].message, "missing point_cloud; skipped");
  EXPECT_EQ(f.logs[0].source, "lidar.crop");
  EXPECT_FALSE(f.point_cloud());
  EXPECT_EQ(t["lidar.crop"].skipped, 1u);
}

TEST(Execute, SanitizeBeforeCrop) {
  // A NaN at index 0 would be kept by neither, but the all-zero point sits
  // inside the crop; only sanitize removes it. Running crop first would
  // leave counts identical, so compare against the crop-only result.
  PointCloud pc;
  pc.points = {{0, 0, 0, 0}, {1, 1, 1, 0}, {std::nan(""), 0, 0, 0}, {99, 0, 0, 0}};
  PipelineConfig cfg = default_config();
  enable(cfg, Category::lidar, "crop", 20);
  cfg.find(Category::lidar, "crop")->params["min_x"] = -5.0;
  cfg.find(Category::lidar, "crop")->params["max_x"] = 5.0;
  FunctionContext ctx;

  Frame crop_only;
  crop_only.set_point_cloud(pc);
  execute_frame(crop_only, build_schedule(cfg, builtin_registry()), cfg, ctx);
  EXPECT_EQ(crop_only.point_cloud()->size(), 2u);

  enable(cfg, Category::pre, "remove_nan_inf_allzero_from_pcd", 1);
  Frame both;
  both.set_point_cloud(pc);
  execute_frame(both, build_schedule(cfg, builtin_registry()), cfg, ctx);
  ASSERT_EQ(both.point_cloud()->size(), 1u);
  EXPECT_EQ(both.point_cloud()->points[0].x, 1);
}

TEST(Execute, ThrowingFunctionIsolated) {
  FunctionRegistry reg = builtin_registry();
  FunctionSpec boom = noop(Category::lidar, "boom");
  boom.run = [](Frame&, const ParamMap&, const PipelineConfig&, FunctionContext&) { throw std::runtime_error("kaboom"); };
  reg.add(boom);
  PipelineConfig cfg = default_config();
  enable(cfg, Category::lidar, "boom", 0);
  enable(cfg, Category::lidar, "crop", 1);
  cfg.find(Category::lidar, "crop")->params["max_x"] = 3.0;
  Frame f;
  f.set_point_cloud(line_cloud(10));
  FunctionContext ctx;
  TimingTable t;
  execute_frame(f, build_schedule(cfg, reg), cfg, ctx, &t);
  EXPECT_EQ(f.point_cloud()->size(), 3u);
  ASSERT_EQ(count_logs(f, LogLevel::error), 1u);
  EXPECT_EQ(f.logs[0].source, "lidar.boom");
  EXPECT_EQ(f.logs[0].message, "kaboom");
  EXPECT_EQ(t["lidar.boom"].errors, 1u);
  EXPECT_EQ(t["lidar.crop"].calls, 1u);
}

TEST(Patch, DisableRemovesFromSchedule) {
  Engine e(default_config(), std::make_shared<MemorySource>(cloud_frames(2, 5)));
  e.patch("proc.lidar.crop.enabled", ParamValue{true});
  EXPECT_EQ(names(e.schedule()), (std::vector<std::string>{"lidar.crop"}));
  e.patch("proc.lidar.crop.enabled", ParamValue{false});
  EXPECT_TRUE(e.schedule().empty());
}

TEST(Patch, WrongTypeRejectedConfigUnchanged) {
  Engine e(default_config(), std::make_shared<MemorySource>(cloud_frames(2, 5)));
  const PipelineConfig before = e.config();
  EXPECT_THROW(e.patch("proc.lidar.crop.priority", ParamValue{std::string("high")}), PatchRejected);
  EXPECT_THROW(e.patch("proc.lidar.crop.enabled", nlohmann::json(1)), PatchRejected);
  EXPECT_THROW(e.patch("proc.lidar.crop.min_x", nlohmann::json("abc")), PatchRejected);
  EXPECT_THROW(e.patch("proc.lidar.crop.nope", nlohmann::json(1.0)), PatchRejected);
  EXPECT_THROW(e.patch("proc.bogus.crop.enabled", nlohmann::json(true)), PatchRejected);
  EXPECT_THROW(e.patch("data.replay_hz", nlohmann::json(0)), PatchRejected);
  EXPECT_THROW(e.patch("logging.level", nlohmann::json("loud")), PatchRejected);
  EXPECT_EQ(e.config(), before);
}

TEST(Patch, CrossParamValidation) {
  Engine e(default_config(), std::make_shared<MemorySource>(cloud_frames(1, 5)));
  try {
    e.patch("proc.lidar.crop.max_x", nlohmann::json(-60.0));
    FAIL();
  } catch (const PatchRejected& err) {
    EXPECT_NE(std::string(err.what()).find("min"), std::string::npos);
  }
  EXPECT_EQ(std::get<double>(e.config().find(Category::lidar, "crop")->params.at("max_x")), 50.0);
}

TEST(Patch, PriorityReorder) {
  PipelineConfig cfg = default_config();
  enable(cfg, Category::lidar, "crop", 2);
  enable(cfg, Category::lidar, "rotate", 1);
  Engine e(cfg, std::make_shared<MemorySource>(cloud_frames(1, 5)));
  EXPECT_EQ(names(e.schedule()), (std::vector<std::string>{"lidar.rotate", "lidar.crop"}));
  e.patch("proc.lidar.crop.priority", nlohmann::json(0));
  EXPECT_EQ(names(e.schedule()), (std::vector<std::string>{"lidar.crop", "lidar.rotate"}));
}

TEST(Patch, LivePatchAffectsNextFrameOnly) {
  Engine e(default_config(), std::make_shared<MemorySource>(cloud_frames(3, 10)));
  std::vector<std::size_t> seen;
  e.on_frame([&](const Frame& f) { seen.push_back(f.point_cloud()->size()); });
  const Frame* f0 = e.step();
  e.patch("proc.lidar.crop.enabled", nlohmann::json(true));
  e.patch("proc.lidar.crop.max_x", nlohmann::json(4));
  EXPECT_EQ(f0->point_cloud()->size(), 10u);
  e.step();
  EXPECT_EQ(seen, (std::vector<std::size_t>{10, 4}));
}

TEST(Playback, StepAndSeek) {
  Engine e(default_config(), std::make_shared<MemorySource>(cloud_frames(10, 3)));
  std::size_t calls = 0;
  e.on_frame([&](const Frame&) { ++calls; });
  e.step();
  const Frame* f = e.step();
  EXPECT_EQ(f->index, 1u);
  EXPECT_EQ(calls, 2u);
  f = e.seek(1000000);
  EXPECT_EQ(f->index, 9u);
  ASSERT_EQ(count_logs(*f, LogLevel::warning), 1u);
  EXPECT_NE(f->logs[0].message.find("clamped to 9"), std::string::npos);
  EXPECT_EQ(e.step(), nullptr);
  EXPECT_EQ(e.state(), (PlaybackState{9, false, 10}));
  EXPECT_EQ(e.seek(-3)->index, 0u);
}

TEST(Playback, PauseStopsFrames) {
  auto clock = std::make_shared<io::FakeClock>(100.0);
  Engine e(default_config(), std::make_shared<MemorySource>(cloud_frames(10, 3)), ".", builtin_registry(), clock);
  e.play();
  ASSERT_TRUE(e.tick());
  EXPECT_EQ(e.tick(), nullptr);  // next one not due yet
  clock->advance(0.1);
  ASSERT_TRUE(e.tick());
  EXPECT_EQ(e.state().current, 1);
  e.pause();
  for (int i = 0; i < 20; ++i) {
    clock->advance(0.1);
    EXPECT_EQ(e.tick(), nullptr);
  }
  EXPECT_FALSE(e.next_due());
  EXPECT_EQ(e.state().current, 1);
  e.step();
  EXPECT_EQ(e.state().current, 2);
  e.play();
  EXPECT_EQ(e.tick()->index, 3u);
}

TEST(Playback, PlayStopsAtEnd) {
  auto clock = std::make_shared<io::FakeClock>();
  Engine e(default_config(), std::make_shared<MemorySource>(cloud_frames(3, 3)), ".", builtin_registry(), clock);
  e.play();
  std::vector<std::size_t> order;
  while (e.next_due()) {
    clock->sleep_until(*e.next_due());
    if (const Frame* f = e.tick()) order.push_back(f->index);
  }
  EXPECT_EQ(order, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_FALSE(e.state().playing);
}

TEST(Playback, LiveReplayCountsDrops) {
  auto clock = std::make_shared<io::FakeClock>();
  FunctionRegistry reg = builtin_registry();
  FunctionSpec slow = noop(Category::post, "slow");
  slow.run = [clock](Frame&, const ParamMap&, const PipelineConfig&, FunctionContext&) { clock->advance(0.25); };
  reg.add(slow);
  PipelineConfig cfg = default_config();
  cfg.data.live_replay = true;
  enable(cfg, Category::post, "slow", 1);
  Engine e(cfg, std::make_shared<MemorySource>(cloud_frames(10, 3)), ".", reg, clock);
  std::vector<std::size_t> order;
  const auto s = e.run_all([&](const Frame& f) { order.push_back(f.index); });
  EXPECT_GT(s.dropped, 0u);
  EXPECT_EQ(s.frames + s.dropped, 10u);
  EXPECT_TRUE(std::is_sorted(order.begin(), order.end()));
}

TEST(PipelineDir, NewPipelineRoundTrips) {
  TempDir tmp;
  const auto dir = tmp.path() / "p";
  new_pipeline(dir);
  EXPECT_EQ(load_config(base_config_path(dir)), default_config());
  for (Category c : kCategories) EXPECT_TRUE(fs::is_directory(dir / "algo" / std::string(category_name(c))));
  EXPECT_THROW(new_pipeline(dir), IoError);
}

TEST(PipelineDir, Scaffold) {
  TempDir tmp;
  new_pipeline(tmp.path());
  const auto files = scaffold_custom_function(tmp.path(), "lidar", "my_filter");
  ASSERT_EQ(files.size(), 2u);
  EXPECT_TRUE(fs::exists(tmp.path() / "algo/lidar/my_filter.py"));
  EXPECT_TRUE(fs::exists(tmp.path() / "algo/lidar/my_filter.yml"));
  const auto cfg = load_config(base_config_path(tmp.path()));
  const auto* e = cfg.find(Category::lidar, "my_filter");
  ASSERT_TRUE(e);
  EXPECT_FALSE(e->enabled);
  EXPECT_EQ(e->priority, 100);
  try {
    scaffold_custom_function(tmp.path(), "lidar", "my_filter");
    FAIL();
  } catch (const ConfigError& err) {
    EXPECT_NE(std::string(err.what()).find("exists"), std::string::npos);
  }
  try {
    scaffold_custom_function(tmp.path(), "bogus", "x");
    FAIL();
  } catch (const ConfigError& err) {
    EXPECT_NE(std::string(err.what()).find("pre, lidar, camera, calib, label, post"), std::string::npos);
  }
  EXPECT_THROW(scaffold_custom_function(tmp.path(), "lidar", "9lives"), ConfigError);
  EXPECT_THROW(scaffold_custom_function(tmp.path(), "lidar", "crop"), ConfigError);
}

TEST(PipelineDir, OpenMissingConfig) {
  TempDir tmp;
  EXPECT_THROW(Engine::open(tmp.path()), ConfigError);
}

TEST(PythonFunction, RunsAndWritesBack) {
  if (!have_python()) GTEST_SKIP() << "python3 not available";
  TempDir tmp;
  new_pipeline(tmp.path());
  fs::create_directories(tmp.path() / "data/lidar");
  io::write_file(tmp.path() / "data/lidar/000000.bin", io::write_kitti_bin(line_cloud(6)));
  scaffold_custom_function(tmp.path(), "lidar", "halve");
  io::write_file(tmp.path() / "algo/lidar/halve.py",
                 "def halve(frame, params, config):\n"
                 "    pts = frame['point_cloud']['points']\n"
                 "    frame['point_cloud']['points'] = pts[: len(pts) // params['div']]\n"
                 "    frame['extras']['seen'] = len(pts)\n"
                 "    frame['logs'].append({'level': 'info', 'message': 'halved'})\n"
                 "    return frame\n");
  io::write_file(tmp.path() / "algo/lidar/halve.yml", "halve:\n  enabled: false\n  priority: 100\n  div: 2\n");
  auto cfg = load_config(base_config_path(tmp.path()));
  cfg.functions(Category::lidar).erase(cfg.functions(Category::lidar).end() - 1);
  save_config(base_config_path(tmp.path()), cfg);

  Engine e = Engine::open(tmp.path());
  e.toggle(Category::lidar, "halve");
  const Frame* f = e.step();
  ASSERT_TRUE(f);
  EXPECT_EQ(count_logs(*f, LogLevel::error), 0u) << (f->logs.empty() ? "" : f->logs[0].message);
  EXPECT_EQ(f->point_cloud()->size(), 3u);
  EXPECT_EQ(*f->extra("seen"), 6);
  ASSERT_EQ(f->logs.size(), 1u);
  EXPECT_EQ(f->logs[0].source, "lidar.halve");

  e.patch("proc.lidar.halve.div", nlohmann::json(3));
  EXPECT_EQ(e.seek(0)->point_cloud()->size(), 2u);
  EXPECT_THROW(e.patch("proc.lidar.halve.div", nlohmann::json("x")), PatchRejected);
}

TEST(PythonFunction, FailureIsIsolated) {
  if (!have_python()) GTEST_SKIP() << "python3 not available";
  TempDir tmp;
  new_pipeline(tmp.path());
  fs::create_directories(tmp.path() / "data/lidar");
  io::write_file(tmp.path() / "data/lidar/000000.bin", io::write_kitti_bin(line_cloud(6)));
  Engine e = Engine::open(tmp.path());
  e.scaffold("post", "broken");
  io::write_file(tmp.path() / "algo/post/broken.py", "def broken(frame, params, config):\n    raise ValueError('nope')\n");
  e.toggle(Category::post, "broken");
  const Frame* f = e.step();
  ASSERT_EQ(count_logs(*f, LogLevel::error), 1u);
  EXPECT_NE(f->logs[0].message.find("nope"), std::string::npos);
  EXPECT_EQ(f->point_cloud()->size(), 6u);
}

TEST(PipelineDir, ReloadDiscoversNewFiles) {
  TempDir tmp;
  new_pipeline(tmp.path());
  fs::create_directories(tmp.path() / "data/lidar");
  io::write_file(tmp.path() / "data/lidar/000000.bin", "");
  Engine e = Engine::open(tmp.path());
  EXPECT_FALSE(e.registry().contains(Category::label, "late"));
  e.patch("proc.lidar.crop.enabled", nlohmann::json(true));
  io::write_file(tmp.path() / "algo/label/late.py", "def late(frame, params, config):\n    return frame\n");
  io::write_file(tmp.path() / "algo/label/crop.py", "");
  const auto warnings = e.reload();
  EXPECT_TRUE(e.registry().contains(Category::label, "late"));
  EXPECT_TRUE(e.config().find(Category::label, "late"));
  EXPECT_TRUE(e.config().find(Category::lidar, "crop")->enabled);
  EXPECT_TRUE(warnings.empty());
}
