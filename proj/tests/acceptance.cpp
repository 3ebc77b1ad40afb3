// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "liguard/algo/background.hpp"
#include "liguard/algo/dbscan.hpp"
#include "liguard/algo/export.hpp"
#include "liguard/algo/projection.hpp"
#include "liguard/algo/tracking.hpp"
#include "liguard/engine/engine.hpp"
#include "liguard/io/kitti.hpp"
#include "liguard/io/pcd.hpp"
#include "liguard/sim/scenes.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#ifndef LIGUARD_PIPELINES_DIR
#error "LIGUARD_PIPELINES_DIR must point at the bundled pipelines"
#endif

using namespace liguard;
using liguard::engine::FunctionSpec;
using liguard::test::TempDir;
namespace fs = std::filesystem;

namespace {

/// Collects failures; a criterion passes when nothing was recorded.
struct Failures {
  std::vector<std::string> items;
  void expect(bool ok, const std::string& what) {
    if (!ok) items.push_back(what);
  }
};

int failed = 0;

void criterion(const std::string& name, double limit_s, const std::function<void(Failures&)>& body) {
  Failures f;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(f);
  } catch (const std::exception& e) {
    f.items.push_back(std::string("exception: ") + e.what());
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (s >= limit_s) f.items.push_back("took " + std::to_string(s) + " s, limit " + std::to_string(limit_s) + " s");
  const bool ok = f.items.empty();
  failed += !ok;
  std::printf("%s  %-28s %.2f s (limit %.0f s)\n", ok ? "PASS" : "FAIL", name.c_str(), s, limit_s);
  for (std::size_t i = 0; i < f.items.size() && i < 10; ++i) std::printf("      - %s\n", f.items[i].c_str());
  std::fflush(stdout);
}

std::string tree_digest(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::read_file(e.path());
  }
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    h = (h ^ 0xff) * 1099511628211ull;
  };
  for (const auto& [k, v] : files) {
    mix(k);
    mix(v);
  }
  std::ostringstream os;
  os << files.size() << " files, fnv1a " << std::hex << h;
  return os.str();
}

fs::path copy_pipeline(const std::string& name, const fs::path& into) {
  const fs::path dst = into / name;
  fs::create_directories(into);
  fs::copy(fs::path(LIGUARD_PIPELINES_DIR) / name, dst, fs::copy_options::recursive);
  fs::remove_all(dst / "outputs");
  return dst;
}

// ---------------------------------------------------------------------------

void format_round_trips(Failures& f) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> count(0, 3000);
  TempDir tmp;
  for (int i = 0; i < 200; ++i) {
    const PointCloud pc = test::as_f32(test::random_cloud(rng, count(rng)));
    const std::string tag = "cloud " + std::to_string(i);

    const std::string bin = io::write_pcd(pc, io::PcdMode::binary);
    const PointCloud back = io::read_pcd(bin);
    f.expect(back == pc, tag + ": binary PCD values differ");
    f.expect(io::write_pcd(back, io::PcdMode::binary) == bin, tag + ": binary PCD bytes differ");
    f.expect(io::read_pcd(io::write_pcd(pc, io::PcdMode::ascii)) == pc, tag + ": ascii PCD values differ");

    const std::string stem = "r" + std::to_string(i);
    algo::export_pcdet(pc, {}, stem, tmp.path());
    const std::string kitti = io::read_file(tmp.path() / "points" / (stem + ".bin"));
    f.expect(kitti.size() == pc.size() * 16, tag + ": KITTI bin size");
    const PointCloud kb = io::read_kitti_bin(kitti);
    f.expect(kb == pc, tag + ": KITTI bin values differ");
    f.expect(io::write_kitti_bin(kb) == kitti, tag + ": KITTI bin bytes differ");
  }
}

void dbscan_oracle(Failures& f) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const PointCloud pc = test::random_cloud(rng, 100, 0, 8);
    const double eps = std::uniform_real_distribution<double>(0.8, 2.2)(rng);
    const auto min_points = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    const auto got = algo::dbscan(pc, eps, min_points);
    const auto want = oracle::dbscan(pc, eps, min_points);
    f.expect(got == want, "seed " + std::to_string(seed) + " eps " + std::to_string(eps) + " min_points " +
                              std::to_string(min_points) + ": partition differs");
  }
}

void stdf_plane(Failures& f) {
  const auto scene = sim::plane_scene(11, 20, 5000, 200, {6, 13});
  algo::StdfParams p;
  p.voxel_size = 0.5;
  p.n = 20;
  p.m_skip = 0;
  p.r = 1;
  p.threshold = 0.5;
  const auto build = algo::stdf_build(scene.frames, p);

  std::set<oracle::Voxel> got;
  for (const auto& k : build.filter.background) got.insert({k.x, k.y, k.z});
  const auto want = oracle::stdf_background(scene.frames, 0.5, 20, 0, 1, 0.5);
  f.expect(got == want, "background set differs from oracle (" + std::to_string(got.size()) + " vs " +
                            std::to_string(want.size()) + " voxels)");

  std::size_t plane = 0, plane_removed = 0, transient = 0, transient_kept = 0;
  for (std::size_t fr = 0; fr < scene.frames.size(); ++fr) {
    const auto keep = algo::stdf_mask(build.filter, scene.frames[fr]);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (scene.transient[fr][i]) {
        ++transient;
        transient_kept += keep[i];
      } else {
        ++plane;
        plane_removed += !keep[i];
      }
    }
    const auto applied = algo::stdf_apply(build.filter, scene.frames[fr]);
    f.expect(applied.size() == static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true)),
             "stdf_apply disagrees with stdf_mask");
  }
  f.expect(transient == 400, "transient points " + std::to_string(transient));
  f.expect(transient_kept == transient, "transient kept " + std::to_string(transient_kept) + "/" + std::to_string(transient));
  const double removed = static_cast<double>(plane_removed) / static_cast<double>(plane);
  f.expect(removed >= 0.99, "plane removed " + std::to_string(removed));
}

void pipeline2(Failures& f) {
  TempDir tmp;
  const auto scene = sim::roadside_scene(7, 10);
  std::vector<std::string> digests;
  for (int run = 0; run < 2; ++run) {
    const auto dir = copy_pipeline("roadside_self_supervised", tmp.path() / std::to_string(run));
    auto e = engine::Engine::open(dir);
    f.expect(e.state().total == 10, "bundled set has " + std::to_string(e.state().total) + " frames");
    for (std::size_t k = 0; k < scene.frames.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "%06zu.pcd", k);
      f.expect(io::read_pcd(io::read_file(dir / "data/lidar" / name)) == test::as_f32(scene.frames[k]),
               "bundled frame " + std::to_string(k) + " differs from the scene generator");
    }
    const auto summary = e.run_all();
    f.expect(summary.frames == 10 && summary.errors == 0 && summary.io_errors == 0, "run summary not clean");
    for (std::size_t k = 0; k < scene.frames.size(); ++k) {
      char stem[16];
      std::snprintf(stem, sizeof(stem), "%06zu", k);
      const std::string text = io::read_file(dir / "outputs/pcdet/labels" / (std::string(stem) + ".txt"));
      std::istringstream in(text);
      std::string line;
      std::size_t n = 0;
      while (std::getline(in, line)) {
        std::istringstream ls(line);
        double v[7];
        std::string cls, extra;
        bool ok = true;
        for (double& x : v) ok = ok && static_cast<bool>(ls >> x);
        ok = ok && static_cast<bool>(ls >> cls) && !(ls >> extra);
        f.expect(ok, std::string(stem) + ": unparsable label line '" + line + "'");
        f.expect(ok && v[3] > 0 && v[4] > 0 && v[5] > 0, std::string(stem) + ": non-positive extent");
        ++n;
      }
      f.expect(n == scene.expected_count(k), std::string(stem) + ": " + std::to_string(n) + " objects, expected " +
                                                 std::to_string(scene.expected_count(k)));
    }
    digests.push_back(tree_digest(dir / "outputs"));
  }
  f.expect(digests[0] == digests[1], "runs differ: " + digests[0] + " / " + digests[1]);
}

void pipeline1(Failures& f) {
  TempDir tmp;
  const auto dir = copy_pipeline("kitti_fusion", tmp.path());
  auto e = engine::Engine::open(dir);
  std::size_t checked = 0;
  e.run_all([&](const Frame& fr) {
    const std::string tag = "frame " + std::to_string(fr.index);
    if (!fr.calibration() || !fr.raw_labels()) {
      f.expect(false, tag + ": missing calibration or raw labels");
      return;
    }
    std::vector<RawKittiLabel> raw;
    for (const auto& r : *fr.raw_labels()) {
      if (!r.dont_care) raw.push_back(r);
    }
    std::vector<ObjectLabel> gt;
    for (const auto& l : fr.labels()) {
      if (l.source == "ground_truth") gt.push_back(l);
    }
    f.expect(gt.size() == raw.size(), tag + ": converted " + std::to_string(gt.size()) + " of " +
                                          std::to_string(raw.size()) + " labels");
    for (std::size_t i = 0; i < gt.size() && i < raw.size(); ++i) {
      const Eigen::Vector3d loc = algo::camera_location_from_lidar(gt[i], *fr.calibration());
      const double err = (loc - raw[i].location).cwiseAbs().maxCoeff();
      f.expect(err <= 1e-9, tag + " label " + std::to_string(i) + ": location error " + std::to_string(err));
      const double dry = std::abs(wrap_angle(algo::camera_rotation_y_from_lidar(gt[i].box3d.yaw) - raw[i].rotation_y));
      f.expect(dry <= 1e-9, tag + " label " + std::to_string(i) + ": rotation_y error " + std::to_string(dry));
      ++checked;
    }
  });
  f.expect(checked == 9, "checked " + std::to_string(checked) + " labels, expected 9");

  const auto cube = algo::gen_bbox_2d({sim::unit_cube_label()}, sim::axis_swap_calibration(), 100, 100);
  if (!cube[0].box2d) {
    f.expect(false, "unit cube did not project");
    return;
  }
  const Box2D b = *cube[0].box2d;
  const double err = std::max({std::abs(b.xmin - 45), std::abs(b.ymin - 45), std::abs(b.xmax - 55), std::abs(b.ymax - 55)});
  f.expect(err <= 1e-6, "unit cube box off by " + std::to_string(err));
}

FunctionSpec marker(Category c, const std::string& name, std::vector<std::string>* trace, bool throws = false) {
  FunctionSpec s;
  s.category = c;
  s.name = name;
  s.run = [trace, name, throws](Frame&, const ParamMap&, const PipelineConfig&, engine::FunctionContext&) {
    trace->push_back(name);
    if (throws) throw std::runtime_error("deliberate failure");
  };
  return s;
}

void engine_semantics(Failures& f) {
  using namespace engine;
  std::vector<std::string> trace;
  FunctionRegistry reg = builtin_registry();
  for (const char* n : {"a", "b", "c"}) reg.add(marker(Category::post, n, &trace));
  reg.add(marker(Category::post, "boom", &trace, true));

  PipelineConfig cfg = default_config();
  for (const auto& [n, prio] : std::vector<std::pair<std::string, std::int64_t>>{{"c", 2}, {"b", 1}, {"a", 1}, {"boom", 0}}) {
    cfg.functions(Category::post).push_back({n, true, prio});
  }
  std::vector<Frame> frames(4);
  for (auto& fr : frames) {
    PointCloud pc;
    for (int i = 0; i < 10; ++i) pc.points.push_back({i + 0.5, 0, 0, 0});
    fr.set_point_cloud(pc);
  }
  Engine e(cfg, std::make_shared<MemorySource>(frames), ".", reg);

  const Frame* f0 = e.step();
  f.expect(trace == std::vector<std::string>{"boom", "a", "b", "c"}, "priority order or tie-break wrong");
  std::size_t errors = 0;
  for (const auto& l : f0->logs) errors += l.level == LogLevel::error && l.source == "post.boom";
  f.expect(errors == 1, "fault not isolated to one error log");
  const std::size_t f0_points = f0->point_cloud()->size();

  e.patch("proc.post.c.priority", nlohmann::json(-1));
  e.patch("proc.post.boom.enabled", nlohmann::json(false));
  e.patch("proc.lidar.crop.enabled", nlohmann::json(true));
  e.patch("proc.lidar.crop.max_x", nlohmann::json(3.0));
  f.expect(f0->point_cloud()->size() == f0_points && f0_points == 10, "live patch changed frame t");
  trace.clear();
  const Frame* f1 = e.step();
  f.expect(trace == std::vector<std::string>{"c", "a", "b"}, "reorder or disable not applied");
  f.expect(f1->point_cloud()->size() == 3, "live patch not applied to frame t+1");

  bool rejected = false;
  const PipelineConfig before = e.config();
  try {
    e.patch("proc.lidar.crop.priority", nlohmann::json("high"));
  } catch (const PatchRejected&) {
    rejected = true;
  }
  f.expect(rejected && e.config() == before, "bad patch not rejected atomically");

  e.patch("proc.post.boom.enabled", nlohmann::json(true));
  trace.clear();
  e.step();
  f.expect(trace == std::vector<std::string>{"c", "boom", "a", "b"}, "re-enable not applied");
}

void trajectories(Failures& f) {
  using V = Eigen::Vector3d;
  for (std::size_t d = 0; d <= 3; ++d) {
    auto poly = [d](double t) {
      V v = V::Zero();
      for (std::size_t k = 0; k <= d; ++k) v += V(0.5 + k, -1.0 / (k + 1), 0.1 * k) * std::pow(t, static_cast<double>(k));
      return v;
    };
    std::vector<V> past;
    for (int t = 0; t < 8; ++t) past.push_back(poly(t));
    const auto fut = algo::polyfit_future(past, d, 5);
    if (!fut) {
      f.expect(false, "polyfit degree " + std::to_string(d) + " returned nothing");
      continue;
    }
    for (std::size_t j = 0; j < 5; ++j) {
      const double err = ((*fut)[j] - poly(8.0 + j)).norm();
      f.expect(err <= 1e-9, "polyfit degree " + std::to_string(d) + " step " + std::to_string(j) + " error " + std::to_string(err));
    }
  }

  std::vector<V> line;
  for (int t = 0; t < 6; ++t) line.push_back(V(2 + 1.5 * t, -0.5 * t, 0.25 * t));
  const auto sp = algo::spline_future(line, 5, 0.1, 0.1);
  f.expect(sp.has_value(), "spline returned nothing");
  if (sp) {
    for (std::size_t j = 0; j < 5; ++j) {
      const double t = 6.0 + j;
      f.expect(((*sp)[j] - V(2 + 1.5 * t, -0.5 * t, 0.25 * t)).norm() <= 1e-6, "spline not linear at step " + std::to_string(j));
    }
  }

  const auto v = algo::velocity_from_trajectory({V(1, 2, 3), V(1.5, 1, 3), V(2.25, 0.5, 2.5)}, 20);
  f.expect(v && *v == V(15, -10, -10), "velocity formula");
  f.expect(!algo::velocity_from_trajectory({V(1, 2, 3)}, 20), "velocity from one point");

  algo::TrackState st;
  std::vector<ObjectLabel> out;
  for (int k = 0; k < 10; ++k) {
    ObjectLabel l;
    l.box3d.center = {-10 + 0.8 * k, 3, 0};
    ObjectLabel other;
    other.box3d.center = {20, -5 - 0.5 * k, 0};
    out = algo::kdtree_past_trajectory({l, other}, st, 2.0, 10);
    f.expect(out[0].track_id == 0 && out[1].track_id == 1, "track id changed at frame " + std::to_string(k));
  }
  f.expect(out[0].past_trajectory.size() == 10, "history length " + std::to_string(out[0].past_trajectory.size()));
}

}  // namespace

int main() {
  criterion("format-round-trips", 5, format_round_trips);
  criterion("dbscan-oracle", 10, dbscan_oracle);
  criterion("stdf-plane-scene", 5, stdf_plane);
  criterion("pipeline2-end-to-end", 30, pipeline2);
  criterion("pipeline1-label-path", 30, pipeline1);
  criterion("engine-semantics", 30, engine_semantics);
  criterion("trajectory-suite", 30, trajectories);
  std::printf("SKIP  service-ui-live-toggle       secondary, not run here (covered by test_service)\n");
  std::printf("%d criterion(s) failed\n", failed);
  return failed ? 1 : 0;
}
