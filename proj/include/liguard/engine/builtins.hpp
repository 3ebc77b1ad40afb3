#pragma once

#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "liguard/algo/background.hpp"
#include "liguard/algo/boxes.hpp"
#include "liguard/algo/dbscan.hpp"
#include "liguard/algo/export.hpp"
#include "liguard/algo/labels.hpp"
#include "liguard/algo/point_ops.hpp"
#include "liguard/algo/projection.hpp"
#include "liguard/algo/tracking.hpp"
#include "liguard/engine/registry.hpp"

namespace liguard::engine {

namespace builtin_detail {

inline double num(const ParamMap& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ParamError("missing parameter '" + name + "'");
  return numeric_value(it->second);
}

inline std::int64_t integer(const ParamMap& p, const std::string& name) {
  return get_param<std::int64_t>(p, name);
}

inline void positive(const ParamMap& p, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (!(num(p, n) > 0)) throw ParamError(std::string(n) + " must be > 0");
  }
}

inline Eigen::Vector3d vec3(const ParamMap& p, const std::string& prefix) {
  return {num(p, prefix + "x"), num(p, prefix + "y"), num(p, prefix + "z")};
}

inline std::vector<ParamSpec> bounds_params(double lo_xy, double hi_xy, double lo_z, double hi_z) {
  return {{"min_x", lo_xy}, {"min_y", lo_xy}, {"min_z", lo_z},
          {"max_x", hi_xy}, {"max_y", hi_xy}, {"max_z", hi_z}};
}

inline void check_bounds_params(const ParamMap& p) {
  for (const char* axis : {"x", "y", "z"}) {
    if (num(p, std::string("min_") + axis) > num(p, std::string("max_") + axis)) {
      throw ParamError(std::string("min_") + axis + " must not exceed max_" + axis);
    }
  }
}

/// Replaces the cloud by its masked subset, keeping cluster ids aligned.
inline void apply_mask(Frame& f, const algo::KeepMask& keep) {
  const auto& pc = *f.point_cloud();
  std::optional<ClusterIds> ids;
  if (f.cluster_ids()) ids = algo::select(*f.cluster_ids(), keep);
  f.set_point_cloud_with_ids(algo::select(pc, keep), std::move(ids));
}

inline std::string frame_stem(const Frame& f) {
  if (!f.stem.empty()) return f.stem;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", f.index);
  return buf;
}

inline std::filesystem::path resolve_dir(const FunctionContext& ctx, const std::string& dir) {
  std::filesystem::path p(dir);
  return p.is_absolute() ? p : ctx.pipeline_dir / p;
}

inline std::vector<double> matrix_param(const ParamMap& p, const std::string& name, std::size_t n) {
  const auto& v = get_param<std::vector<double>>(p, name);
  if (v.size() != n) {
    throw ParamError(name + " expects " + std::to_string(n) + " values, got " + std::to_string(v.size()));
  }
  return v;
}

inline std::vector<algo::ClassRule> class_table(const ParamMap& p) {
  std::vector<algo::ClassRule> table;
  for (const auto& rule : algo::default_class_table()) {
    const auto v = matrix_param(p, rule.name, 6);
    table.push_back({rule.name, {v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}});
  }
  return table;
}

struct StdfState {
  std::optional<algo::StdfParams> params;
  std::size_t total = 0;
  algo::StdfFilter filter;
};

struct DHistState {
  std::optional<std::tuple<double, double, std::int64_t>> key;
  std::size_t total = 0;
  algo::DHistFilter filter;
};

inline PointCloud load_or_empty(FunctionContext& ctx, std::size_t i) {
  if (!ctx.load_cloud) return {};
  return ctx.load_cloud(i).value_or(PointCloud{});
}

}  // namespace builtin_detail

// ---------------------------------------------------------------------------
// pre
// ---------------------------------------------------------------------------

inline void register_pre(FunctionRegistry& reg) {
  using namespace builtin_detail;
  reg.add({Category::pre, "remove_nan_inf_allzero_from_pcd",
           "Removes NaN, infinite and all-zero points", {}, 10, {Slot::point_cloud}, nullptr,
           [](Frame& f, const ParamMap&, const PipelineConfig&, FunctionContext&) {
             apply_mask(f, algo::sanitize_mask(*f.point_cloud()));
           }});

  reg.add({Category::pre, "manual_calibration",
           "Builds Tr_velo_to_cam, R0_rect and P2 from row-major values",
           {{"tr_velo_to_cam", std::vector<double>{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0}},
            {"r0_rect", std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1}},
            {"p2", std::vector<double>{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0}}},
           20,
           {},
           [](const ParamMap& p) {
             matrix_param(p, "tr_velo_to_cam", 12);
             matrix_param(p, "r0_rect", 9);
             matrix_param(p, "p2", 12);
           },
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             Calibration c;
             const auto tr = matrix_param(p, "tr_velo_to_cam", 12);
             const auto r0 = matrix_param(p, "r0_rect", 9);
             const auto p2 = matrix_param(p, "p2", 12);
             for (int i = 0; i < 12; ++i) c.tr_velo_to_cam(i / 4, i % 4) = tr[i];
             for (int i = 0; i < 9; ++i) c.r0_rect(i / 3, i % 3) = r0[i];
             for (int i = 0; i < 12; ++i) c.p2(i / 4, i % 4) = p2[i];
             f.set_calibration(c);
           }});
}

// ---------------------------------------------------------------------------
// lidar
// ---------------------------------------------------------------------------

inline void register_lidar(FunctionRegistry& reg) {
  using namespace builtin_detail;
  reg.add({Category::lidar, "rotate", "Rotates by x-y-z euler angles (radians), R = Rz*Ry*Rx",
           {{"angle_x", 0.0}, {"angle_y", 0.0}, {"angle_z", 0.0}}, 10, {Slot::point_cloud}, nullptr,
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             f.set_point_cloud(algo::rotate(*f.point_cloud(), vec3(p, "angle_")));
           }});

  reg.add({Category::lidar, "crop", "Keeps points inside inclusive min/max bounds",
           bounds_params(-50, 50, -5, 5), 20, {Slot::point_cloud}, check_bounds_params,
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             apply_mask(f, algo::crop_mask(*f.point_cloud(), vec3(p, "min_"), vec3(p, "max_")));
           }});

  reg.add({Category::lidar, "project_image_pixel_colors", "Colors points from the image through the calibration",
           {}, 30, {Slot::point_cloud, Slot::image, Slot::calibration}, nullptr,
           [](Frame& f, const ParamMap&, const PipelineConfig&, FunctionContext&) {
             f.set_point_cloud(algo::colorize_points_from_image(*f.point_cloud(), *f.image(), *f.calibration()));
           }});

  reg.add({Category::lidar, "BGFilterDHistDPP", "Per-point range histogram background filter (organized clouds)",
           {{"bin_width", 0.5}, {"max_range", 200.0}, {"build_frames", std::int64_t{10}, 0.0}, {"tolerance", 0.5, 0.0}},
           40,
           {Slot::point_cloud},
           [](const ParamMap& p) { positive(p, {"bin_width", "max_range"}); },
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext& ctx) {
             auto& st = ctx.state<DHistState>("lidar.BGFilterDHistDPP");
             const auto key = std::make_tuple(num(p, "bin_width"), num(p, "max_range"), integer(p, "build_frames"));
             if (!st.key || *st.key != key || st.total != ctx.total_frames) {
               std::size_t count = ctx.total_frames;
               if (std::get<2>(key) > 0) count = std::min<std::size_t>(count, std::get<2>(key));
               std::vector<PointCloud> frames;
               for (std::size_t i = 0; i < count; ++i) frames.push_back(load_or_empty(ctx, i));
               if (frames.empty()) frames.push_back(*f.point_cloud());
               st.filter = algo::dhistdpp_build(frames, std::get<0>(key), std::get<1>(key));
               st.key = key;
               st.total = ctx.total_frames;
             }
             apply_mask(f, algo::dhistdpp_mask(st.filter, *f.point_cloud(), num(p, "tolerance")));
           }});

  reg.add({Category::lidar, "BGFilterSTDF", "Spatio-temporal voxel occupancy background filter",
           {{"voxel_size", 0.5},
            {"n", std::int64_t{1}, 1.0},
            {"m_skip", std::int64_t{1}, 0.0},
            {"r", std::int64_t{5}, 1.0},
            {"threshold", 0.5, 0.0, 1.0}},
           41,
           {Slot::point_cloud},
           [](const ParamMap& p) { positive(p, {"voxel_size", "threshold"}); },
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext& ctx) {
             auto& st = ctx.state<StdfState>("lidar.BGFilterSTDF");
             algo::StdfParams sp;
             sp.voxel_size = num(p, "voxel_size");
             sp.n = static_cast<std::size_t>(integer(p, "n"));
             sp.m_skip = static_cast<std::size_t>(integer(p, "m_skip"));
             sp.r = static_cast<std::size_t>(integer(p, "r"));
             sp.threshold = num(p, "threshold");
             const bool same = st.params && st.params->voxel_size == sp.voxel_size && st.params->n == sp.n &&
                               st.params->m_skip == sp.m_skip && st.params->r == sp.r &&
                               st.params->threshold == sp.threshold && st.total == ctx.total_frames;
             if (!same) {
               auto built = algo::stdf_build(
                   ctx.total_frames, [&](std::size_t i) { return load_or_empty(ctx, i); }, sp);
               if (built.warning) f.log(LogLevel::warning, "lidar.BGFilterSTDF", *built.warning);
               st.filter = std::move(built.filter);
               st.params = sp;
               st.total = ctx.total_frames;
             }
             apply_mask(f, algo::stdf_mask(st.filter, *f.point_cloud()));
           }});

  reg.add({Category::lidar, "O3D_DBSCAN", "DBSCAN clustering; writes cluster_ids",
           {{"eps", 0.5}, {"min_points", std::int64_t{5}, 1.0}}, 50, {Slot::point_cloud},
           [](const ParamMap& p) { positive(p, {"eps"}); },
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             f.set_cluster_ids(algo::dbscan(*f.point_cloud(), num(p, "eps"),
                                            static_cast<std::size_t>(integer(p, "min_points"))));
           }});

  std::vector<ParamSpec> c2o = {{"source", std::string("lidar")}};
  for (const auto& rule : algo::default_class_table()) {
    c2o.push_back({rule.name, std::vector<double>{rule.length.lo, rule.length.hi, rule.width.lo,
                                                  rule.width.hi, rule.height.lo, rule.height.hi}});
  }
  reg.add({Category::lidar, "Cluster2Object",
           "Fits oriented boxes to clusters and classifies them by size ([l_min, l_max, w_min, w_max, h_min, h_max])",
           c2o, 60, {Slot::point_cloud, Slot::cluster_ids},
           [](const ParamMap& p) {
             for (const auto& rule : class_table(p)) {
               if (rule.length.lo > rule.length.hi || rule.width.lo > rule.width.hi ||
                   rule.height.lo > rule.height.hi) {
                 throw ParamError(rule.name + ": range minimum exceeds maximum");
               }
             }
           },
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             auto objects = algo::cluster_to_object(*f.point_cloud(), *f.cluster_ids(), class_table(p),
                                                    get_param<std::string>(p, "source"));
             auto labels = f.labels();
             labels.insert(labels.end(), objects.begin(), objects.end());
             f.set_labels(std::move(labels));
           }});

  reg.add({Category::lidar, "PointPillarDetection", "Deep detector placeholder; emits no detections",
           {{"source", std::string("lidar")}}, 70, {Slot::point_cloud}, nullptr,
           [](Frame& f, const ParamMap&, const PipelineConfig&, FunctionContext&) {
             f.log(LogLevel::info, "lidar.PointPillarDetection", "no model loaded; 0 detections");
           }});

  reg.add({Category::lidar, "gen_bbox_2d", "Projects label boxes to image-plane 2D boxes",
           {{"image_width", std::int64_t{1242}, 1.0}, {"image_height", std::int64_t{375}, 1.0}}, 80,
           {Slot::calibration}, nullptr,
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             std::uint32_t w = static_cast<std::uint32_t>(integer(p, "image_width"));
             std::uint32_t h = static_cast<std::uint32_t>(integer(p, "image_height"));
             if (f.image()) {
               w = f.image()->width;
               h = f.image()->height;
             }
             f.set_labels(algo::gen_bbox_2d(f.labels(), *f.calibration(), w, h));
           }});
}

// ---------------------------------------------------------------------------
// camera
// ---------------------------------------------------------------------------

inline void register_camera(FunctionRegistry& reg) {
  using namespace builtin_detail;
  reg.add({Category::camera, "project_point_cloud_points", "Draws depth-colored lidar points onto the image",
           {{"point_size", std::int64_t{2}, 1.0}, {"max_depth", 50.0}}, 10,
           {Slot::image, Slot::point_cloud, Slot::calibration},
           [](const ParamMap& p) { positive(p, {"max_depth"}); },
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             f.set_image(algo::project_points_to_image(*f.image(), *f.point_cloud(), *f.calibration(),
                                                       static_cast<int>(integer(p, "point_size")),
                                                       num(p, "max_depth")));
           }});

  reg.add({Category::camera, "UltralyticsYOLOv5", "Deep detector placeholder; emits no detections",
           {{"source", std::string("camera")}}, 20, {Slot::image}, nullptr,
           [](Frame& f, const ParamMap&, const PipelineConfig&, FunctionContext&) {
             f.log(LogLevel::info, "camera.UltralyticsYOLOv5", "no model loaded; 0 detections");
           }});
}

// ---------------------------------------------------------------------------
// label
// ---------------------------------------------------------------------------

inline void register_label(FunctionRegistry& reg) {
  using namespace builtin_detail;
  reg.add({Category::label, "convert_labels_camera_to_lidar", "KITTI camera-frame labels to lidar-frame boxes",
           {}, 10, {Slot::raw_labels, Slot::calibration}, nullptr,
           [](Frame& f, const ParamMap&, const PipelineConfig&, FunctionContext&) {
             auto conv = algo::convert_labels_camera_to_lidar(*f.raw_labels(), *f.calibration());
             for (const auto& s : conv.skipped) f.log(LogLevel::warning, "label.convert_labels_camera_to_lidar", s);
             auto labels = f.labels();
             labels.insert(labels.end(), conv.labels.begin(), conv.labels.end());
             f.set_labels(std::move(labels));
           }});

  reg.add({Category::label, "remove_out_of_bound_labels", "Drops labels whose center is outside the bounds",
           bounds_params(-50, 50, -5, 5), 20, {}, check_bounds_params,
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             f.set_labels(algo::remove_out_of_bound_labels(f.labels(), vec3(p, "min_"), vec3(p, "max_")));
           }});

  reg.add({Category::label, "remove_less_point_labels", "Drops labels containing fewer than min_points points",
           {{"min_points", std::int64_t{5}, 0.0}}, 30, {Slot::point_cloud}, nullptr,
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             f.set_labels(algo::remove_less_point_labels(f.labels(), *f.point_cloud(),
                                                         static_cast<std::size_t>(integer(p, "min_points"))));
           }});
}

// ---------------------------------------------------------------------------
// post
// ---------------------------------------------------------------------------

inline void register_post(FunctionRegistry& reg) {
  using namespace builtin_detail;
  reg.add({Category::post, "Fuse2DPredictedBBoxes", "Greedy IoU fusion of 2D boxes across two sources",
           {{"modality_a", std::string("lidar")}, {"modality_b", std::string("camera")}, {"iou_threshold", 0.5, 0.0, 1.0}},
           10, {}, nullptr,
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             f.set_labels(algo::fuse_2d_bboxes(f.labels(), get_param<std::string>(p, "modality_a"),
                                               get_param<std::string>(p, "modality_b"), num(p, "iou_threshold")));
           }});

  reg.add({Category::post, "GenerateKDTreePastTrajectory", "Nearest-center track matching; fills past_trajectory",
           {{"match_radius", 2.0}, {"max_history", std::int64_t{10}, 1.0}}, 20, {},
           [](const ParamMap& p) { positive(p, {"match_radius"}); },
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext& ctx) {
             auto& st = ctx.state<algo::TrackState>("post.GenerateKDTreePastTrajectory");
             if (st.last_frame && f.index != *st.last_frame + 1) {
               st.reset();
               f.log(LogLevel::info, "post.GenerateKDTreePastTrajectory", "non-consecutive frame; tracks reset");
             }
             f.set_labels(algo::kdtree_past_trajectory(f.labels(), st, num(p, "match_radius"),
                                                       static_cast<std::size_t>(integer(p, "max_history"))));
             st.last_frame = f.index;
           }});

  reg.add({Category::post, "GenerateCubicSplineFutureTrajectory", "Natural cubic spline extrapolation of past trajectory",
           {{"k_future", std::int64_t{5}, 1.0}, {"dt", 0.1}, {"dt_hist", 0.1}}, 30, {},
           [](const ParamMap& p) { positive(p, {"dt", "dt_hist"}); },
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             auto labels = f.labels();
             std::size_t short_history = 0;
             for (auto& l : labels) {
               auto fut = algo::spline_future(l.past_trajectory, static_cast<std::size_t>(integer(p, "k_future")),
                                              num(p, "dt"), num(p, "dt_hist"));
               if (fut) {
                 l.future_trajectory = std::move(*fut);
               } else {
                 ++short_history;
               }
             }
             if (short_history) {
               f.log(LogLevel::warning, "post.GenerateCubicSplineFutureTrajectory",
                     std::to_string(short_history) + " label(s) with fewer than " +
                         std::to_string(algo::kMinSplineHistory) + " past points left unchanged");
             }
             f.set_labels(std::move(labels));
           }});

  reg.add({Category::post, "GeneratePolyFitFutureTrajectory", "Least-squares polynomial extrapolation of past trajectory",
           {{"degree", std::int64_t{2}, 0.0}, {"k_future", std::int64_t{5}, 1.0}}, 31, {}, nullptr,
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             auto labels = f.labels();
             std::size_t skipped = 0;
             const auto degree = static_cast<std::size_t>(integer(p, "degree"));
             for (auto& l : labels) {
               auto fut = algo::polyfit_future(l.past_trajectory, degree, static_cast<std::size_t>(integer(p, "k_future")));
               if (fut) {
                 l.future_trajectory = std::move(*fut);
               } else {
                 ++skipped;
               }
             }
             if (skipped) {
               f.log(LogLevel::warning, "post.GeneratePolyFitFutureTrajectory",
                     std::to_string(skipped) + " label(s) with too short or degenerate history for degree " +
                         std::to_string(degree) + " left unchanged");
             }
             f.set_labels(std::move(labels));
           }});

  reg.add({Category::post, "GenerateVelocityFromTrajectory", "Velocity from the last two trajectory points",
           {{"fps", 10.0}}, 40, {}, [](const ParamMap& p) { positive(p, {"fps"}); },
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext&) {
             auto labels = f.labels();
             for (auto& l : labels) l.velocity = algo::velocity_from_trajectory(l.past_trajectory, num(p, "fps"));
             f.set_labels(std::move(labels));
           }});

  reg.add({Category::post, "create_pcdet_dataset", "Writes points/<stem>.bin and labels/<stem>.txt",
           {{"out_dir", std::string("outputs/pcdet")}}, 50, {Slot::point_cloud}, nullptr,
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext& ctx) {
             algo::export_pcdet(*f.point_cloud(), f.labels(), frame_stem(f),
                                resolve_dir(ctx, get_param<std::string>(p, "out_dir")));
           }});

  reg.add({Category::post, "create_per_object_pcdet_dataset", "Writes objects/<stem>_<k>.bin and .txt per label",
           {{"out_dir", std::string("outputs/pcdet_objects")}}, 51, {Slot::point_cloud}, nullptr,
           [](Frame& f, const ParamMap& p, const PipelineConfig&, FunctionContext& ctx) {
             algo::export_per_object_pcdet(*f.point_cloud(), f.labels(), frame_stem(f),
                                           resolve_dir(ctx, get_param<std::string>(p, "out_dir")));
           }});
}

inline void register_builtins(FunctionRegistry& reg) {
  register_pre(reg);
  register_lidar(reg);
  register_camera(reg);
  register_label(reg);
  register_post(reg);
}

inline FunctionRegistry builtin_registry() {
  FunctionRegistry reg;
  register_builtins(reg);
  return reg;
}

/// Every built-in present and disabled, at its default priority and params.
inline PipelineConfig default_config(const FunctionRegistry& reg) {
  PipelineConfig cfg;
  for (Category c : kCategories) {
    auto specs = reg.in_category(c);
    std::stable_sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) {
      return std::tie(a->default_priority, a->name) < std::tie(b->default_priority, b->name);
    });
    for (const auto& s : specs) {
      if (!s->custom) cfg.functions(c).push_back(default_entry(*s));
    }
  }
  return cfg;
}

inline PipelineConfig default_config() { return default_config(builtin_registry()); }

}  // namespace liguard::engine
