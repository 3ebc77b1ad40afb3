#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "liguard/core/config.hpp"
#include "liguard/core/error.hpp"
#include "liguard/core/frame.hpp"
#include "liguard/core/json.hpp"
#include "liguard/engine/registry.hpp"

namespace liguard::engine {

struct ScheduleItem {
  Category category = Category::pre;
  std::string name;
  std::int64_t priority = 0;
  std::shared_ptr<const FunctionSpec> spec;
  ParamMap params;

  std::string qualified_name() const { return std::string(category_name(category)) + "." + name; }
};

using Schedule = std::vector<ScheduleItem>;

/// Enabled entries in category order, then ascending priority, then name.
inline Schedule build_schedule(const PipelineConfig& config, const FunctionRegistry& reg) {
  Schedule out;
  for (Category c : kCategories) {
    std::vector<ScheduleItem> items;
    for (const auto& e : config.functions(c)) {
      if (!e.enabled) continue;
      auto spec = reg.find(c, e.name);
      if (!spec) {
        throw ScheduleError("no function registered for (" + std::string(category_name(c)) + ", " + e.name + ")");
      }
      ParamMap params;
      try {
        params = resolve_params(*spec, e);
      } catch (const ParamError& err) {
        throw ScheduleError(err.what());
      }
      items.push_back({c, e.name, e.priority, std::move(spec), std::move(params)});
    }
    std::stable_sort(items.begin(), items.end(), [](const ScheduleItem& a, const ScheduleItem& b) {
      return std::tie(a.priority, a.name) < std::tie(b.priority, b.name);
    });
    for (auto& it : items) out.push_back(std::move(it));
  }
  return out;
}

struct FunctionTiming {
  std::size_t calls = 0;
  std::size_t skipped = 0;
  std::size_t errors = 0;
  /// Errors that were file-system failures.
  std::size_t io_errors = 0;
  double total_ms = 0.0;
};

using TimingTable = std::map<std::string, FunctionTiming>;

/// Runs every scheduled function on the frame in order.
///
/// A function whose required slots are absent is skipped with a warning;
/// a function that throws is skipped with an error. Nothing escapes.
inline void execute_frame(Frame& frame, const Schedule& schedule, const PipelineConfig& config,
                          FunctionContext& ctx, TimingTable* timings = nullptr) {
  for (const auto& item : schedule) {
    const std::string source = item.qualified_name();
    FunctionTiming* t = timings ? &(*timings)[source] : nullptr;
    std::vector<std::string> missing;
    for (Slot s : item.spec->requires_slots) {
      if (!frame.has(s)) missing.emplace_back(slot_name(s));
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
      frame.log(LogLevel::warning, source, "missing " + list + "; skipped");
      if (t) ++t->skipped;
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    try {
      item.spec->run(frame, item.params, config, ctx);
    } catch (const IoError& e) {
      frame.log(LogLevel::error, source, e.what());
      if (t) ++t->errors, ++t->io_errors;
    } catch (const std::exception& e) {
      frame.log(LogLevel::error, source, e.what());
      if (t) ++t->errors;
    } catch (...) {
      frame.log(LogLevel::error, source, "unknown exception");
      if (t) ++t->errors;
    }
    if (t) {
      ++t->calls;
      t->total_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
  }
}

// ---------------------------------------------------------------------------
// Live patches
// ---------------------------------------------------------------------------

namespace patch_detail {

inline std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : path) {
    if (ch == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  return parts;
}

template <class Section>
void patch_section(Section& s, const std::string& key, const ParamValue& value, const std::string& path) {
  const auto* f = detail::find_field<Section>(key);
  if (!f) throw PatchRejected(path + ": unknown key");
  detail::write_field(s, *f, value, path);
}

}  // namespace patch_detail

/// Returns `config` with one value replaced, or throws PatchRejected and
/// leaves it untouched.
///
/// Paths: data.<key>, visualization.<key>, logging.<key>,
/// proc.<category>.<function>.{enabled|priority|<param>}.
inline PipelineConfig apply_config_patch(const PipelineConfig& config, const std::string& path,
                                         const ParamValue& value, const FunctionRegistry& reg) {
  PipelineConfig out = config;
  const auto parts = patch_detail::split_path(path);
  if (parts.size() == 2 && parts[0] == "data") {
    patch_detail::patch_section(out.data, parts[1], value, path);
    return out;
  }
  if (parts.size() == 2 && parts[0] == "visualization") {
    patch_detail::patch_section(out.visualization, parts[1], value, path);
    return out;
  }
  if (parts.size() == 2 && parts[0] == "logging") {
    patch_detail::patch_section(out.logging, parts[1], value, path);
    try {
      log_level_from_string(out.logging.level);
    } catch (const ConfigError& e) {
      throw PatchRejected(path + ": " + e.what());
    }
    return out;
  }
  if (parts.size() != 4 || parts[0] != "proc") throw PatchRejected(path + ": unknown path");

  const auto cat = category_from_name(parts[1]);
  if (!cat) throw PatchRejected(path + ": unknown category '" + parts[1] + "'; valid categories: " + category_list());
  FunctionEntry* entry = out.find(*cat, parts[2]);
  if (!entry) throw PatchRejected(path + ": no function '" + parts[2] + "' in " + parts[1]);
  const auto spec = reg.find(*cat, parts[2]);
  const std::string& key = parts[3];

  if (key == "enabled") {
    const auto* b = std::get_if<bool>(&value);
    if (!b) throw PatchRejected(path + ": expected bool, got " + std::string(param_type_name(value)));
    if (*b && !spec) throw PatchRejected(path + ": function is not registered");
    entry->enabled = *b;
  } else if (key == "priority") {
    const auto* i = std::get_if<std::int64_t>(&value);
    if (!i) throw PatchRejected(path + ": expected int, got " + std::string(param_type_name(value)));
    entry->priority = *i;
  } else {
    try {
      if (spec && spec->param(key)) {
        entry->params[key] = check_param(*spec->param(key), value, path);
      } else if (auto it = entry->params.find(key); it != entry->params.end() && (!spec || spec->custom)) {
        auto coerced = coerce_param(it->second, value);
        if (!coerced) {
          throw ParamError(path + ": expected " + std::string(param_type_name(it->second)) + ", got " +
                           std::string(param_type_name(value)));
        }
        it->second = *coerced;
      } else {
        throw ParamError(path + ": unknown parameter");
      }
      if (spec) resolve_params(*spec, *entry);
    } catch (const ParamError& e) {
      throw PatchRejected(e.what());
    }
  }
  return out;
}

inline PipelineConfig apply_config_patch(const PipelineConfig& config, const std::string& path,
                                         const nlohmann::json& value, const FunctionRegistry& reg) {
  ParamValue v;
  try {
    v = param_from_json(value);
  } catch (const std::exception& e) {
    throw PatchRejected(path + ": " + e.what());
  }
  return apply_config_patch(config, path, v, reg);
}

}  // namespace liguard::engine
