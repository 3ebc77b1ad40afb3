#pragma once

#include <any>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "liguard/core/config.hpp"
#include "liguard/core/error.hpp"
#include "liguard/core/frame.hpp"

namespace liguard::engine {

/// Declared parameter: its default fixes the type; numeric bounds are inclusive.
struct ParamSpec {
  std::string name;
  ParamValue default_value;
  std::optional<double> min = std::nullopt;
  std::optional<double> max = std::nullopt;
};

/// What a function sees of the pipeline beyond its frame.
class FunctionContext {
 public:
  using CloudLoader = std::function<std::optional<PointCloud>(std::size_t)>;

  std::filesystem::path pipeline_dir = ".";
  std::size_t total_frames = 0;
  /// Loads the point cloud of dataset frame i without running the pipeline.
  CloudLoader load_cloud;

  /// Per-function persistent state (background models, track state...).
  template <class T>
  T& state(const std::string& key) {
    auto& slot = state_[key];
    if (!slot.has_value() || slot.type() != typeid(T)) slot = T{};
    return std::any_cast<T&>(slot);
  }

  void clear_state() { state_.clear(); }

 private:
  std::map<std::string, std::any> state_;
};

using FunctionImpl =
    std::function<void(Frame&, const ParamMap&, const PipelineConfig&, FunctionContext&)>;

/// A registered function: schema plus implementation.
struct FunctionSpec {
  Category category = Category::pre;
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  std::int64_t default_priority = 100;
  /// Slots that must be present; otherwise the function is a no-op with a warning.
  std::vector<Slot> requires_slots;
  /// Cross-parameter check on a fully resolved map; throws ParamError.
  std::function<void(const ParamMap&)> validate;
  FunctionImpl run;
  bool custom = false;

  const ParamSpec* param(std::string_view n) const {
    for (const auto& p : params) {
      if (p.name == n) return &p;
    }
    return nullptr;
  }
};

inline double numeric_value(const ParamValue& v) {
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return 0.0;
}

/// Type-checks one value against its spec; returns the coerced value.
inline ParamValue check_param(const ParamSpec& spec, const ParamValue& value, const std::string& where) {
  auto coerced = coerce_param(spec.default_value, value);
  if (!coerced) {
    throw ParamError(where + ": expected " + std::string(param_type_name(spec.default_value)) + ", got " +
                     std::string(param_type_name(value)));
  }
  const bool numeric = std::holds_alternative<double>(*coerced) || std::holds_alternative<std::int64_t>(*coerced);
  if (numeric) {
    const double x = numeric_value(*coerced);
    if (spec.min && !(x >= *spec.min)) {
      throw ParamError(where + ": value " + param_to_string(*coerced) + " below minimum " + format_double(*spec.min));
    }
    if (spec.max && !(x <= *spec.max)) {
      throw ParamError(where + ": value " + param_to_string(*coerced) + " above maximum " + format_double(*spec.max));
    }
  }
  return *coerced;
}

/// Defaults overlaid with the entry's params, type checked and validated.
/// Keys the schema does not know are passed through for custom functions
/// and rejected for built-ins.
inline ParamMap resolve_params(const FunctionSpec& spec, const FunctionEntry& entry) {
  ParamMap out;
  for (const auto& p : spec.params) out[p.name] = p.default_value;
  const std::string base = "proc." + std::string(category_name(spec.category)) + "." + spec.name + ".";
  for (const auto& [k, v] : entry.params) {
    if (const auto* p = spec.param(k)) {
      out[k] = check_param(*p, v, base + k);
    } else if (spec.custom) {
      out[k] = v;
    } else {
      throw ParamError(base + k + ": unknown parameter");
    }
  }
  if (spec.validate) spec.validate(out);
  return out;
}

template <class T>
const T& get_param(const ParamMap& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ParamError("missing parameter '" + name + "'");
  if (auto* v = std::get_if<T>(&it->second)) return *v;
  throw ParamError("parameter '" + name + "' has type " + std::string(param_type_name(it->second)));
}

/// (category, name) -> function.
class FunctionRegistry {
 public:
  void add(FunctionSpec spec) {
    auto key = std::make_pair(spec.category, spec.name);
    specs_[key] = std::make_shared<const FunctionSpec>(std::move(spec));
  }

  std::shared_ptr<const FunctionSpec> find(Category c, const std::string& name) const {
    auto it = specs_.find({c, name});
    return it == specs_.end() ? nullptr : it->second;
  }

  bool contains(Category c, const std::string& name) const { return specs_.count({c, name}) > 0; }

  std::vector<std::shared_ptr<const FunctionSpec>> in_category(Category c) const {
    std::vector<std::shared_ptr<const FunctionSpec>> out;
    for (const auto& [key, spec] : specs_) {
      if (key.first == c) out.push_back(spec);
    }
    return out;
  }

  void remove_custom() {
    for (auto it = specs_.begin(); it != specs_.end();) {
      it = it->second->custom ? specs_.erase(it) : std::next(it);
    }
  }

  std::size_t size() const { return specs_.size(); }

 private:
  std::map<std::pair<Category, std::string>, std::shared_ptr<const FunctionSpec>> specs_;
};

/// A disabled-by-default entry carrying the spec's defaults.
inline FunctionEntry default_entry(const FunctionSpec& spec) {
  FunctionEntry e;
  e.name = spec.name;
  e.enabled = false;
  e.priority = spec.default_priority;
  for (const auto& p : spec.params) e.params[p.name] = p.default_value;
  return e;
}

}  // namespace liguard::engine
