#pragma once

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "liguard/core/error.hpp"

namespace liguard {

// ---------------------------------------------------------------------------
// Process categories
// ---------------------------------------------------------------------------

enum class Category { pre, lidar, camera, calib, label, post };

/// Execution order of categories within a frame.
inline constexpr std::array<Category, 6> kCategories = {
    Category::pre,   Category::lidar, Category::camera,
    Category::calib, Category::label, Category::post};

inline std::string_view category_name(Category c) {
  switch (c) {
    case Category::pre: return "pre";
    case Category::lidar: return "lidar";
    case Category::camera: return "camera";
    case Category::calib: return "calib";
    case Category::label: return "label";
    case Category::post: return "post";
  }
  return "";
}

inline std::optional<Category> category_from_name(std::string_view name) {
  for (Category c : kCategories) {
    if (category_name(c) == name) return c;
  }
  return std::nullopt;
}

inline std::string category_list() {
  std::string out;
  for (Category c : kCategories) {
    if (!out.empty()) out += ", ";
    out += category_name(c);
  }
  return out;
}

inline Category parse_category(std::string_view name) {
  if (auto c = category_from_name(name)) return *c;
  throw ConfigError("unknown category '" + std::string(name) +
                    "'; valid categories: " + category_list());
}

// ---------------------------------------------------------------------------
// Parameter values
// ---------------------------------------------------------------------------

using ParamValue = std::variant<bool, std::int64_t, double, std::string,
                                std::vector<double>, std::vector<std::string>>;
using ParamMap = std::map<std::string, ParamValue>;

inline std::string_view param_type_name(const ParamValue& v) {
  switch (v.index()) {
    case 0: return "bool";
    case 1: return "int";
    case 2: return "float";
    case 3: return "string";
    case 4: return "float list";
    case 5: return "string list";
  }
  return "?";
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return ".nan";
  if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  std::string s(buf.data(), res.ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t start = (s[0] == '+' || s[0] == '-') ? 1 : 0;
  if (start == s.size()) return std::nullopt;
  for (std::size_t i = start; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
  }
  std::int64_t v = 0;
  const char* first = s.data() + (s[0] == '+' ? 1 : 0);
  auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s == ".nan" || s == ".NaN" || s == ".NAN") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (s == ".inf" || s == "+.inf" || s == ".Inf") {
    return std::numeric_limits<double>::infinity();
  }
  if (s == "-.inf" || s == "-.Inf") return -std::numeric_limits<double>::infinity();
  if (s.empty()) return std::nullopt;
  const char* first = s.data() + (s[0] == '+' ? 1 : 0);
  double v = 0;
  auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

namespace detail {

inline bool looks_special(const std::string& s) {
  if (s.empty()) return true;
  if (s == "true" || s == "false" || s == "True" || s == "False" ||
      s == "null" || s == "~" || s == "yes" || s == "no") {
    return true;
  }
  return parse_int(s).has_value() || parse_double(s).has_value();
}

inline void emit_string(YAML::Emitter& out, const std::string& s) {
  if (looks_special(s)) {
    out << YAML::DoubleQuoted << s;
  } else {
    out << s;
  }
}

/// A scalar decoded from YAML before being matched against an expected type.
inline ParamValue decode_scalar(const YAML::Node& node) {
  const std::string& text = node.Scalar();
  if (node.Tag() == "!") return text;  // quoted
  if (text == "true" || text == "True") return true;
  if (text == "false" || text == "False") return false;
  if (auto i = parse_int(text)) return *i;
  if (auto d = parse_double(text)) return *d;
  return text;
}

}  // namespace detail

inline void emit_param(YAML::Emitter& out, const ParamValue& v) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) {
          out << (x ? "true" : "false");
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          out << std::to_string(x);
        } else if constexpr (std::is_same_v<T, double>) {
          out << format_double(x);
        } else if constexpr (std::is_same_v<T, std::string>) {
          detail::emit_string(out, x);
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          out << YAML::Flow << YAML::BeginSeq;
          for (double d : x) out << format_double(d);
          out << YAML::EndSeq;
        } else {
          out << YAML::Flow << YAML::BeginSeq;
          for (const auto& s : x) detail::emit_string(out, s);
          out << YAML::EndSeq;
        }
      },
      v);
}

/// Decodes a YAML node into a parameter value. Integer lists become float
/// lists; an empty list is a float list.
inline ParamValue decode_param(const YAML::Node& node, const std::string& where) {
  if (node.IsScalar()) return detail::decode_scalar(node);
  if (node.IsSequence()) {
    std::vector<double> nums;
    std::vector<std::string> strs;
    bool numeric = true;
    for (const auto& item : node) {
      if (!item.IsScalar()) {
        throw ConfigError(where + ": nested lists are not supported");
      }
      ParamValue v = detail::decode_scalar(item);
      if (auto* i = std::get_if<std::int64_t>(&v)) {
        nums.push_back(static_cast<double>(*i));
      } else if (auto* d = std::get_if<double>(&v)) {
        nums.push_back(*d);
      } else {
        numeric = false;
      }
      strs.push_back(item.Scalar());
    }
    if (numeric) return nums;
    return strs;
  }
  throw ConfigError(where + ": expected a scalar or a list");
}

inline nlohmann::json param_to_json(const ParamValue& v) {
  return std::visit([](const auto& x) { return nlohmann::json(x); }, v);
}

/// Converts a JSON value into a parameter value, without any target type.
inline ParamValue param_from_json(const nlohmann::json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    if (std::all_of(j.begin(), j.end(), [](const auto& e) { return e.is_number(); })) {
      std::vector<double> out;
      for (const auto& e : j) out.push_back(e.get<double>());
      return out;
    }
    if (std::all_of(j.begin(), j.end(), [](const auto& e) { return e.is_string(); })) {
      std::vector<std::string> out;
      for (const auto& e : j) out.push_back(e.get<std::string>());
      return out;
    }
  }
  throw PatchRejected("unsupported value " + j.dump());
}

/// Coerces `value` to the alternative held by `like`. Integers widen into
/// floats; nothing else converts.
inline std::optional<ParamValue> coerce_param(const ParamValue& like,
                                              const ParamValue& value) {
  if (like.index() == value.index()) return value;
  if (std::holds_alternative<double>(like)) {
    if (auto* i = std::get_if<std::int64_t>(&value)) {
      return static_cast<double>(*i);
    }
  }
  if (std::holds_alternative<std::vector<double>>(like)) {
    // An empty string list is indistinguishable from an empty numeric list.
    if (auto* s = std::get_if<std::vector<std::string>>(&value); s && s->empty()) {
      return std::vector<double>{};
    }
  }
  if (std::holds_alternative<std::vector<std::string>>(like)) {
    if (auto* d = std::get_if<std::vector<double>>(&value); d && d->empty()) {
      return std::vector<std::string>{};
    }
  }
  return std::nullopt;
}

inline std::string param_to_string(const ParamValue& v) {
  YAML::Emitter out;
  emit_param(out, v);
  return out.c_str();
}

// ---------------------------------------------------------------------------
// Config sections
// ---------------------------------------------------------------------------

/// One function slot under proc.<category>.
struct FunctionEntry {
  std::string name;
  bool enabled = false;
  std::int64_t priority = 100;
  ParamMap params;

  bool operator==(const FunctionEntry&) const = default;
};

/// Reflection table entry for a fixed config section field.
template <class Section>
struct Field {
  std::string_view name;
  std::variant<bool Section::*, std::int64_t Section::*, double Section::*,
               std::string Section::*>
      member;
  std::optional<double> min = std::nullopt;
  bool min_exclusive = false;
};

struct DataConfig {
  std::string main_dir = "data";
  std::string lidar_dir = "lidar";
  std::string camera_dir = "camera";
  std::string calib_dir = "calib";
  std::string label_dir = "label";
  std::string pcd_type = ".bin";
  std::string img_type = ".png";
  std::string calib_type = ".txt";
  std::string label_type = ".txt";
  bool lidar_enabled = true;
  bool camera_enabled = false;
  bool calib_enabled = false;
  bool label_enabled = false;
  double replay_hz = 10.0;
  /// Deliver frames through the simulated live sensor (drops when slow).
  bool live_replay = false;

  bool operator==(const DataConfig&) const = default;

  static const std::vector<Field<DataConfig>>& fields() {
    static const std::vector<Field<DataConfig>> f = {
        {"main_dir", &DataConfig::main_dir},
        {"lidar_dir", &DataConfig::lidar_dir},
        {"camera_dir", &DataConfig::camera_dir},
        {"calib_dir", &DataConfig::calib_dir},
        {"label_dir", &DataConfig::label_dir},
        {"pcd_type", &DataConfig::pcd_type},
        {"img_type", &DataConfig::img_type},
        {"calib_type", &DataConfig::calib_type},
        {"label_type", &DataConfig::label_type},
        {"lidar_enabled", &DataConfig::lidar_enabled},
        {"camera_enabled", &DataConfig::camera_enabled},
        {"calib_enabled", &DataConfig::calib_enabled},
        {"label_enabled", &DataConfig::label_enabled},
        {"replay_hz", &DataConfig::replay_hz, 0.0, true},
        {"live_replay", &DataConfig::live_replay},
    };
    return f;
  }
};

struct VisualizationConfig {
  double point_size = 2.0;
  bool show_labels = true;
  std::int64_t trail_length = 10;
  /// Frame events carry at most this many points (uniform stride beyond).
  std::int64_t max_stream_points = 200000;

  bool operator==(const VisualizationConfig&) const = default;

  static const std::vector<Field<VisualizationConfig>>& fields() {
    static const std::vector<Field<VisualizationConfig>> f = {
        {"point_size", &VisualizationConfig::point_size, 0.0, true},
        {"show_labels", &VisualizationConfig::show_labels},
        {"trail_length", &VisualizationConfig::trail_length, 0.0},
        {"max_stream_points", &VisualizationConfig::max_stream_points, 1.0},
    };
    return f;
  }
};

struct LoggingConfig {
  std::string level = "info";
  bool print = true;

  bool operator==(const LoggingConfig&) const = default;

  static const std::vector<Field<LoggingConfig>>& fields() {
    static const std::vector<Field<LoggingConfig>> f = {
        {"level", &LoggingConfig::level},
        {"print", &LoggingConfig::print},
    };
    return f;
  }
};

/// The shared configuration tree.
struct PipelineConfig {
  DataConfig data;
  std::array<std::vector<FunctionEntry>, kCategories.size()> proc;
  VisualizationConfig visualization;
  LoggingConfig logging;

  bool operator==(const PipelineConfig&) const = default;

  std::vector<FunctionEntry>& functions(Category c) {
    return proc[static_cast<std::size_t>(c)];
  }
  const std::vector<FunctionEntry>& functions(Category c) const {
    return proc[static_cast<std::size_t>(c)];
  }

  FunctionEntry* find(Category c, std::string_view name) {
    for (auto& e : functions(c)) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }
  const FunctionEntry* find(Category c, std::string_view name) const {
    for (const auto& e : functions(c)) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }
};

namespace detail {

template <class Section>
ParamValue read_field(const Section& s, const Field<Section>& f) {
  return std::visit([&](auto member) -> ParamValue { return s.*member; },
                    f.member);
}

/// Assigns `value` to the field after type and range checks.
template <class Section>
void write_field(Section& s, const Field<Section>& f, const ParamValue& value,
                 const std::string& where) {
  ParamValue current = read_field(s, f);
  auto coerced = coerce_param(current, value);
  if (!coerced) {
    throw PatchRejected(where + ": expected " +
                        std::string(param_type_name(current)) + ", got " +
                        std::string(param_type_name(value)));
  }
  if (f.min) {
    double x = std::holds_alternative<double>(*coerced)
                   ? std::get<double>(*coerced)
                   : static_cast<double>(std::get<std::int64_t>(*coerced));
    if (f.min_exclusive ? !(x > *f.min) : !(x >= *f.min)) {
      throw PatchRejected(where + ": value " + param_to_string(*coerced) +
                          " must be " + (f.min_exclusive ? "> " : ">= ") +
                          format_double(*f.min));
    }
  }
  std::visit(
      [&](auto member) {
        using T = std::decay_t<decltype(s.*member)>;
        s.*member = std::get<T>(*coerced);
      },
      f.member);
}

template <class Section>
const Field<Section>* find_field(std::string_view name) {
  for (const auto& f : Section::fields()) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

template <class Section>
void emit_section(YAML::Emitter& out, const char* key, const Section& s) {
  out << YAML::Key << key << YAML::Value << YAML::BeginMap;
  for (const auto& f : Section::fields()) {
    out << YAML::Key << std::string(f.name) << YAML::Value;
    emit_param(out, read_field(s, f));
  }
  out << YAML::EndMap;
}

template <class Section>
void parse_section(const YAML::Node& node, Section& s, const std::string& key) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError(key + " must be a mapping");
  for (const auto& kv : node) {
    const std::string name = kv.first.as<std::string>();
    const auto* f = find_field<Section>(name);
    if (!f) throw ConfigError("unknown key " + key + "." + name);
    try {
      write_field(s, *f, decode_param(kv.second, key + "." + name),
                  key + "." + name);
    } catch (const PatchRejected& e) {
      throw ConfigError(e.what());
    }
  }
}

}  // namespace detail

inline std::string to_yaml(const PipelineConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  detail::emit_section(out, "data", cfg.data);
  out << YAML::Key << "proc" << YAML::Value << YAML::BeginMap;
  for (Category c : kCategories) {
    out << YAML::Key << std::string(category_name(c)) << YAML::Value;
    const auto& fns = cfg.functions(c);
    if (fns.empty()) {
      out << YAML::Flow << YAML::BeginMap << YAML::EndMap;
      continue;
    }
    out << YAML::BeginMap;
    for (const auto& fn : fns) {
      out << YAML::Key << fn.name << YAML::Value << YAML::BeginMap;
      out << YAML::Key << "enabled" << YAML::Value << (fn.enabled ? "true" : "false");
      out << YAML::Key << "priority" << YAML::Value << std::to_string(fn.priority);
      for (const auto& [k, v] : fn.params) {
        out << YAML::Key << k << YAML::Value;
        emit_param(out, v);
      }
      out << YAML::EndMap;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  detail::emit_section(out, "visualization", cfg.visualization);
  detail::emit_section(out, "logging", cfg.logging);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

/// Parses one `name: {enabled, priority, params...}` mapping.
inline FunctionEntry parse_function_entry(const std::string& name,
                                          const YAML::Node& body,
                                          const std::string& where) {
  FunctionEntry fn;
  fn.name = name;
  if (!body || body.IsNull()) return fn;
  if (!body.IsMap()) throw ConfigError(where + " must be a mapping");
  for (const auto& kv : body) {
    const std::string key = kv.first.as<std::string>();
    ParamValue v = decode_param(kv.second, where + "." + key);
    if (key == "enabled") {
      if (!std::holds_alternative<bool>(v)) {
        throw ConfigError(where + ".enabled must be a bool");
      }
      fn.enabled = std::get<bool>(v);
    } else if (key == "priority") {
      if (!std::holds_alternative<std::int64_t>(v)) {
        throw ConfigError(where + ".priority must be an integer");
      }
      fn.priority = std::get<std::int64_t>(v);
    } else {
      fn.params[key] = std::move(v);
    }
  }
  return fn;
}

inline PipelineConfig config_from_yaml(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("invalid YAML: ") + e.what());
  }
  PipelineConfig cfg;
  if (!root || root.IsNull()) return cfg;
  if (!root.IsMap()) throw ConfigError("config root must be a mapping");
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    if (key != "data" && key != "proc" && key != "visualization" &&
        key != "logging") {
      throw ConfigError("unknown top-level key '" + key + "'");
    }
  }
  try {
    detail::parse_section(root["data"], cfg.data, "data");
    detail::parse_section(root["visualization"], cfg.visualization, "visualization");
    detail::parse_section(root["logging"], cfg.logging, "logging");
    if (const auto proc = root["proc"]) {
      if (!proc.IsMap()) throw ConfigError("proc must be a mapping");
      for (const auto& cat : proc) {
        const Category c = parse_category(cat.first.as<std::string>());
        const std::string where = "proc." + std::string(category_name(c));
        if (cat.second.IsNull()) continue;
        if (!cat.second.IsMap()) throw ConfigError(where + " must be a mapping");
        for (const auto& fn : cat.second) {
          const std::string name = fn.first.as<std::string>();
          if (cfg.find(c, name)) {
            throw ConfigError("duplicate function " + where + "." + name);
          }
          cfg.functions(c).push_back(
              parse_function_entry(name, fn.second, where + "." + name));
        }
      }
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_yaml(ss.str());
}

inline void save_config(const std::filesystem::path& path,
                        const PipelineConfig& cfg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write config " + path.string());
  out << to_yaml(cfg);
  if (!out) throw IoError("failed writing config " + path.string());
}

}  // namespace liguard
