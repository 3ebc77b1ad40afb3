#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <string>
#include <vector>

#include "liguard/core/config.hpp"
#include "liguard/core/error.hpp"
#include "liguard/engine/builtins.hpp"
#include "liguard/engine/plugin.hpp"
#include "liguard/engine/registry.hpp"
#include "liguard/io/bytes.hpp"
#include "liguard/io/dataset.hpp"

namespace liguard::engine {

inline constexpr const char* kBaseConfig = "base_config.yml";

inline fs::path base_config_path(const fs::path& dir) { return dir / kBaseConfig; }

/// Creates base_config.yml (all built-ins present, disabled) and algo/<category>/.
inline std::vector<fs::path> new_pipeline(const fs::path& dir) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) throw IoError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir, ec)) throw IoError(dir.string() + " is not empty");
  }
  std::vector<fs::path> created;
  for (Category c : kCategories) {
    const fs::path sub = dir / "algo" / std::string(category_name(c));
    fs::create_directories(sub, ec);
    if (ec) throw IoError("cannot create " + sub.string() + ": " + ec.message());
    created.push_back(sub);
  }
  save_config(base_config_path(dir), default_config());
  created.push_back(base_config_path(dir));
  return created;
}

inline bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; });
}

inline std::string function_stub(Category c, const std::string& name) {
  return "\"\"\"Custom " + std::string(category_name(c)) + " function " + name + ".\"\"\"\n\n\n" + "def " + name +
         "(frame, params, config):\n"
         "    \"\"\"Process one frame and return it.\n\n"
         "    frame: dict with index, stem, point_cloud {points: [[x, y, z, i], ...]},\n"
         "        calibration, labels, cluster_ids, extras and logs.\n"
         "    params: this function's parameters from " +
         name +
         ".yml / base_config.yml.\n"
         "    config: the whole pipeline configuration.\n\n"
         "    Append {\"level\": ..., \"message\": ...} to frame[\"logs\"] to report.\n"
         "    \"\"\"\n"
         "    return frame\n";
}

inline std::string function_fragment(const std::string& name) {
  return name + ":\n  enabled: false\n  priority: 100\n";
}

/// Writes algo/<category>/<name>.py and .yml and adds the entry to base_config.yml.
inline std::vector<fs::path> scaffold_custom_function(const fs::path& dir, const std::string& category,
                                                      const std::string& name,
                                                      const FunctionRegistry& builtins = builtin_registry()) {
  const Category c = parse_category(category);
  if (!is_identifier(name)) throw ConfigError("'" + name + "' is not a valid identifier");
  const fs::path cfg_path = base_config_path(dir);
  PipelineConfig cfg = load_config(cfg_path);
  const fs::path sub = dir / "algo" / std::string(category_name(c));
  const fs::path py = sub / (name + ".py");
  const fs::path yml = sub / (name + ".yml");
  if (cfg.find(c, name) || builtins.contains(c, name) || fs::exists(py) || fs::exists(yml)) {
    throw ConfigError("function " + std::string(category_name(c)) + "." + name + " exists");
  }
  std::error_code ec;
  fs::create_directories(sub, ec);
  if (ec) throw IoError("cannot create " + sub.string() + ": " + ec.message());
  io::write_file(py, function_stub(c, name));
  io::write_file(yml, function_fragment(name));
  FunctionEntry e;
  e.name = name;
  cfg.functions(c).push_back(e);
  save_config(cfg_path, cfg);
  return {py, yml};
}

/// Declared entry from <name>.yml, or a disabled default when it is absent.
inline FunctionEntry read_fragment(const fs::path& yml, const std::string& name) {
  if (!fs::exists(yml)) {
    FunctionEntry e;
    e.name = name;
    return e;
  }
  YAML::Node root;
  try {
    root = YAML::LoadFile(yml.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError(yml.string() + ": " + e.what());
  }
  const auto body = root && root.IsMap() && root[name] ? root[name] : root;
  return parse_function_entry(name, body, yml.string());
}

/// Registers every algo/<category>/<name>.py and merges entries the config
/// does not list yet. Returns warnings for files that were skipped.
inline std::vector<std::string> discover_custom_functions(const fs::path& dir, FunctionRegistry& reg,
                                                          PipelineConfig& cfg) {
  std::vector<std::string> warnings;
  reg.remove_custom();
  for (Category c : kCategories) {
    const fs::path sub = dir / "algo" / std::string(category_name(c));
    std::error_code ec;
    if (!fs::is_directory(sub, ec)) continue;
    std::vector<fs::path> modules;
    for (const auto& entry : fs::directory_iterator(sub, ec)) {
      if (entry.is_regular_file() && entry.path().extension() == ".py") modules.push_back(entry.path());
    }
    std::sort(modules.begin(), modules.end());
    for (const auto& py : modules) {
      const std::string name = py.stem().string();
      const std::string qual = std::string(category_name(c)) + "." + name;
      if (!is_identifier(name)) {
        warnings.push_back(py.string() + ": not a valid function name; ignored");
        continue;
      }
      if (reg.contains(c, name)) {
        warnings.push_back(qual + " shadows a built-in; ignored");
        continue;
      }
      FunctionEntry declared;
      try {
        declared = read_fragment(py.parent_path() / (name + ".yml"), name);
      } catch (const Error& e) {
        warnings.push_back(e.what());
        continue;
      }
      reg.add(python_function_spec(c, name, fs::absolute(py), declared));
      if (!cfg.find(c, name)) cfg.functions(c).push_back(declared);
    }
  }
  return warnings;
}

}  // namespace liguard::engine
