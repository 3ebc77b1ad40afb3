#pragma once

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "liguard/core/error.hpp"
#include "liguard/core/json.hpp"
#include "liguard/engine/registry.hpp"
#include "liguard/io/bytes.hpp"

extern char** environ;

namespace liguard::engine {

namespace fs = std::filesystem;

/// Python driver: loads the module from its path, calls the function with
/// (frame, params, config) and writes the returned frame.
inline constexpr const char* kPythonHarness = R"PY(
import importlib.util, json, sys
path, func, src, dst = sys.argv[1:5]
spec = importlib.util.spec_from_file_location("liguard_custom_" + func, path)
mod = importlib.util.module_from_spec(spec)
spec.loader.exec_module(mod)
with open(src) as f:
    req = json.load(f)
out = getattr(mod, func)(req["frame"], req["params"], req["config"])
if out is None:
    out = req["frame"]
with open(dst, "w") as f:
    json.dump(out, f)
)PY";

inline std::string python_interpreter() {
  if (const char* p = std::getenv("LIGUARD_PYTHON"); p && *p) return p;
  return "python3";
}

namespace plugin_detail {

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = fs::temp_directory_path() /
            ("liguard-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline std::string tail(const std::string& s, std::size_t max_chars) {
  std::string t = s.size() > max_chars ? s.substr(s.size() - max_chars) : s;
  while (!t.empty() && (t.back() == '\n' || t.back() == '\r')) t.pop_back();
  return t;
}

}  // namespace plugin_detail

/// Runs `func` from the Python file `module` on the frame in a child process.
/// The frame is only updated when the child succeeds.
inline void run_python_function(const fs::path& module, const std::string& func, Frame& frame,
                                const ParamMap& params, const PipelineConfig& config,
                                const std::string& log_source = {}) {
  plugin_detail::TempDir tmp;
  const fs::path in = tmp.path() / "in.json";
  const fs::path out = tmp.path() / "out.json";
  const fs::path err = tmp.path() / "stderr.txt";

  json req = {{"frame", frame_to_json(frame)}, {"config", config_to_json(config)}};
  req["frame"]["logs"] = json::array();
  json jp = json::object();
  for (const auto& [k, v] : params) jp[k] = param_to_json(v);
  req["params"] = std::move(jp);
  io::write_file(in, req.dump());

  const std::string python = python_interpreter();
  std::vector<std::string> args = {python, "-c", kPythonHarness, module.string(), func, in.string(), out.string()};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, python.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw Error("cannot start " + python + ": " + std::strerror(rc));

  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw Error("waitpid failed: " + std::string(std::strerror(errno)));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    std::string msg;
    try {
      msg = plugin_detail::tail(io::read_file(err), 2000);
    } catch (const IoError&) {
    }
    throw Error(func + " failed" + (msg.empty() ? "" : ": " + msg));
  }
  json result;
  try {
    result = json::parse(io::read_file(out));
  } catch (const json::exception& e) {
    throw Error(func + " returned invalid JSON: " + e.what());
  }
  if (!result.is_object()) throw Error(func + " must return the frame dict");
  try {
    apply_frame_json(frame, result, log_source.empty() ? func : log_source);
  } catch (const json::exception& e) {
    throw Error(func + " returned a malformed frame: " + e.what());
  }
}

/// Spec for a custom function implemented in `module`.
inline FunctionSpec python_function_spec(Category category, const std::string& name, const fs::path& module,
                                         const FunctionEntry& declared) {
  FunctionSpec spec;
  spec.category = category;
  spec.name = name;
  spec.description = "custom function " + module.filename().string();
  spec.default_priority = declared.priority;
  spec.custom = true;
  for (const auto& [k, v] : declared.params) spec.params.push_back({k, v});
  const std::string source = std::string(category_name(category)) + "." + name;
  spec.run = [module, name, source](Frame& f, const ParamMap& p, const PipelineConfig& cfg, FunctionContext&) {
    run_python_function(module, name, f, p, cfg, source);
  };
  return spec;
}

}  // namespace liguard::engine
