#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include <pthread.h>

#include "liguard/liguard.hpp"
#include "liguard/service/server.hpp"

namespace fs = std::filesystem;
using namespace liguard;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int severity(LogLevel l) { return static_cast<int>(l); }

void print_logs(const Frame& f, LogLevel min_level) {
  for (const auto& e : f.logs) {
    if (severity(e.level) < severity(min_level)) continue;
    std::fprintf(stderr, "[%06zu] %-7s %s: %s\n", f.index, to_string(e.level), e.source.c_str(), e.message.c_str());
  }
}

void print_summary(const engine::RunSummary& s) {
  std::printf("frames: %zu", s.frames);
  if (s.dropped) std::printf(" (dropped %zu)", s.dropped);
  std::printf("\nerrors: %zu (io %zu)\nwarnings: %zu\n", s.errors, s.io_errors, s.warnings);
  if (s.timings.empty()) return;
  std::printf("%-48s %8s %8s %8s %12s\n", "function", "calls", "skipped", "errors", "mean ms");
  for (const auto& [name, t] : s.timings) {
    const double mean = t.calls ? t.total_ms / static_cast<double>(t.calls) : 0.0;
    std::printf("%-48s %8zu %8zu %8zu %12.3f\n", name.c_str(), t.calls, t.skipped, t.errors, mean);
  }
}

int cmd_run(const fs::path& dir, bool headless) {
  engine::Engine e = engine::Engine::open(dir);
  for (const auto& w : e.startup_warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const LogLevel level = log_level_from_string(e.config().logging.level);
  const bool print = e.config().logging.print && !headless;
  engine::RunSummary s;
  if (headless) {
    s = e.run_all();
  } else {
    // Paced replay at data.replay_hz, printing frame logs as they happen.
    io::SteadyClock clock;
    const double period = e.config().data.replay_hz > 0 ? 1.0 / e.config().data.replay_hz : 0.0;
    double due = clock.now();
    s = e.run_all([&](const Frame& f) {
      if (print) print_logs(f, level);
      due += period;
      const double wait = due - clock.now();
      if (wait > 0) std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    });
  }
  print_summary(s);
  return s.io_errors > 0 ? kExitIo : 0;
}

int cmd_serve(const fs::path& dir, unsigned short port, const std::string& address,
              const std::optional<fs::path>& web_root) {
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  engine::Engine e = engine::Engine::open(dir);
  for (const auto& w : e.startup_warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
  service::Session session(std::move(e));
  service::ServerOptions opts;
  opts.address = address;
  opts.port = port;
  opts.web_root = web_root;
  service::Server server(session, opts);
  server.start();
  session.start();
  std::printf("serving %s on ws://%s:%u (%s)\n", dir.string().c_str(), address.c_str(), server.port(),
              service::kProtocol);
  std::fflush(stdout);

  int sig = 0;
  sigwait(&sigs, &sig);
  server.stop();
  session.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"liguard: lidar pipeline runner and control service"};
  app.require_subcommand(1);

  fs::path dir;
  auto* new_cmd = app.add_subcommand("new", "Create a pipeline directory with every built-in function disabled");
  new_cmd->add_option("dir", dir)->required();

  bool headless = false;
  auto* run_cmd = app.add_subcommand("run", "Process every frame and print a summary");
  run_cmd->add_option("dir", dir)->required();
  run_cmd->add_flag("--headless", headless, "Run as fast as possible and print only the summary");

  unsigned short port = 8765;
  std::string address = "127.0.0.1";
  std::optional<fs::path> web_root;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a live session over WebSocket");
  serve_cmd->add_option("dir", dir)->required();
  serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)")->required();
  serve_cmd->add_option("--address", address, "Bind address");
  serve_cmd->add_option("--web-root", web_root, "Directory served at /");

  std::string category, name;
  auto* scaffold_cmd = app.add_subcommand("scaffold", "Create a custom function stub and register it disabled");
  scaffold_cmd->add_option("dir", dir)->required();
  scaffold_cmd->add_option("category", category)->required();
  scaffold_cmd->add_option("name", name)->required();

  std::string kind;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic example pipeline (roadside or kitti)");
  synth_cmd->add_option("kind", kind)->required()->check(CLI::IsMember({"roadside", "kitti"}));
  synth_cmd->add_option("dir", dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*new_cmd) {
      for (const auto& p : engine::new_pipeline(dir)) std::printf("%s\n", p.string().c_str());
      return 0;
    }
    if (*run_cmd) return cmd_run(dir, headless);
    if (*serve_cmd) return cmd_serve(dir, port, address, web_root);
    if (*scaffold_cmd) {
      for (const auto& p : engine::scaffold_custom_function(dir, category, name)) std::printf("%s\n", p.string().c_str());
      return 0;
    }
    if (*synth_cmd) {
      if (kind == "roadside") {
        sim::write_roadside_pipeline(dir, sim::roadside_scene());
      } else {
        sim::write_kitti_pipeline(dir, sim::kitti_fixture());
      }
      std::printf("%s\n", dir.string().c_str());
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const ScheduleError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
