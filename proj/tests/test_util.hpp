#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <string_view>

#include "liguard/core/types.hpp"
#include "liguard/engine/plugin.hpp"

namespace liguard::test {

using TempDir = engine::plugin_detail::TempDir;

inline std::string from_hex(std::string_view hex) {
  std::string out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<char>(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
  }
  return out;
}

inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double lo = -50, double hi = 50) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::uniform_real_distribution<double> ui(0, 1);
  PointCloud pc;
  pc.points.resize(n);
  for (auto& p : pc.points) p = {u(rng), u(rng), u(rng), ui(rng)};
  return pc;
}

/// Narrows every value to float32, the precision files keep.
inline PointCloud as_f32(PointCloud pc) {
  for (auto& p : pc.points) {
    p.x = static_cast<float>(p.x);
    p.y = static_cast<float>(p.y);
    p.z = static_cast<float>(p.z);
    p.intensity = static_cast<float>(p.intensity);
  }
  return pc;
}

}  // namespace liguard::test
