#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "d4d/lifting.hpp"
#include "d4d/octree.hpp"

namespace oracle {

// Bit-by-bit interleave, x in bit 0.
inline std::uint64_t interleave(std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  std::uint64_t code = 0;
  for (int b = 0; b < 21; ++b) {
    code |= std::uint64_t{(x >> b) & 1u} << (3 * b);
    code |= std::uint64_t{(y >> b) & 1u} << (3 * b + 1);
    code |= std::uint64_t{(z >> b) & 1u} << (3 * b + 2);
  }
  return code;
}

inline std::array<std::uint32_t, 3> cell(const d4d::GridFrame& f, const float* p, int level) {
  const double cells = std::ldexp(1.0, level);
  std::array<std::uint32_t, 3> c{};
  for (int k = 0; k < 3; ++k) {
    double x = std::floor((static_cast<double>(p[k]) - f.origin[k]) / f.extent * cells);
    if (x < 0) x = 0;
    if (x > cells - 1) x = cells - 1;
    c[k] = static_cast<std::uint32_t>(x);
  }
  return c;
}

struct Cell {
  std::array<double, 3> pos{};
  std::vector<double> vis;
  std::vector<double> ins;
  std::set<float> times;
  std::uint64_t count = 0;
};

// Uniform-grid aggregation in input order; keyed by interleaved cell code.
inline std::map<std::uint64_t, Cell> aggregate(const d4d::PointSet& pts, const d4d::GridFrame& f,
                                               int level) {
  std::map<std::uint64_t, Cell> cells;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto p = pts.pos(i);
    const auto c = cell(f, p.data(), level);
    Cell& acc = cells[interleave(c[0], c[1], c[2])];
    if (acc.count == 0) {
      acc.vis.assign(pts.d_vis(), 0.0);
      acc.ins.assign(pts.d_ins(), 0.0);
    }
    for (int k = 0; k < 3; ++k) acc.pos[k] += p[k];
    for (std::size_t d = 0; d < pts.d_vis(); ++d) acc.vis[d] += pts.vis(i)[d];
    for (std::size_t d = 0; d < pts.d_ins(); ++d) acc.ins[d] += pts.ins(i)[d];
    acc.times.insert(pts.t(i));
    ++acc.count;
  }
  for (auto& [key, acc] : cells) {
    const double n = static_cast<double>(acc.count);
    for (auto& x : acc.pos) x /= n;
    for (auto& x : acc.vis) x /= n;
    for (auto& x : acc.ins) x /= n;
  }
  return cells;
}

inline std::size_t occupied(const d4d::PointSet& pts, const d4d::GridFrame& f, int level) {
  std::set<std::array<std::uint32_t, 3>> s;
  for (std::size_t i = 0; i < pts.size(); ++i) s.insert(cell(f, pts.pos(i).data(), level));
  return s.size();
}

inline bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

// Empty string when the grid matches the brute-force aggregation at its depth.
inline std::string compare(const d4d::VoxelGrid& grid, const d4d::PointSet& pts, double rel) {
  const auto cells = aggregate(pts, grid.frame, grid.frame.depth);
  if (cells.size() != grid.voxels.size()) {
    return "voxel count " + std::to_string(grid.voxels.size()) + " vs " +
           std::to_string(cells.size());
  }
  std::size_t k = 0;
  for (const auto& [key, c] : cells) {
    const auto& v = grid.voxels[k++];
    if (v.key != key) return "key mismatch at " + std::to_string(k - 1);
    if (v.count != c.count) return "count mismatch at " + std::to_string(k - 1);
    if (std::set<float>(v.times.begin(), v.times.end()) != c.times ||
        v.times.size() != c.times.size()) {
      return "times mismatch at " + std::to_string(k - 1);
    }
    for (int a = 0; a < 3; ++a) {
      if (!close_rel(v.pos[a], c.pos[a], rel)) return "pos mismatch at " + std::to_string(k - 1);
    }
    for (std::size_t d = 0; d < c.vis.size(); ++d) {
      if (!close_rel(v.vis[d], c.vis[d], rel)) return "vis mismatch at " + std::to_string(k - 1);
    }
    for (std::size_t d = 0; d < c.ins.size(); ++d) {
      if (!close_rel(v.ins[d], c.ins[d], rel)) return "ins mismatch at " + std::to_string(k - 1);
    }
  }
  return {};
}

}  // namespace oracle
