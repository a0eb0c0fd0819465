#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "d4d/lifting.hpp"
#include "d4d/scene.hpp"

namespace d4d {

inline constexpr int kMaxOctreeDepth = 21;  // 3 x 21 bits fit a 64-bit Morton code

struct AlignedBox {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

struct OctreeConfig {
  int max_depth = kMaxOctreeDepth;
  double leaf_edge_min = 0.0;  // meters; levels with finer cells are skipped
  std::size_t target_voxels = 250'000;
  std::optional<AlignedBox> bounds;  // derived from the data when absent

  void validate() const;
};

// Cubic root cell of the octree. Level L splits it into 2^L cells per axis.
struct GridFrame {
  Vec3 origin = Vec3::Zero();
  double extent = 1.0;
  int depth = 0;  // level of the voxel keys

  double edge(int level) const { return std::ldexp(extent, -level); }
  bool operator==(const GridFrame&) const = default;
};

// Cube anchored at the data minimum whose side slightly exceeds the largest
// data extent, so no point sits on the upper boundary.
GridFrame fit_frame(const AlignedBox& box);
GridFrame frame_for(const OctreeConfig& cfg, const PointSet& points);

// Cell coordinate of a position at `level` (clamped into the grid).
std::array<std::uint32_t, 3> cell_of(const GridFrame& frame, std::span<const double, 3> pos,
                                     int level);
std::uint64_t morton_encode(std::uint32_t x, std::uint32_t y, std::uint32_t z);
std::array<std::uint32_t, 3> morton_decode(std::uint64_t code);

struct VoxelRecord {
  std::array<double, 3> pos{};  // member mean
  std::vector<double> vis;      // member mean
  std::vector<double> ins;      // member mean
  std::vector<float> times;     // sorted distinct member timestamps
  std::uint32_t count = 0;      // member points
  std::uint64_t key = 0;        // Morton code of the cell at the grid depth
};

struct VoxelGrid {
  GridFrame frame;
  std::size_t d_vis = 0;
  std::size_t d_ins = 0;
  std::vector<VoxelRecord> voxels;  // ascending key

  std::size_t size() const { return voxels.size(); }
  std::uint64_t point_count() const;
};

// Occupied-cell count at each level 0..max_depth (capped at the first level
// whose count exceeds `stop_above`).
std::vector<std::size_t> occupancy_by_level(const PointSet& points, const GridFrame& root,
                                            int max_depth, std::size_t stop_above);

// Aggregates at the finest uniform level whose occupied-cell count fits the
// target. Output is in Morton order and independent of input order.
VoxelGrid build_and_aggregate(const PointSet& points, const OctreeConfig& cfg);

// Count-weighted re-aggregation at coarser levels until at most `budget`
// voxels remain. `groups`, when given, receives the output index of every
// input voxel.
VoxelGrid condense(const VoxelGrid& grid, std::size_t budget,
                   std::vector<std::size_t>* groups = nullptr);

inline constexpr std::size_t kDefaultTokenBudget = 1024;

struct VoxelStats {
  std::size_t count = 0;
  int depth = 0;
  std::uint64_t points = 0;
  double compression_ratio = 0.0;         // points / voxels
  std::vector<std::size_t> occupancy;     // bucket b counts voxels with 2^b <= members < 2^(b+1)
  std::size_t memory_bytes = 0;           // serialized size
};

VoxelStats voxel_stats(const VoxelGrid& grid);

// "D4DV": u32 count, u32 d_vis, u32 d_ins, then per voxel f32x3 pos,
// f32 x d_vis, f32 x d_ins, u32 n_times, f32 x n_times, u32 count.
// The grid frame goes to the sidecar `path + ".grid.json"`.
void save_voxels(const VoxelGrid& grid, const std::filesystem::path& path);
VoxelGrid load_voxels(const std::filesystem::path& path);

}  // namespace d4d
