#include "d4d/octree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "d4d/binary_io.hpp"
#include "d4d/error.hpp"
#include "d4d/json_types.hpp"

namespace d4d {
namespace {

std::uint64_t spread_bits(std::uint32_t v) {
  std::uint64_t x = v & 0x1fffff;
  x = (x | x << 32) & 0x1f00000000ffffULL;
  x = (x | x << 16) & 0x1f0000ff0000ffULL;
  x = (x | x << 8) & 0x100f00f00f00f00fULL;
  x = (x | x << 4) & 0x10c30c30c30c30c3ULL;
  x = (x | x << 2) & 0x1249249249249249ULL;
  return x;
}

std::uint32_t compact_bits(std::uint64_t x) {
  x &= 0x1249249249249249ULL;
  x = (x ^ (x >> 2)) & 0x10c30c30c30c30c3ULL;
  x = (x ^ (x >> 4)) & 0x100f00f00f00f00fULL;
  x = (x ^ (x >> 8)) & 0x1f0000ff0000ffULL;
  x = (x ^ (x >> 16)) & 0x1f00000000ffffULL;
  x = (x ^ (x >> 32)) & 0x1fffffULL;
  return static_cast<std::uint32_t>(x);
}

std::array<double, 3> to_double(std::span<const float, 3> p) { return {p[0], p[1], p[2]}; }

// Total order over point contents used to fix the summation order inside a
// cell, so results do not depend on the input permutation.
bool content_less(const PointSet& pts, std::size_t a, std::size_t b) {
  const auto pa = pts.pos(a), pb = pts.pos(b);
  for (int k = 0; k < 3; ++k) {
    if (pa[k] != pb[k]) return pa[k] < pb[k];
  }
  if (pts.t(a) != pts.t(b)) return pts.t(a) < pts.t(b);
  if (pts.instance_id(a) != pts.instance_id(b)) return pts.instance_id(a) < pts.instance_id(b);
  const auto va = pts.vis(a), vb = pts.vis(b);
  if (!std::equal(va.begin(), va.end(), vb.begin())) {
    return std::lexicographical_compare(va.begin(), va.end(), vb.begin(), vb.end());
  }
  const auto ia = pts.ins(a), ib = pts.ins(b);
  return std::lexicographical_compare(ia.begin(), ia.end(), ib.begin(), ib.end());
}

struct Accumulator {
  std::array<double, 3> pos{};
  std::vector<double> vis;
  std::vector<double> ins;
  std::vector<float> times;
  std::uint64_t count = 0;

  Accumulator(std::size_t d_vis, std::size_t d_ins) : vis(d_vis, 0.0), ins(d_ins, 0.0) {}

  VoxelRecord finish(std::uint64_t key) {
    VoxelRecord v;
    const double n = static_cast<double>(count);
    for (int k = 0; k < 3; ++k) v.pos[k] = pos[k] / n;
    v.vis = std::move(vis);
    v.ins = std::move(ins);
    for (double& x : v.vis) x /= n;
    for (double& x : v.ins) x /= n;
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    v.times = std::move(times);
    v.count = static_cast<std::uint32_t>(count);
    v.key = key;
    return v;
  }
};

}  // namespace

void OctreeConfig::validate() const {
  if (max_depth < 1 || max_depth > kMaxOctreeDepth) {
    throw Error(Errc::kConfig, fmt::format("octree: max_depth {} outside [1, {}]", max_depth,
                                           kMaxOctreeDepth));
  }
  if (target_voxels < 1) throw Error(Errc::kConfig, "octree: target_voxels must be >= 1");
  if (!(leaf_edge_min >= 0.0)) throw Error(Errc::kConfig, "octree: leaf_edge_min must be >= 0");
}

std::uint64_t morton_encode(std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  return spread_bits(x) | (spread_bits(y) << 1) | (spread_bits(z) << 2);
}

std::array<std::uint32_t, 3> morton_decode(std::uint64_t code) {
  return {compact_bits(code), compact_bits(code >> 1), compact_bits(code >> 2)};
}

GridFrame fit_frame(const AlignedBox& box) {
  const Vec3 size = box.max - box.min;
  double extent = size.maxCoeff();
  if (!(extent > 0.0)) extent = 1.0;
  return GridFrame{box.min, extent * (1.0 + 1e-6), 0};
}

GridFrame frame_for(const OctreeConfig& cfg, const PointSet& points) {
  if (cfg.bounds) return fit_frame(*cfg.bounds);
  AlignedBox box{Vec3::Constant(std::numeric_limits<double>::infinity()),
                 Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = points.pos(i);
    for (int k = 0; k < 3; ++k) {
      box.min[k] = std::min<double>(box.min[k], p[k]);
      box.max[k] = std::max<double>(box.max[k], p[k]);
    }
  }
  return fit_frame(box);
}

std::array<std::uint32_t, 3> cell_of(const GridFrame& frame, std::span<const double, 3> pos,
                                     int level) {
  const double cells = std::ldexp(1.0, level);
  std::array<std::uint32_t, 3> c{};
  for (int k = 0; k < 3; ++k) {
    const double x = std::floor((pos[k] - frame.origin[k]) / frame.extent * cells);
    c[k] = static_cast<std::uint32_t>(std::clamp(x, 0.0, cells - 1.0));
  }
  return c;
}

std::uint64_t VoxelGrid::point_count() const {
  std::uint64_t n = 0;
  for (const auto& v : voxels) n += v.count;
  return n;
}

namespace {

struct SortedCodes {
  std::vector<std::uint64_t> codes;   // per point, at max depth
  std::vector<std::size_t> order;     // points sorted by (code, content)
};

SortedCodes sort_points(const PointSet& points, const GridFrame& root, int max_depth) {
  SortedCodes s;
  s.codes.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = to_double(points.pos(i));
    for (double v : p) {
      if (!std::isfinite(v)) throw Error(Errc::kNotFinite, "octree: point position not finite");
    }
    const auto c = cell_of(root, p, max_depth);
    s.codes[i] = morton_encode(c[0], c[1], c[2]);
  }
  s.order.resize(points.size());
  std::iota(s.order.begin(), s.order.end(), std::size_t{0});
  std::sort(s.order.begin(), s.order.end(), [&](std::size_t a, std::size_t b) {
    if (s.codes[a] != s.codes[b]) return s.codes[a] < s.codes[b];
    return content_less(points, a, b);
  });
  return s;
}

std::size_t distinct_prefixes(const SortedCodes& s, int shift) {
  std::size_t n = 0;
  std::uint64_t prev = 0;
  for (std::size_t k = 0; k < s.order.size(); ++k) {
    const std::uint64_t prefix = s.codes[s.order[k]] >> shift;
    if (k == 0 || prefix != prev) ++n;
    prev = prefix;
  }
  return n;
}

}  // namespace

std::vector<std::size_t> occupancy_by_level(const PointSet& points, const GridFrame& root,
                                            int max_depth, std::size_t stop_above) {
  const SortedCodes s = sort_points(points, root, max_depth);
  std::vector<std::size_t> counts;
  for (int level = 0; level <= max_depth; ++level) {
    counts.push_back(distinct_prefixes(s, 3 * (max_depth - level)));
    if (counts.back() > stop_above) break;
  }
  return counts;
}

VoxelGrid build_and_aggregate(const PointSet& points, const OctreeConfig& cfg) {
  cfg.validate();
  if (points.empty()) throw Error(Errc::kEmpty, "octree: no input points");
  GridFrame root = frame_for(cfg, points);
  const int max_depth = cfg.max_depth;
  const SortedCodes s = sort_points(points, root, max_depth);

  int level = 0;
  for (int l = 1; l <= max_depth; ++l) {
    if (root.edge(l) < cfg.leaf_edge_min) break;
    if (distinct_prefixes(s, 3 * (max_depth - l)) > cfg.target_voxels) break;
    level = l;
  }
  const int shift = 3 * (max_depth - level);

  VoxelGrid grid;
  grid.frame = root;
  grid.frame.depth = level;
  grid.d_vis = points.d_vis();
  grid.d_ins = points.d_ins();

  std::size_t k = 0;
  while (k < s.order.size()) {
    const std::uint64_t key = s.codes[s.order[k]] >> shift;
    Accumulator acc(grid.d_vis, grid.d_ins);
    for (; k < s.order.size() && (s.codes[s.order[k]] >> shift) == key; ++k) {
      const std::size_t i = s.order[k];
      const auto p = points.pos(i);
      for (int a = 0; a < 3; ++a) acc.pos[a] += p[a];
      const auto v = points.vis(i);
      for (std::size_t d = 0; d < v.size(); ++d) acc.vis[d] += v[d];
      const auto e = points.ins(i);
      for (std::size_t d = 0; d < e.size(); ++d) acc.ins[d] += e[d];
      acc.times.push_back(points.t(i));
      ++acc.count;
    }
    grid.voxels.push_back(acc.finish(key));
  }
  return grid;
}

VoxelGrid condense(const VoxelGrid& grid, std::size_t budget, std::vector<std::size_t>* groups) {
  if (budget < 1) throw Error(Errc::kConfig, "condense: budget must be >= 1");
  const std::size_t n = grid.voxels.size();
  if (groups) {
    groups->resize(n);
    std::iota(groups->begin(), groups->end(), std::size_t{0});
  }
  if (n <= budget) return grid;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return grid.voxels[a].key < grid.voxels[b].key; });

  auto count_at = [&](int shift) {
    std::size_t c = 0;
    std::uint64_t prev = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::uint64_t prefix = grid.voxels[order[k]].key >> shift;
      if (k == 0 || prefix != prev) ++c;
      prev = prefix;
    }
    return c;
  };
  int level = grid.frame.depth;
  while (level > 0 && count_at(3 * (grid.frame.depth - level)) > budget) --level;
  const int shift = 3 * (grid.frame.depth - level);

  VoxelGrid out;
  out.frame = grid.frame;
  out.frame.depth = level;
  out.d_vis = grid.d_vis;
  out.d_ins = grid.d_ins;
  std::size_t k = 0;
  while (k < n) {
    const std::uint64_t key = grid.voxels[order[k]].key >> shift;
    Accumulator acc(grid.d_vis, grid.d_ins);
    for (; k < n && (grid.voxels[order[k]].key >> shift) == key; ++k) {
      const VoxelRecord& v = grid.voxels[order[k]];
      const double w = v.count;
      for (int a = 0; a < 3; ++a) acc.pos[a] += w * v.pos[a];
      for (std::size_t d = 0; d < v.vis.size(); ++d) acc.vis[d] += w * v.vis[d];
      for (std::size_t d = 0; d < v.ins.size(); ++d) acc.ins[d] += w * v.ins[d];
      acc.times.insert(acc.times.end(), v.times.begin(), v.times.end());
      acc.count += v.count;
      if (groups) (*groups)[order[k]] = out.voxels.size();
    }
    out.voxels.push_back(acc.finish(key));
  }
  return out;
}

VoxelStats voxel_stats(const VoxelGrid& grid) {
  VoxelStats s;
  s.count = grid.voxels.size();
  s.depth = grid.frame.depth;
  s.points = grid.point_count();
  s.compression_ratio = s.count ? static_cast<double>(s.points) / static_cast<double>(s.count) : 0.0;
  s.memory_bytes = 16;
  for (const auto& v : grid.voxels) {
    const auto bucket = static_cast<std::size_t>(std::bit_width(v.count) - 1);
    if (s.occupancy.size() <= bucket) s.occupancy.resize(bucket + 1, 0);
    ++s.occupancy[bucket];
    s.memory_bytes += 4 * (3 + grid.d_vis + grid.d_ins + 2 + v.times.size());
  }
  return s;
}

// ---- files -------------------------------------------------------------------------------

void save_voxels(const VoxelGrid& grid, const std::filesystem::path& path) {
  BinaryWriter w;
  w.magic("D4DV");
  w.u32(static_cast<std::uint32_t>(grid.voxels.size()));
  w.u32(static_cast<std::uint32_t>(grid.d_vis));
  w.u32(static_cast<std::uint32_t>(grid.d_ins));
  std::vector<float> buf;
  for (const auto& v : grid.voxels) {
    for (double p : v.pos) w.f32(static_cast<float>(p));
    buf.assign(v.vis.begin(), v.vis.end());
    w.f32s(buf);
    buf.assign(v.ins.begin(), v.ins.end());
    w.f32s(buf);
    w.u32(static_cast<std::uint32_t>(v.times.size()));
    w.f32s(v.times);
    w.u32(v.count);
  }
  w.save(path);
  const nlohmann::json sidecar = {{"origin", vec3_json(grid.frame.origin)},
                                  {"extent", grid.frame.extent},
                                  {"depth", grid.frame.depth}};
  write_text(path.string() + ".grid.json", sidecar.dump() + "\n");
}

VoxelGrid load_voxels(const std::filesystem::path& path) {
  auto r = BinaryReader::open(path);
  r.expect_magic("D4DV");
  VoxelGrid grid;
  const std::uint32_t count = r.u32();
  grid.d_vis = r.u32();
  grid.d_ins = r.u32();
  std::vector<float> buf;
  AlignedBox box{Vec3::Constant(std::numeric_limits<double>::infinity()),
                 Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (std::uint32_t i = 0; i < count; ++i) {
    VoxelRecord v;
    for (double& p : v.pos) p = r.f32();
    buf.resize(grid.d_vis);
    r.f32s(buf);
    v.vis.assign(buf.begin(), buf.end());
    buf.resize(grid.d_ins);
    r.f32s(buf);
    v.ins.assign(buf.begin(), buf.end());
    const std::uint32_t n_times = r.u32();
    r.require(std::size_t{n_times} * 4);
    v.times.resize(n_times);
    r.f32s(v.times);
    v.count = r.u32();
    if (v.count == 0 || v.times.empty()) {
      throw Error(Errc::kFormat, fmt::format("{}: voxel {} has no members", path.string(), i));
    }
    for (int k = 0; k < 3; ++k) {
      box.min[k] = std::min(box.min[k], v.pos[k]);
      box.max[k] = std::max(box.max[k], v.pos[k]);
    }
    grid.voxels.push_back(std::move(v));
  }
  r.expect_end();

  // Keys are recovered by re-quantising voxel means under the saved frame;
  // without a sidecar a fresh frame is fitted at full depth.
  const std::filesystem::path sidecar = path.string() + ".grid.json";
  if (std::filesystem::exists(sidecar)) {
    const auto j = parse_json_file(sidecar.string());
    grid.frame.origin = vec3_from_json(j.at("origin"));
    grid.frame.extent = j.at("extent").get<double>();
    grid.frame.depth = j.at("depth").get<int>();
  } else if (count > 0) {
    grid.frame = fit_frame(box);
    grid.frame.depth = kMaxOctreeDepth;
  }
  for (auto& v : grid.voxels) {
    const auto c = cell_of(grid.frame, v.pos, grid.frame.depth);
    v.key = morton_encode(c[0], c[1], c[2]);
  }
  std::stable_sort(grid.voxels.begin(), grid.voxels.end(),
                   [](const VoxelRecord& a, const VoxelRecord& b) { return a.key < b.key; });
  return grid;
}

}  // namespace d4d
