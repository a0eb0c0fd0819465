#include <algorithm>
#include <numeric>

#include "d4d/octree.hpp"
#include "d4d/rng.hpp"
#include "oracles/grid_oracle.hpp"
#include "test_util.hpp"

using namespace d4d;

namespace {

PointSet random_points(Rng& rng, std::size_t n, std::size_t d_vis = 3, std::size_t d_ins = 2,
                       double scale = 4.0) {
  PointSet p(d_vis, d_ins);
  std::vector<float> vis(d_vis), ins(d_ins);
  for (std::size_t i = 0; i < n; ++i) {
    const std::array<float, 3> pos{static_cast<float>(rng.uniform(-scale, scale)),
                                   static_cast<float>(rng.uniform(-scale, scale)),
                                   static_cast<float>(rng.uniform(0, scale))};
    for (auto& v : vis) v = static_cast<float>(rng.normal());
    for (auto& v : ins) v = static_cast<float>(rng.normal());
    const float t = static_cast<float>(0.2 * static_cast<double>(rng.next_u64() % 20));
    p.push_back(pos, vis, ins, t, static_cast<std::uint32_t>(rng.next_u64() % 5));
  }
  return p;
}

PointSet permuted(const PointSet& p, Rng& rng) {
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.next_u64() % i]);
  PointSet out(p.d_vis(), p.d_ins());
  for (auto i : idx) out.push_back(p.record(i));
  return out;
}

}  // namespace

TEST(Morton, MatchesBitLoopOracle) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto x = static_cast<std::uint32_t>(rng.next_u64() & 0x1fffff);
    const auto y = static_cast<std::uint32_t>(rng.next_u64() & 0x1fffff);
    const auto z = static_cast<std::uint32_t>(rng.next_u64() & 0x1fffff);
    const auto code = morton_encode(x, y, z);
    EXPECT_EQ(code, oracle::interleave(x, y, z));
    EXPECT_EQ(morton_decode(code), (std::array<std::uint32_t, 3>{x, y, z}));
  }
}

TEST(Octree, SinglePoint) {
  PointSet p(2, 1);
  const std::array<float, 3> pos{1.5f, -2.f, 0.25f};
  const std::array<float, 2> vis{0.5f, 1.f};
  const std::array<float, 1> ins{3.f};
  p.push_back(pos, vis, ins, 0.6f, 3);
  const VoxelGrid g = build_and_aggregate(p, {});
  ASSERT_EQ(g.size(), 1u);
  const auto& v = g.voxels[0];
  EXPECT_EQ(v.pos, (std::array<double, 3>{1.5, -2.0, 0.25}));
  EXPECT_EQ(v.vis, (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(v.times, std::vector<float>{0.6f});
  EXPECT_EQ(v.count, 1u);
}

TEST(Octree, TwoPointsInOneLeafAreAveraged) {
  PointSet p(2, 1);
  const std::array<float, 3> a{0, 0, 0}, b{0.001f, 0, 0};
  p.push_back(a, std::array<float, 2>{1, 2}, std::array<float, 1>{0}, 0.2f, 1);
  p.push_back(b, std::array<float, 2>{3, 6}, std::array<float, 1>{2}, 0.4f, 1);
  OctreeConfig cfg;
  cfg.target_voxels = 1;
  const VoxelGrid g = build_and_aggregate(p, cfg);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g.voxels[0].vis, (std::vector<double>{2, 4}));
  EXPECT_EQ(g.voxels[0].ins, (std::vector<double>{1}));
  EXPECT_EQ(g.voxels[0].times, (std::vector<float>{0.2f, 0.4f}));
}

TEST(Octree, EmptyAndIdenticalInputs) {
  EXPECT_ERRC(build_and_aggregate(PointSet(2, 1), {}), Errc::kEmpty);
  PointSet p(1, 1);
  for (int i = 0; i < 10; ++i) {
    p.push_back(std::array<float, 3>{1, 1, 1}, std::array<float, 1>{float(i)},
                std::array<float, 1>{0}, float(i), 0);
  }
  const VoxelGrid g = build_and_aggregate(p, {});
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g.voxels[0].count, 10u);
  EXPECT_DOUBLE_EQ(g.voxels[0].vis[0], 4.5);
}

TEST(Octree, MatchesBruteForceGridOracle) {
  Rng rng(2024);
  for (int scene = 0; scene < 20; ++scene) {
    const std::size_t n = 1 + rng.next_u64() % 5000;
    const PointSet p = random_points(rng, n);
    OctreeConfig cfg;
    cfg.target_voxels = 1 + rng.next_u64() % 2000;
    const VoxelGrid g = build_and_aggregate(p, cfg);
    EXPECT_EQ(oracle::compare(g, p, 1e-6), "") << "scene " << scene;
    EXPECT_EQ(g.point_count(), n);
    // Finest level within the target.
    EXPECT_LE(oracle::occupied(p, g.frame, g.frame.depth), cfg.target_voxels);
    if (g.frame.depth < kMaxOctreeDepth) {
      EXPECT_GT(oracle::occupied(p, g.frame, g.frame.depth + 1), cfg.target_voxels);
    }
  }
}

TEST(Octree, LeafEdgeMinCapsDepth) {
  Rng rng(4);
  const PointSet p = random_points(rng, 3000);
  OctreeConfig cfg;
  cfg.target_voxels = 1'000'000;
  cfg.leaf_edge_min = 0.5;
  const VoxelGrid g = build_and_aggregate(p, cfg);
  EXPECT_GE(g.frame.edge(g.frame.depth), 0.5);
  EXPECT_LT(g.frame.edge(g.frame.depth + 1), 0.5);
}

TEST(Octree, OrderInvariance) {
  Rng rng(5);
  const PointSet p = random_points(rng, 4000);
  OctreeConfig cfg;
  cfg.target_voxels = 700;
  const VoxelGrid a = build_and_aggregate(p, cfg);
  const VoxelGrid b = build_and_aggregate(permuted(p, rng), cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.voxels[i].pos, b.voxels[i].pos);
    EXPECT_EQ(a.voxels[i].vis, b.voxels[i].vis);
    EXPECT_EQ(a.voxels[i].times, b.voxels[i].times);
    EXPECT_EQ(a.voxels[i].key, b.voxels[i].key);
  }
}

TEST(Octree, OccupancyIsMonotoneInLevel) {
  Rng rng(6);
  const PointSet p = random_points(rng, 5000);
  const GridFrame f = frame_for({}, p);
  const auto occ = occupancy_by_level(p, f, kMaxOctreeDepth, 1u << 30);
  ASSERT_EQ(occ.size(), static_cast<std::size_t>(kMaxOctreeDepth + 1));
  EXPECT_EQ(occ.front(), 1u);
  for (std::size_t l = 1; l < occ.size(); ++l) {
    EXPECT_LE(occ[l - 1], occ[l]);
    if (l <= 8) EXPECT_EQ(occ[l], oracle::occupied(p, f, static_cast<int>(l)));
  }
}

TEST(Condense, UnderBudgetIsIdentity) {
  Rng rng(7);
  const PointSet p = random_points(rng, 10, 2, 1, 100.0);
  const VoxelGrid g = build_and_aggregate(p, {});
  ASSERT_EQ(g.size(), 10u);
  const VoxelGrid c = condense(g, 1024);
  EXPECT_EQ(c.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(c.voxels[i].vis, g.voxels[i].vis);
}

TEST(Condense, BudgetOneIsGlobalMean) {
  Rng rng(8);
  const PointSet p = random_points(rng, 2000);
  const VoxelGrid g = build_and_aggregate(p, {});
  const VoxelGrid c = condense(g, 1);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.frame.depth, 0);
  EXPECT_EQ(oracle::compare(c, p, 1e-6), "");
  EXPECT_EQ(c.voxels[0].count, 2000u);
}

TEST(Condense, MeanOfMeansEqualsDirectAggregation) {
  Rng rng(9);
  for (int scene = 0; scene < 10; ++scene) {
    const PointSet p = random_points(rng, 10'000);
    OctreeConfig cfg;
    cfg.target_voxels = 5000;
    const VoxelGrid g = build_and_aggregate(p, cfg);
    std::vector<std::size_t> groups;
    const VoxelGrid c = condense(g, 1024, &groups);
    EXPECT_LE(c.size(), 1024u);
    EXPECT_EQ(c.point_count(), 10'000u);
    EXPECT_EQ(oracle::compare(c, p, 1e-6), "") << scene;
    ASSERT_EQ(groups.size(), g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_EQ(g.voxels[i].key >> (3 * (g.frame.depth - c.frame.depth)), c.voxels[groups[i]].key);
    }
  }
}

TEST(VoxelStats, CountsAndOccupancy) {
  PointSet one(1, 1);
  one.push_back(std::array<float, 3>{0, 0, 0}, std::array<float, 1>{0}, std::array<float, 1>{0}, 0, 0);
  EXPECT_EQ(voxel_stats(build_and_aggregate(one, {})).count, 1u);

  Rng rng(10);
  PointSet cube(1, 1);
  for (int i = 0; i < 20000; ++i) {
    cube.push_back(std::array<float, 3>{float(rng.uniform()), float(rng.uniform()), float(rng.uniform())},
                   std::array<float, 1>{0}, std::array<float, 1>{0}, 0, 0);
  }
  OctreeConfig cfg;
  cfg.max_depth = 3;
  const VoxelGrid g = build_and_aggregate(cube, cfg);
  const VoxelStats s = voxel_stats(g);
  EXPECT_EQ(s.depth, 3);
  EXPECT_EQ(s.count, g.size());
  EXPECT_EQ(s.count, oracle::occupied(cube, g.frame, 3));
  EXPECT_GE(s.count, 500u);
  EXPECT_EQ(s.points, 20000u);
  std::size_t hist = 0;
  for (auto h : s.occupancy) hist += h;
  EXPECT_EQ(hist, s.count);
}

TEST(VoxelIo, RoundTripAndErrors) {
  TempDir dir;
  Rng rng(11);
  const VoxelGrid g = build_and_aggregate(random_points(rng, 500), {});
  save_voxels(g, dir / "v.d4dv");
  const VoxelGrid back = load_voxels(dir / "v.d4dv");
  ASSERT_EQ(back.size(), g.size());
  EXPECT_EQ(back.frame, g.frame);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(back.voxels[i].count, g.voxels[i].count);
    EXPECT_EQ(back.voxels[i].times, g.voxels[i].times);
    EXPECT_EQ(back.voxels[i].key, g.voxels[i].key);
    EXPECT_NEAR(back.voxels[i].pos[0], g.voxels[i].pos[0], 1e-5);
  }
  save_voxels(back, dir / "w.d4dv");
  EXPECT_EQ(read_file(dir / "v.d4dv"), read_file(dir / "w.d4dv"));
  auto bytes = read_file(dir / "v.d4dv");
  bytes[1] = 'X';
  write_file(dir / "v.d4dv", bytes);
  EXPECT_ERRC(load_voxels(dir / "v.d4dv"), Errc::kBadMagic);
}
