#include <cmath>
#include <numeric>

#include "d4d/encoding.hpp"
#include "d4d/rng.hpp"
#include "oracles/attention_oracle.hpp"
#include "test_util.hpp"

using namespace d4d;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  }
  return m;
}

std::vector<VoxelRecord> random_voxels(Rng& rng, std::size_t n, std::size_t d, std::size_t d_ins) {
  std::vector<VoxelRecord> out(n);
  for (auto& v : out) {
    v.pos = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 2)};
    v.vis.resize(d);
    for (auto& x : v.vis) x = rng.normal();
    v.ins.resize(d_ins);
    for (auto& x : v.ins) x = rng.normal();
    const std::size_t k = 1 + rng.next_u64() % 4;
    for (std::size_t i = 0; i < k; ++i) v.times.push_back(static_cast<float>(0.2 * (rng.next_u64() % 50)));
    std::sort(v.times.begin(), v.times.end());
    v.times.erase(std::unique(v.times.begin(), v.times.end()), v.times.end());
    v.count = 1 + static_cast<std::uint32_t>(rng.next_u64() % 9);
  }
  return out;
}

}  // namespace

TEST(TimeBasis, FourDimensionalExample) {
  const auto b = time_basis(1.0, 4);
  ASSERT_EQ(b.size(), 4u);
  EXPECT_NEAR(b[0], std::sin(1.0), 1e-12);
  EXPECT_NEAR(b[1], std::cos(1.0), 1e-12);
  EXPECT_NEAR(b[2], std::sin(0.1), 1e-12);
  EXPECT_NEAR(b[3], std::cos(0.1), 1e-12);
  EXPECT_ERRC(time_basis(1.0, 3), Errc::kConfig);
}

TEST(TimeBasis, BoundedAndInjectiveOnIntegerSeconds) {
  std::vector<std::vector<double>> rows;
  for (int t = 0; t < 10000; ++t) {
    rows.push_back(time_basis(t, 64));
    for (double x : rows.back()) ASSERT_LE(std::abs(x), 1.0);
  }
  double min_sq = INFINITY;
  for (int a = 0; a < 10000; ++a) {
    for (int b = a + 1; b < 10000; ++b) {
      double s = 0;
      for (int c = 0; c < 64 && s < min_sq; ++c) {
        s += (rows[a][c] - rows[b][c]) * (rows[a][c] - rows[b][c]);
      }
      min_sq = std::min(min_sq, s);
    }
  }
  const double min_gap = std::sqrt(min_sq);
  EXPECT_GT(min_gap, 1e-4);
}

TEST(TimeEmbed, ConvexEnvelopeAndErrors) {
  Rng rng(3);
  const TimeEncodingConfig cfg{16, 0.3};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> ts(1 + rng.next_u64() % 6);
    for (auto& t : ts) t = rng.uniform(0, 100);
    const auto e = time_embed(ts, cfg);
    for (std::size_t c = 0; c < 16; ++c) {
      double mx = -INFINITY, mean = 0;
      for (double t : ts) {
        const double v = time_basis(t, 16)[c];
        mx = std::max(mx, v);
        mean += v / static_cast<double>(ts.size());
      }
      EXPECT_GE(e[c], std::min(mx, mean) - 1e-12);
      EXPECT_LE(e[c], std::max(mx, mean) + 1e-12);
      EXPECT_NEAR(e[c], 0.3 * mx + 0.7 * mean, 1e-12);
    }
  }
  EXPECT_ERRC(time_embed(std::vector<double>{}, cfg), Errc::kEmpty);
  EXPECT_ERRC(time_embed(std::vector<double>{1.0}, TimeEncodingConfig{16, 1.5}), Errc::kConfig);
}

TEST(PosEncode, LayoutAndPadding) {
  const auto p = pos_encode({0.5, -1.0, 2.0}, 16);
  ASSERT_EQ(p.size(), 16u);
  EXPECT_NEAR(p[0], std::sin(0.5), 1e-15);
  EXPECT_NEAR(p[4], std::sin(-1.0), 1e-15);
  EXPECT_NEAR(p[8], std::sin(2.0), 1e-15);
  for (std::size_t c = 12; c < 16; ++c) EXPECT_EQ(p[c], 0.0);
  const auto ref = oracle::ladder(0.5, 4, 1e2);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(p[c], ref[c], 1e-12);
}

TEST(Attention, UniformWhenKeysIdentical) {
  Rng rng(1);
  const Matrix q = random_matrix(rng, 3, 4);
  Matrix k(5, 4);
  for (int i = 0; i < 5; ++i) k.row(i) = q.row(0);
  const auto r = attention_core(q, k, random_matrix(rng, 5, 2), 0.5);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(r.weights(i, j), 0.2, 1e-12);
  }
}

TEST(Attention, SaturatesOnDominantLogit) {
  Matrix q(1, 1);
  q << 1.0;
  Matrix k(3, 1);
  k << 0.0, 50.0, 1.0;
  Matrix v(3, 1);
  v << 1.0, 2.0, 3.0;
  const auto r = attention_core(q, k, v, 1.0);
  EXPECT_NEAR(r.weights(0, 1), 1.0, 1e-20 + 1e-12);
  EXPECT_NEAR(r.output(0, 0), 2.0, 1e-12);
}

TEST(Attention, MatchesHandRolledOracle) {
  Rng rng(2);
  const Matrix q = random_matrix(rng, 4, 8), k = random_matrix(rng, 6, 8), v = random_matrix(rng, 6, 8);
  const auto r = attention_core(q, k, v, 0.3);
  const auto want = oracle::attention(oracle::from_eigen(q), oracle::from_eigen(k),
                                      oracle::from_eigen(v), 0.3);
  EXPECT_LT(oracle::max_abs_diff(oracle::from_eigen(r.output), want), 1e-6);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(r.weights.row(i).sum(), 1.0, 1e-6);
}

TEST(Attention, ShapeAndFinitenessErrors) {
  Rng rng(3);
  EXPECT_ERRC(attention_core(random_matrix(rng, 2, 3), random_matrix(rng, 2, 4),
                             random_matrix(rng, 2, 4), 1.0),
              Errc::kShape);
  Matrix q = random_matrix(rng, 2, 3);
  q(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_ERRC(attention_core(q, random_matrix(rng, 2, 3), random_matrix(rng, 2, 3), 1.0),
              Errc::kNotFinite);
}

TEST(Weights, InitDeterministicShapesAndRange) {
  const ModelDims dims{16, 8, 8};
  const ModelWeights a = init_weights(7, dims);
  const ModelWeights b = init_weights(7, dims);
  EXPECT_EQ(a.fusion.w_q, b.fusion.w_q);
  EXPECT_EQ(a.camera.queries, b.camera.queries);
  EXPECT_NE(init_weights(8, dims).fusion.w_q, a.fusion.w_q);
  EXPECT_EQ(a.camera.queries.rows(), 8);
  EXPECT_EQ(a.camera.queries.cols(), 16);
  EXPECT_EQ(a.fusion.in_proj.cols(), 48);
  EXPECT_LE(a.fusion.in_proj.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(48.0) + 1e-7);
  EXPECT_LE(a.camera.proj.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(7.0) + 1e-7);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(init_weights(1, {}).camera.queries.rows(), 8);
  EXPECT_EQ(init_weights(1, {}).camera.queries.cols(), 64);
}

TEST(Weights, SaveLoadBitExactAndShapeErrors) {
  TempDir dir;
  const ModelWeights w = init_weights(3, {8, 4, 8});
  save_weights(w, dir / "w.d4dw");
  const ModelWeights back = load_weights(dir / "w.d4dw");
  EXPECT_EQ(back.fusion.w_ins, w.fusion.w_ins);
  EXPECT_EQ(back.fusion.in_proj, w.fusion.in_proj);
  EXPECT_EQ(back.camera.bias, w.camera.bias);
  EXPECT_EQ(back.camera.w_o, w.camera.w_o);
  ModelWeights bad = w;
  bad.fusion.w_k = Matrix::Zero(8, 7);
  try {
    bad.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kShape);
    EXPECT_NE(std::string(e.what()).find("fusion.w_k"), std::string::npos);
  }
}

TEST(Fuse, MatchesDenseOracle) {
  Rng rng(4);
  const ModelWeights w = init_weights(5, {12, 4, 8});
  const auto vox = random_voxels(rng, 11, 12, 4);
  const Matrix got = fuse(vox, w.fusion, {12, 0.5});
  const auto want = oracle::fuse(vox, w.fusion, 0.5);
  EXPECT_LT(oracle::max_abs_diff(oracle::from_eigen(got), want), 1e-9);
}

TEST(Fuse, ZeroOutputProjectionIsIdentity) {
  Rng rng(5);
  ModelWeights w = init_weights(5, {8, 4, 8});
  w.fusion.w_o.setZero();
  const auto vox = random_voxels(rng, 6, 8, 4);
  const Matrix got = fuse(vox, w.fusion, {8, 0.5});
  for (std::size_t i = 0; i < vox.size(); ++i) {
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(got(Eigen::Index(i), Eigen::Index(c)), vox[i].vis[c]);
  }
}

TEST(Fuse, PermutationEquivariant) {
  Rng rng(6);
  const ModelWeights w = init_weights(9, {8, 4, 8});
  const auto vox = random_voxels(rng, 9, 8, 4);
  std::vector<std::size_t> perm{4, 0, 8, 2, 6, 1, 7, 3, 5};
  std::vector<VoxelRecord> shuffled;
  for (auto i : perm) shuffled.push_back(vox[i]);
  const Matrix a = fuse(vox, w.fusion, {8, 0.5});
  const Matrix b = fuse(shuffled, w.fusion, {8, 0.5});
  for (std::size_t i = 0; i < perm.size(); ++i) {
    EXPECT_LT((a.row(Eigen::Index(perm[i])) - b.row(Eigen::Index(i))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CameraEmbed, SinglePoseClosedForm) {
  const ModelWeights w = init_weights(2, {8, 4, 8});
  CameraPose p;
  p.x = 0.3;
  p.y = -1.0;
  p.z = 1.5;
  const Matrix poses = pose_matrix(std::vector<CameraPose>{p});
  const Matrix out = camera_embed(poses, w.camera);
  Matrix f = poses * w.camera.proj.transpose() + w.camera.bias;
  const Matrix expected = (f * w.camera.w_v.transpose()) * w.camera.w_o.transpose();
  ASSERT_EQ(out.rows(), 8);
  for (Eigen::Index i = 0; i < 8; ++i) {
    EXPECT_LT((out.row(i) - expected.row(0)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_ERRC(camera_embed(Matrix(0, 7), w.camera), Errc::kEmpty);
}

TEST(CameraEmbed, DuplicationAndPermutationInvariance) {
  Rng rng(7);
  const ModelWeights w = init_weights(2, {16, 8, 8});
  std::vector<CameraPose> poses(50);
  Vec3 x = Vec3::Zero();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    x += Vec3(rng.normal(), rng.normal(), 0) * 0.1;
    poses[i] = look_pose(0.2 * i, x + Vec3(0, 0, 1.5), rng.uniform(-3, 3), 0.3);
  }
  const Matrix m = pose_matrix(poses);
  const Matrix base = camera_embed(m, w.camera);
  const auto want = oracle::camera_embed(oracle::from_eigen(m), w.camera);
  EXPECT_LT(oracle::max_abs_diff(oracle::from_eigen(base), want), 1e-5);

  Matrix doubled(100, 7);
  doubled << m, m;
  EXPECT_LT((camera_embed(doubled, w.camera) - base).cwiseAbs().maxCoeff(), 1e-9);
  Matrix reversed = m.colwise().reverse();
  EXPECT_LT((camera_embed(reversed, w.camera) - base).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(EncodeScene, TokenBudgetAndOrdering) {
  Rng rng(8);
  VoxelGrid grid;
  grid.d_vis = 8;
  grid.d_ins = 4;
  grid.frame = GridFrame{Vec3::Zero(), 8.0, 10};
  auto vox = random_voxels(rng, 300, 8, 4);
  std::set<std::uint64_t> keys;
  while (keys.size() < vox.size()) keys.insert(rng.next_u64() & ((1ULL << 30) - 1));
  auto it = keys.begin();
  for (auto& v : vox) v.key = *it++;
  grid.voxels = vox;
  const ModelWeights w = init_weights(1, {8, 4, 8});
  const std::vector<CameraPose> poses{CameraPose{}, look_pose(0.2, Vec3(1, 0, 1), 0.5, 0.2)};
  EncodeOptions opt;
  opt.time = {8, 0.5};
  opt.budget = 50;
  const EncodedScene a = encode_scene(grid, poses, w, opt);
  EXPECT_TRUE(a.fused_before_condense);
  EXPECT_LE(a.scene_tokens.rows(), 50);
  EXPECT_EQ(a.camera_tokens.rows(), 8);
  opt.fuse_cap = 10;
  const EncodedScene b = encode_scene(grid, poses, w, opt);
  EXPECT_FALSE(b.fused_before_condense);
  EXPECT_EQ(b.scene_tokens.rows(), a.scene_tokens.rows());

  // Under budget both orders agree exactly up to summation order.
  opt.budget = 1024;
  opt.fuse_cap = 4096;
  const EncodedScene c = encode_scene(grid, poses, w, opt);
  EXPECT_LT((c.scene_tokens - fuse(grid.voxels, w.fusion, opt.time)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Tokens, SaveLoad) {
  TempDir dir;
  EncodedScene s;
  s.scene_tokens = Matrix::Constant(3, 4, 0.25);
  s.camera_tokens = Matrix::Constant(2, 4, -1.0);
  save_tokens(s, dir / "t.d4dt");
  const EncodedScene back = load_tokens(dir / "t.d4dt");
  EXPECT_EQ(back.scene_tokens, s.scene_tokens);
  EXPECT_EQ(back.camera_tokens, s.camera_tokens);
}
