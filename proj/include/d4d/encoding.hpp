#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "d4d/octree.hpp"
#include "d4d/scene.hpp"

namespace d4d {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---- sinusoidal encodings ------------------------------------------------------------

// out[2m] = sin(t * f_m), out[2m+1] = cos(t * f_m), f_m = exp(-ln(base) * m / dim).
std::vector<double> sinusoid_ladder(double x, std::size_t dim, double base);

inline constexpr double kTimeBase = 1e4;
inline constexpr double kPositionBase = 1e2;

std::vector<double> time_basis(double t, std::size_t d_vis);

struct TimeEncodingConfig {
  std::size_t d_vis = 64;
  double alpha = 0.5;  // weight of max pooling against mean pooling

  void validate() const;
};

// alpha * max_k basis(t_k) + (1 - alpha) * mean_k basis(t_k), per channel.
std::vector<double> time_embed(std::span<const double> times, const TimeEncodingConfig& cfg);

// Per-axis sinusoids (base 1e2) over floor(d_vis / 6) frequency pairs;
// layout [x | y | z | zero padding].
std::vector<double> pos_encode(const std::array<double, 3>& pos, std::size_t d_vis);

// ---- attention ---------------------------------------------------------------------------

struct AttentionResult {
  Matrix output;   // rows = queries
  Matrix weights;  // queries x keys, rows sum to 1
};

// softmax(Q K^T * scale) V in double precision. Throws Errc::kNotFinite on
// non-finite logits and Errc::kShape on non-conformable inputs.
AttentionResult attention_core(const Matrix& q, const Matrix& k, const Matrix& v, double scale);

// ---- weights -------------------------------------------------------------------------------

struct FusionWeights {
  Matrix w_ins;    // d_vis x d_ins
  Matrix in_proj;  // d_vis x 3 d_vis
  Matrix w_q, w_k, w_v, w_o;  // d_vis x d_vis

  std::size_t d_vis() const { return static_cast<std::size_t>(w_q.rows()); }
  std::size_t d_ins() const { return static_cast<std::size_t>(w_ins.cols()); }
};

struct CameraWeights {
  Matrix proj;     // d_vis x 7
  Matrix bias;     // 1 x d_vis
  Matrix queries;  // M x d_vis
  Matrix w_k, w_v, w_o;  // d_vis x d_vis

  std::size_t query_count() const { return static_cast<std::size_t>(queries.rows()); }
};

struct ModelDims {
  std::size_t d_vis = 64;
  std::size_t d_ins = 8;
  std::size_t queries = 8;
};

struct ModelWeights {
  FusionWeights fusion;
  CameraWeights camera;

  ModelDims dims() const;
  // Throws Errc::kShape naming the first tensor whose shape is wrong.
  void validate() const;
};

// Uniform in +-1/sqrt(fan_in), rounded to f32 so save/load is lossless.
ModelWeights init_weights(std::uint64_t seed, const ModelDims& dims);

// "D4DW": u32 tensor count, then per tensor u32 name length, name bytes,
// u32 rank, u32 dims..., f32 payload (row-major).
void save_weights(const ModelWeights& w, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);

// ---- fusion and camera embedding --------------------------------------------------------------

// Per-voxel input [W_ins ins | time_embed(times) | pos_encode(pos)].
Matrix fusion_inputs(std::span<const VoxelRecord> voxels, const FusionWeights& w,
                     const TimeEncodingConfig& cfg);

// vis + W_o * SA(in_proj * x), single head across all voxel tokens.
Matrix fuse(std::span<const VoxelRecord> voxels, const FusionWeights& w,
            const TimeEncodingConfig& cfg);

Matrix pose_matrix(std::span<const CameraPose> poses);  // T x 7 rows (x,y,z,qx,qy,qz,qw)

// Cross-attention of the M learned queries over the projected pose track.
Matrix camera_embed(const Matrix& poses, const CameraWeights& w);

// ---- full encode stage ---------------------------------------------------------------------------

struct EncodeOptions {
  TimeEncodingConfig time;
  std::size_t budget = kDefaultTokenBudget;
  // Above this voxel count the scene is condensed before fusion.
  std::size_t fuse_cap = 4096;
};

struct EncodedScene {
  Matrix scene_tokens;   // <= budget rows
  Matrix camera_tokens;  // M rows
  bool fused_before_condense = false;
};

EncodedScene encode_scene(const VoxelGrid& grid, std::span<const CameraPose> poses,
                          const ModelWeights& w, const EncodeOptions& options);

// "D4DT": u32 n_scene_tokens, u32 M, u32 d_vis, f32 payload (scene tokens
// then camera tokens).
void save_tokens(const EncodedScene& tokens, const std::filesystem::path& path);
EncodedScene load_tokens(const std::filesystem::path& path);

}  // namespace d4d
