#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "d4d/scene.hpp"
#include "d4d/sequence_io.hpp"

namespace d4d {

using FeatureVec = std::vector<double>;

// Half-open pixel rectangle [row0, row1) x [col0, col1).
struct PixelRect {
  std::uint32_t row0 = 0, col0 = 0, row1 = 0, col1 = 0;

  static PixelRect full(const Frame& f) { return {0, 0, f.height, f.width}; }
  bool empty() const { return row1 <= row0 || col1 <= col0; }
  std::size_t area() const { return empty() ? 0 : std::size_t{row1 - row0} * (col1 - col0); }
  bool operator==(const PixelRect&) const = default;
};

// Copies the RGB bytes of a rectangle, row-major.
std::vector<std::uint8_t> crop_pixels(const Frame& frame, const PixelRect& rect);

/// Image-region encoder. Implementations must be pure: the same frame,
/// rectangle and instance id always give the same vector.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::string name() const = 0;
  // instance_id 0 with the full rectangle requests the frame-global feature.
  virtual FeatureVec encode(const Frame& frame, const PixelRect& rect,
                            std::uint32_t instance_id) const = 0;
};

inline constexpr std::size_t kHistogramBins = 8 * 8 * 8;

/// Colour-histogram encoder: 8x8x8 L1-normalised RGB histogram, seeded
/// random +-1/sqrt(d) projection, L2 normalisation.
class MockEncoder final : public Encoder {
 public:
  MockEncoder(std::size_t d_vis, std::uint64_t seed);

  std::size_t dim() const override { return d_vis_; }
  std::string name() const override { return "mock"; }
  FeatureVec encode(const Frame& frame, const PixelRect& rect,
                    std::uint32_t instance_id) const override;
  FeatureVec encode_pixels(std::span<const std::uint8_t> rgb) const;

 private:
  std::size_t d_vis_;
  std::vector<double> projection_;  // d_vis x 512, row-major
};

FeatureVec mock_encode(std::span<const std::uint8_t> rgb, std::size_t d_vis, std::uint64_t seed);

/// Serves precomputed rows from a "D4DF" file. Row keys are (frame index,
/// instance id); without a key list row i is the global feature of frame i.
class FileEncoder final : public Encoder {
 public:
  struct Key {
    std::uint32_t frame = 0;
    std::uint32_t instance = 0;
    auto operator<=>(const Key&) const = default;
  };

  FileEncoder(FeatureMatrix features, std::vector<Key> keys = {});
  // Reads `path` and, if present, the key sidecar `path + ".keys.json"`
  // (a JSON array of [frame, instance] pairs aligned with the rows).
  static FileEncoder open(const std::filesystem::path& path);

  std::size_t dim() const override { return features_.dim; }
  std::string name() const override { return "file"; }
  FeatureVec encode(const Frame& frame, const PixelRect& rect,
                    std::uint32_t instance_id) const override;

 private:
  FeatureMatrix features_;
  std::map<Key, std::size_t> rows_;
};

FeatureVec encode_frame_global(const Frame& frame, const Encoder& enc);

// Tight bounding rectangle of every nonzero mask id present in the frame.
std::map<std::uint32_t, PixelRect> instance_rects(const Frame& frame);
std::map<std::uint32_t, FeatureVec> encode_instance_crops(const Frame& frame, const Encoder& enc);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// sim * global + (1 - sim) * local with sim = cos(local, global). Throws
// Errc::kDegenerate when both inputs are zero.
FeatureVec blend_features(std::span<const double> global, std::span<const double> local,
                          bool clamp_similarity = false);

class InstanceEmbeddingTable {
 public:
  InstanceEmbeddingTable() = default;
  InstanceEmbeddingTable(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  const std::map<std::uint32_t, std::vector<double>>& entries() const { return entries_; }
  // Throws Errc::kLookup for unknown ids; id 0 is not stored.
  const std::vector<double>& at(std::uint32_t id) const;
  void insert(std::uint32_t id, std::vector<double> embedding);
  bool operator==(const InstanceEmbeddingTable&) const = default;

 private:
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::map<std::uint32_t, std::vector<double>> entries_;
};

inline constexpr std::size_t kDefaultInstanceDim = 8;

// i.i.d. N(0,1) entries drawn from a stream seeded by hash(seed, id).
std::vector<double> instance_embedding(std::uint32_t id, std::size_t d_ins, std::uint64_t seed);
InstanceEmbeddingTable instance_embedding_table(std::span<const std::uint32_t> ids,
                                                std::size_t d_ins, std::uint64_t seed);
InstanceEmbeddingTable instance_embedding_table(const SceneSequence& seq, std::size_t d_ins,
                                                std::uint64_t seed);

// ---- points ----------------------------------------------------------------------

struct PointRecord {
  std::array<float, 3> pos{};
  std::vector<float> vis;
  std::vector<float> ins;
  float t = 0.0f;
  std::uint32_t instance_id = 0;

  bool operator==(const PointRecord&) const = default;
};

/// Column-major storage for lifted points.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t d_vis, std::size_t d_ins) : d_vis_(d_vis), d_ins_(d_ins) {}

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::size_t d_vis() const { return d_vis_; }
  std::size_t d_ins() const { return d_ins_; }

  void reserve(std::size_t n);
  void push_back(const PointRecord& p);
  void push_back(std::span<const float, 3> pos, std::span<const float> vis,
                 std::span<const float> ins, float t, std::uint32_t id);
  void append(const PointSet& other);
  PointRecord record(std::size_t i) const;

  std::span<const float, 3> pos(std::size_t i) const {
    return std::span<const float, 3>(pos_.data() + 3 * i, 3);
  }
  std::span<const float> vis(std::size_t i) const { return {vis_.data() + i * d_vis_, d_vis_}; }
  std::span<const float> ins(std::size_t i) const { return {ins_.data() + i * d_ins_, d_ins_}; }
  float t(std::size_t i) const { return t_[i]; }
  std::uint32_t instance_id(std::size_t i) const { return ids_[i]; }

  bool operator==(const PointSet&) const = default;

 private:
  std::size_t d_vis_ = 0;
  std::size_t d_ins_ = 0;
  std::vector<float> pos_;
  std::vector<float> vis_;
  std::vector<float> ins_;
  std::vector<float> t_;
  std::vector<std::uint32_t> ids_;
};

struct LiftOptions {
  bool clamp_similarity = false;
};

PointSet lift_frame(const Frame& frame, const CameraPose& pose, const Intrinsics& intrinsics,
                    const Encoder& enc, const InstanceEmbeddingTable& table,
                    const LiftOptions& options = {});

// Lifts frames in parallel and concatenates them in frame order.
PointSet lift_sequence(const SceneSequence& seq, const Encoder& enc,
                       const InstanceEmbeddingTable& table, const LiftOptions& options = {});

// "D4DP": u32 count, u32 d_vis, u32 d_ins, then per record
// f32x3 pos, f32 x d_vis, f32 x d_ins, f32 t, u32 instance id.
void save_points(const PointSet& points, const std::filesystem::path& path);
PointSet load_points(const std::filesystem::path& path);

}  // namespace d4d
