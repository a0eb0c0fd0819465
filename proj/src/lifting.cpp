#include "d4d/lifting.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "d4d/binary_io.hpp"
#include "d4d/error.hpp"
#include "d4d/json_types.hpp"
#include "d4d/parallel.hpp"
#include "d4d/rng.hpp"

namespace d4d {

std::vector<std::uint8_t> crop_pixels(const Frame& frame, const PixelRect& rect) {
  std::vector<std::uint8_t> out;
  out.reserve(rect.area() * 3);
  for (std::uint32_t r = rect.row0; r < rect.row1; ++r) {
    const auto begin = frame.rgb.begin() + static_cast<std::ptrdiff_t>(3 * frame.offset(r, rect.col0));
    out.insert(out.end(), begin, begin + 3 * static_cast<std::ptrdiff_t>(rect.col1 - rect.col0));
  }
  return out;
}

// ---- mock encoder ------------------------------------------------------------------

MockEncoder::MockEncoder(std::size_t d_vis, std::uint64_t seed) : d_vis_(d_vis) {
  if (d_vis == 0) throw Error(Errc::kConfig, "mock encoder: d_vis must be positive");
  Rng rng(hash_combine(seed, d_vis));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_vis));
  projection_.resize(d_vis * kHistogramBins);
  for (double& v : projection_) v = rng.coin() ? scale : -scale;
}

FeatureVec MockEncoder::encode_pixels(std::span<const std::uint8_t> rgb) const {
  const std::size_t n = rgb.size() / 3;
  if (n == 0) throw Error(Errc::kEmpty, "mock encoder: empty region");
  std::vector<double> hist(kHistogramBins, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bin = (std::size_t{rgb[3 * i]} >> 5) * 64 +
                            (std::size_t{rgb[3 * i + 1]} >> 5) * 8 + (rgb[3 * i + 2] >> 5);
    hist[bin] += 1.0;
  }
  for (double& h : hist) h /= static_cast<double>(n);

  FeatureVec out(d_vis_, 0.0);
  for (std::size_t k = 0; k < d_vis_; ++k) {
    const double* row = projection_.data() + k * kHistogramBins;
    double acc = 0.0;
    for (std::size_t b = 0; b < kHistogramBins; ++b) acc += row[b] * hist[b];
    out[k] = acc;
  }
  double norm = 0.0;
  for (double v : out) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw Error(Errc::kDegenerate, "mock encoder: projection collapsed to zero");
  for (double& v : out) v /= norm;
  return out;
}

FeatureVec MockEncoder::encode(const Frame& frame, const PixelRect& rect, std::uint32_t) const {
  return encode_pixels(crop_pixels(frame, rect));
}

FeatureVec mock_encode(std::span<const std::uint8_t> rgb, std::size_t d_vis, std::uint64_t seed) {
  return MockEncoder(d_vis, seed).encode_pixels(rgb);
}

// ---- file encoder --------------------------------------------------------------------

FileEncoder::FileEncoder(FeatureMatrix features, std::vector<Key> keys)
    : features_(std::move(features)) {
  if (keys.empty()) {
    for (std::uint32_t i = 0; i < features_.count; ++i) rows_.emplace(Key{i, 0}, i);
    return;
  }
  if (keys.size() != features_.count) {
    throw Error(Errc::kCountMismatch, fmt::format("file encoder: {} keys for {} feature rows",
                                                  keys.size(), features_.count));
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!rows_.emplace(keys[i], i).second) {
      throw Error(Errc::kDuplicate, fmt::format("file encoder: duplicate key (frame {}, id {})",
                                                keys[i].frame, keys[i].instance));
    }
  }
}

FileEncoder FileEncoder::open(const std::filesystem::path& path) {
  FeatureMatrix features = load_features(path);
  std::vector<Key> keys;
  const std::filesystem::path sidecar = path.string() + ".keys.json";
  if (std::filesystem::exists(sidecar)) {
    const auto j = parse_json_file(sidecar.string());
    for (const auto& k : j) keys.push_back({k.at(0).get<std::uint32_t>(), k.at(1).get<std::uint32_t>()});
  }
  return FileEncoder(std::move(features), std::move(keys));
}

FeatureVec FileEncoder::encode(const Frame& frame, const PixelRect&,
                               std::uint32_t instance_id) const {
  const auto it = rows_.find(Key{frame.index, instance_id});
  if (it == rows_.end()) {
    throw Error(Errc::kLookup, fmt::format("file encoder: no feature row for frame {} instance {}",
                                           frame.index, instance_id));
  }
  const float* row = features_.row(it->second);
  return FeatureVec(row, row + features_.dim);
}

// ---- frame features --------------------------------------------------------------------

FeatureVec encode_frame_global(const Frame& frame, const Encoder& enc) {
  return enc.encode(frame, PixelRect::full(frame), 0);
}

std::map<std::uint32_t, PixelRect> instance_rects(const Frame& frame) {
  std::map<std::uint32_t, PixelRect> rects;
  for (std::uint32_t r = 0; r < frame.height; ++r) {
    for (std::uint32_t c = 0; c < frame.width; ++c) {
      const std::uint32_t id = frame.mask[frame.offset(r, c)];
      if (id == 0) continue;
      auto [it, fresh] = rects.try_emplace(id, PixelRect{r, c, r + 1, c + 1});
      if (!fresh) {
        PixelRect& rect = it->second;
        rect.row0 = std::min(rect.row0, r);
        rect.col0 = std::min(rect.col0, c);
        rect.row1 = std::max(rect.row1, r + 1);
        rect.col1 = std::max(rect.col1, c + 1);
      }
    }
  }
  return rects;
}

std::map<std::uint32_t, FeatureVec> encode_instance_crops(const Frame& frame, const Encoder& enc) {
  std::map<std::uint32_t, FeatureVec> out;
  for (const auto& [id, rect] : instance_rects(frame)) out.emplace(id, enc.encode(frame, rect, id));
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::kShape, fmt::format("cosine: dimension {} vs {}", a.size(), b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 && nb == 0.0) {
    throw Error(Errc::kDegenerate, "cosine similarity of two zero vectors is undefined");
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

FeatureVec blend_features(std::span<const double> global, std::span<const double> local,
                          bool clamp_similarity) {
  for (double v : global) {
    if (!std::isfinite(v)) throw Error(Errc::kNotFinite, "blend: global feature not finite");
  }
  for (double v : local) {
    if (!std::isfinite(v)) throw Error(Errc::kNotFinite, "blend: local feature not finite");
  }
  double sim = cosine_similarity(local, global);
  if (clamp_similarity) sim = std::clamp(sim, 0.0, 1.0);
  FeatureVec out(global.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sim * global[i] + (1.0 - sim) * local[i];
  return out;
}

// ---- instance embeddings -----------------------------------------------------------------

const std::vector<double>& InstanceEmbeddingTable::at(std::uint32_t id) const {
  const auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw Error(Errc::kLookup, fmt::format("instance embedding table has no id {}", id));
  }
  return it->second;
}

void InstanceEmbeddingTable::insert(std::uint32_t id, std::vector<double> embedding) {
  if (embedding.size() != dim_) {
    throw Error(Errc::kShape, fmt::format("embedding for id {} has dim {} (table dim {})", id,
                                          embedding.size(), dim_));
  }
  entries_[id] = std::move(embedding);
}

std::vector<double> instance_embedding(std::uint32_t id, std::size_t d_ins, std::uint64_t seed) {
  Rng rng(hash_combine(seed, id));
  std::vector<double> e(d_ins);
  for (double& v : e) v = rng.normal();
  return e;
}

InstanceEmbeddingTable instance_embedding_table(std::span<const std::uint32_t> ids,
                                                std::size_t d_ins, std::uint64_t seed) {
  if (d_ins == 0) throw Error(Errc::kConfig, "instance embedding dimension must be >= 1");
  InstanceEmbeddingTable table(d_ins, seed);
  for (std::uint32_t id : ids) {
    if (id == 0) continue;
    table.insert(id, instance_embedding(id, d_ins, seed));
  }
  return table;
}

InstanceEmbeddingTable instance_embedding_table(const SceneSequence& seq, std::size_t d_ins,
                                                std::uint64_t seed) {
  std::vector<std::uint32_t> ids;
  for (const auto& [id, inst] : seq.instances) ids.push_back(id);
  return instance_embedding_table(ids, d_ins, seed);
}

// ---- point sets --------------------------------------------------------------------------

void PointSet::reserve(std::size_t n) {
  pos_.reserve(3 * n);
  vis_.reserve(d_vis_ * n);
  ins_.reserve(d_ins_ * n);
  t_.reserve(n);
  ids_.reserve(n);
}

void PointSet::push_back(std::span<const float, 3> pos, std::span<const float> vis,
                         std::span<const float> ins, float t, std::uint32_t id) {
  if (vis.size() != d_vis_ || ins.size() != d_ins_) {
    throw Error(Errc::kShape, fmt::format("point set expects d_vis={} d_ins={}, got {} and {}",
                                          d_vis_, d_ins_, vis.size(), ins.size()));
  }
  pos_.insert(pos_.end(), pos.begin(), pos.end());
  vis_.insert(vis_.end(), vis.begin(), vis.end());
  ins_.insert(ins_.end(), ins.begin(), ins.end());
  t_.push_back(t);
  ids_.push_back(id);
}

void PointSet::push_back(const PointRecord& p) {
  push_back(std::span<const float, 3>(p.pos), p.vis, p.ins, p.t, p.instance_id);
}

void PointSet::append(const PointSet& other) {
  if (other.empty()) return;
  if (empty() && d_vis_ == 0 && d_ins_ == 0) {
    d_vis_ = other.d_vis_;
    d_ins_ = other.d_ins_;
  }
  if (other.d_vis_ != d_vis_ || other.d_ins_ != d_ins_) {
    throw Error(Errc::kShape, "point set append: dimensions differ");
  }
  pos_.insert(pos_.end(), other.pos_.begin(), other.pos_.end());
  vis_.insert(vis_.end(), other.vis_.begin(), other.vis_.end());
  ins_.insert(ins_.end(), other.ins_.begin(), other.ins_.end());
  t_.insert(t_.end(), other.t_.begin(), other.t_.end());
  ids_.insert(ids_.end(), other.ids_.begin(), other.ids_.end());
}

PointRecord PointSet::record(std::size_t i) const {
  PointRecord p;
  std::copy_n(pos_.begin() + static_cast<std::ptrdiff_t>(3 * i), 3, p.pos.begin());
  const auto v = vis(i);
  const auto e = ins(i);
  p.vis.assign(v.begin(), v.end());
  p.ins.assign(e.begin(), e.end());
  p.t = t_[i];
  p.instance_id = ids_[i];
  return p;
}

// ---- lifting --------------------------------------------------------------------------------

namespace {

std::vector<float> to_float(std::span<const double> v) { return {v.begin(), v.end()}; }

}  // namespace

PointSet lift_frame(const Frame& frame, const CameraPose& pose, const Intrinsics& intrinsics,
                    const Encoder& enc, const InstanceEmbeddingTable& table,
                    const LiftOptions& options) {
  const auto world = unproject(frame, intrinsics, pose);
  const FeatureVec global = encode_frame_global(frame, enc);

  struct Shared {
    std::vector<float> vis;
    std::vector<float> ins;
  };
  std::map<std::uint32_t, Shared> shared;
  shared[0] = {to_float(global), std::vector<float>(table.dim(), 0.0f)};
  for (const auto& [id, local] : encode_instance_crops(frame, enc)) {
    shared[id] = {to_float(blend_features(global, local, options.clamp_similarity)),
                  to_float(table.at(id))};
  }

  PointSet out(enc.dim(), table.dim());
  out.reserve(world.size());
  const auto t = static_cast<float>(frame.t);
  for (const auto& p : world) {
    const Shared& s = shared.at(p.instance_id);
    const std::array<float, 3> pos{static_cast<float>(p.world.x()), static_cast<float>(p.world.y()),
                                   static_cast<float>(p.world.z())};
    out.push_back(std::span<const float, 3>(pos), s.vis, s.ins, t, p.instance_id);
  }
  return out;
}

PointSet lift_sequence(const SceneSequence& seq, const Encoder& enc,
                       const InstanceEmbeddingTable& table, const LiftOptions& options) {
  std::vector<PointSet> parts(seq.frames.size());
  parallel_for(seq.frames.size(), [&](std::size_t i) {
    parts[i] = lift_frame(seq.frames[i], seq.poses[i], seq.intrinsics, enc, table, options);
  });
  PointSet all(enc.dim(), table.dim());
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  all.reserve(total);
  for (const auto& p : parts) all.append(p);
  return all;
}

// ---- files ------------------------------------------------------------------------------------

void save_points(const PointSet& points, const std::filesystem::path& path) {
  BinaryWriter w;
  w.magic("D4DP");
  w.u32(static_cast<std::uint32_t>(points.size()));
  w.u32(static_cast<std::uint32_t>(points.d_vis()));
  w.u32(static_cast<std::uint32_t>(points.d_ins()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    w.f32s(points.pos(i));
    w.f32s(points.vis(i));
    w.f32s(points.ins(i));
    w.f32(points.t(i));
    w.u32(points.instance_id(i));
  }
  w.save(path);
}

PointSet load_points(const std::filesystem::path& path) {
  auto r = BinaryReader::open(path);
  r.expect_magic("D4DP");
  const std::uint32_t count = r.u32();
  const std::uint32_t d_vis = r.u32();
  const std::uint32_t d_ins = r.u32();
  const std::size_t record_bytes = 4 * (3 + std::size_t{d_vis} + d_ins + 2);
  r.require(record_bytes * count);
  PointSet points(d_vis, d_ins);
  points.reserve(count);
  std::array<float, 3> pos{};
  std::vector<float> vis(d_vis), ins(d_ins);
  for (std::uint32_t i = 0; i < count; ++i) {
    r.f32s(pos);
    r.f32s(vis);
    r.f32s(ins);
    const float t = r.f32();
    const std::uint32_t id = r.u32();
    points.push_back(std::span<const float, 3>(pos), vis, ins, t, id);
  }
  r.expect_end();
  return points;
}

}  // namespace d4d
