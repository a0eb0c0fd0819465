#include "d4d/encoding.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "d4d/binary_io.hpp"
#include "d4d/error.hpp"
#include "d4d/rng.hpp"

namespace d4d {

// ---- sinusoids ------------------------------------------------------------------------

std::vector<double> sinusoid_ladder(double x, std::size_t dim, double base) {
  std::vector<double> out(dim, 0.0);
  const double step = std::log(base) / static_cast<double>(dim);
  for (std::size_t m = 0; 2 * m + 1 < dim; ++m) {
    const double freq = std::exp(-step * static_cast<double>(m));
    out[2 * m] = std::sin(x * freq);
    out[2 * m + 1] = std::cos(x * freq);
  }
  return out;
}

std::vector<double> time_basis(double t, std::size_t d_vis) {
  if (d_vis == 0 || d_vis % 2 != 0) {
    throw Error(Errc::kConfig, fmt::format("time basis needs an even positive dimension, got {}",
                                           d_vis));
  }
  return sinusoid_ladder(t, d_vis, kTimeBase);
}

void TimeEncodingConfig::validate() const {
  if (d_vis == 0 || d_vis % 2 != 0) {
    throw Error(Errc::kConfig, fmt::format("time encoding: d_vis {} must be even", d_vis));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(Errc::kConfig, fmt::format("time encoding: alpha {} outside [0, 1]", alpha));
  }
}

std::vector<double> time_embed(std::span<const double> times, const TimeEncodingConfig& cfg) {
  cfg.validate();
  if (times.empty()) throw Error(Errc::kEmpty, "time_embed: empty timestamp set");
  std::vector<double> max_pool(cfg.d_vis, -std::numeric_limits<double>::infinity());
  std::vector<double> mean_pool(cfg.d_vis, 0.0);
  for (double t : times) {
    const auto s = time_basis(t, cfg.d_vis);
    for (std::size_t c = 0; c < cfg.d_vis; ++c) {
      max_pool[c] = std::max(max_pool[c], s[c]);
      mean_pool[c] += s[c];
    }
  }
  const double n = static_cast<double>(times.size());
  std::vector<double> out(cfg.d_vis);
  for (std::size_t c = 0; c < cfg.d_vis; ++c) {
    out[c] = cfg.alpha * max_pool[c] + (1.0 - cfg.alpha) * (mean_pool[c] / n);
  }
  return out;
}

std::vector<double> pos_encode(const std::array<double, 3>& pos, std::size_t d_vis) {
  const std::size_t axis_dim = 2 * (d_vis / 6);
  std::vector<double> out(d_vis, 0.0);
  if (axis_dim == 0) return out;
  for (std::size_t a = 0; a < 3; ++a) {
    const auto band = sinusoid_ladder(pos[a], axis_dim, kPositionBase);
    std::copy(band.begin(), band.end(), out.begin() + static_cast<std::ptrdiff_t>(a * axis_dim));
  }
  return out;
}

// ---- attention -------------------------------------------------------------------------------

AttentionResult attention_core(const Matrix& q, const Matrix& k, const Matrix& v, double scale) {
  if (q.cols() != k.cols() || k.rows() != v.rows() || k.rows() == 0) {
    throw Error(Errc::kShape, fmt::format("attention: Q {}x{}, K {}x{}, V {}x{} not conformable",
                                          q.rows(), q.cols(), k.rows(), k.cols(), v.rows(),
                                          v.cols()));
  }
  AttentionResult r;
  r.weights = (q * k.transpose()) * scale;
  if (!r.weights.allFinite()) throw Error(Errc::kNotFinite, "attention: non-finite logits");
  for (Eigen::Index i = 0; i < r.weights.rows(); ++i) {
    auto row = r.weights.row(i);
    const double peak = row.maxCoeff();
    row = (row.array() - peak).exp();
    row /= row.sum();
  }
  r.output = r.weights * v;
  return r;
}

// ---- weights ------------------------------------------------------------------------------------

ModelDims ModelWeights::dims() const {
  return {fusion.d_vis(), fusion.d_ins(), camera.query_count()};
}

namespace {

struct TensorRef {
  const char* name;
  Eigen::Index rows;
  Eigen::Index cols;
};

template <typename Fn>
void for_each_tensor(ModelWeights& w, Fn&& fn) {
  fn("fusion.w_ins", w.fusion.w_ins);
  fn("fusion.in_proj", w.fusion.in_proj);
  fn("fusion.w_q", w.fusion.w_q);
  fn("fusion.w_k", w.fusion.w_k);
  fn("fusion.w_v", w.fusion.w_v);
  fn("fusion.w_o", w.fusion.w_o);
  fn("camera.proj", w.camera.proj);
  fn("camera.bias", w.camera.bias);
  fn("camera.queries", w.camera.queries);
  fn("camera.w_k", w.camera.w_k);
  fn("camera.w_v", w.camera.w_v);
  fn("camera.w_o", w.camera.w_o);
}

std::vector<TensorRef> expected_shapes(const ModelDims& d) {
  const auto dv = static_cast<Eigen::Index>(d.d_vis);
  const auto di = static_cast<Eigen::Index>(d.d_ins);
  const auto m = static_cast<Eigen::Index>(d.queries);
  return {{"fusion.w_ins", dv, di}, {"fusion.in_proj", dv, 3 * dv}, {"fusion.w_q", dv, dv},
          {"fusion.w_k", dv, dv},   {"fusion.w_v", dv, dv},         {"fusion.w_o", dv, dv},
          {"camera.proj", dv, 7},   {"camera.bias", 1, dv},         {"camera.queries", m, dv},
          {"camera.w_k", dv, dv},   {"camera.w_v", dv, dv},         {"camera.w_o", dv, dv}};
}

}  // namespace

void ModelWeights::validate() const {
  const ModelDims d = dims();
  if (d.d_vis == 0 || d.d_vis % 2 != 0) {
    throw Error(Errc::kShape, fmt::format("fusion.w_q: d_vis {} must be even and positive", d.d_vis));
  }
  if (d.queries == 0) throw Error(Errc::kShape, "camera.queries: need at least one query");
  const auto shapes = expected_shapes(d);
  std::size_t k = 0;
  ModelWeights& self = const_cast<ModelWeights&>(*this);
  for_each_tensor(self, [&](const char* name, const Matrix& m) {
    const TensorRef& want = shapes[k++];
    if (m.rows() != want.rows || m.cols() != want.cols) {
      throw Error(Errc::kShape, fmt::format("{}: shape {}x{}, expected {}x{}", name, m.rows(),
                                            m.cols(), want.rows, want.cols));
    }
    if (!m.allFinite()) throw Error(Errc::kNotFinite, fmt::format("{}: non-finite values", name));
  });
}

ModelWeights init_weights(std::uint64_t seed, const ModelDims& dims) {
  if (dims.d_vis == 0 || dims.d_vis % 2 != 0 || dims.d_ins == 0 || dims.queries == 0) {
    throw Error(Errc::kConfig, "init_weights: dimensions must be positive and d_vis even");
  }
  ModelWeights w;
  const auto shapes = expected_shapes(dims);
  std::size_t k = 0;
  for_each_tensor(w, [&](const char* name, Matrix& m) {
    const TensorRef& s = shapes[k++];
    // Biases and learned queries use the hidden width as fan-in.
    const double fan_in = (s.rows == 1 || std::string_view(name) == "camera.queries")
                              ? static_cast<double>(dims.d_vis)
                              : static_cast<double>(s.cols);
    const double bound = 1.0 / std::sqrt(fan_in);
    Rng rng(hash_combine(seed, fnv1a(name)));
    m.resize(s.rows, s.cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
    }
  });
  return w;
}

void save_weights(const ModelWeights& w, const std::filesystem::path& path) {
  w.validate();
  BinaryWriter out;
  out.magic("D4DW");
  out.u32(12);
  std::vector<float> buf;
  for_each_tensor(const_cast<ModelWeights&>(w), [&](const char* name, const Matrix& m) {
    const std::string_view n(name);
    out.u32(static_cast<std::uint32_t>(n.size()));
    out.bytes({reinterpret_cast<const std::uint8_t*>(n.data()), n.size()});
    out.u32(2);
    out.u32(static_cast<std::uint32_t>(m.rows()));
    out.u32(static_cast<std::uint32_t>(m.cols()));
    buf.assign(m.data(), m.data() + m.size());
    out.f32s(buf);
  });
  out.save(path);
}

ModelWeights load_weights(const std::filesystem::path& path) {
  auto r = BinaryReader::open(path);
  r.expect_magic("D4DW");
  const std::uint32_t count = r.u32();
  std::map<std::string, Matrix> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name(name_len, '\0');
    r.bytes({reinterpret_cast<std::uint8_t*>(name.data()), name.size()});
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 2) {
      throw Error(Errc::kShape, fmt::format("{}: tensor '{}' has unsupported rank {}",
                                            path.string(), name, rank));
    }
    std::uint32_t rows = 1, cols = r.u32();
    if (rank == 2) {
      rows = cols;
      cols = r.u32();
    }
    std::vector<float> buf(std::size_t{rows} * cols);
    r.f32s(buf);
    Matrix m(rows, cols);
    std::copy(buf.begin(), buf.end(), m.data());
    tensors[name] = std::move(m);
  }
  r.expect_end();

  ModelWeights w;
  for_each_tensor(w, [&](const char* name, Matrix& m) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw Error(Errc::kShape, fmt::format("{}: missing tensor '{}'", path.string(), name));
    }
    m = it->second;
  });
  try {
    w.validate();
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
  return w;
}

// ---- fusion ------------------------------------------------------------------------------------

Matrix fusion_inputs(std::span<const VoxelRecord> voxels, const FusionWeights& w,
                     const TimeEncodingConfig& cfg) {
  const auto d = static_cast<Eigen::Index>(w.d_vis());
  if (cfg.d_vis != w.d_vis()) {
    throw Error(Errc::kShape, fmt::format("fuse: time encoding d_vis {} vs weights {}", cfg.d_vis,
                                          w.d_vis()));
  }
  Matrix x(static_cast<Eigen::Index>(voxels.size()), 3 * d);
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const VoxelRecord& v = voxels[i];
    if (v.ins.size() != w.d_ins() || v.vis.size() != w.d_vis()) {
      throw Error(Errc::kShape, fmt::format("fuse: voxel {} has d_vis {} d_ins {}, weights want {} {}",
                                            i, v.vis.size(), v.ins.size(), w.d_vis(), w.d_ins()));
    }
    const auto row = static_cast<Eigen::Index>(i);
    const Eigen::Map<const Eigen::VectorXd> ins(v.ins.data(), static_cast<Eigen::Index>(v.ins.size()));
    x.row(row).segment(0, d) = (w.w_ins * ins).transpose();
    const std::vector<double> times(v.times.begin(), v.times.end());
    const auto te = time_embed(times, cfg);
    const auto pe = pos_encode(v.pos, w.d_vis());
    for (Eigen::Index c = 0; c < d; ++c) {
      x(row, d + c) = te[static_cast<std::size_t>(c)];
      x(row, 2 * d + c) = pe[static_cast<std::size_t>(c)];
    }
  }
  return x;
}

Matrix fuse(std::span<const VoxelRecord> voxels, const FusionWeights& w,
            const TimeEncodingConfig& cfg) {
  if (voxels.empty()) return Matrix(0, static_cast<Eigen::Index>(w.d_vis()));
  const Matrix x = fusion_inputs(voxels, w, cfg);
  const Matrix h = x * w.in_proj.transpose();
  const double scale = 1.0 / std::sqrt(static_cast<double>(w.d_vis()));
  const auto attn = attention_core(h * w.w_q.transpose(), h * w.w_k.transpose(),
                                   h * w.w_v.transpose(), scale);
  Matrix out = attn.output * w.w_o.transpose();
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    for (std::size_t c = 0; c < w.d_vis(); ++c) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) += voxels[i].vis[c];
    }
  }
  return out;
}

Matrix pose_matrix(std::span<const CameraPose> poses) {
  Matrix m(static_cast<Eigen::Index>(poses.size()), 7);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const CameraPose& p = poses[i];
    m.row(static_cast<Eigen::Index>(i)) << p.x, p.y, p.z, p.qx, p.qy, p.qz, p.qw;
  }
  return m;
}

Matrix camera_embed(const Matrix& poses, const CameraWeights& w) {
  if (poses.rows() == 0) throw Error(Errc::kEmpty, "camera_embed: empty pose sequence");
  if (poses.cols() != 7) throw Error(Errc::kShape, "camera_embed: poses must be T x 7");
  Matrix f_cam = poses * w.proj.transpose();
  f_cam.rowwise() += w.bias.row(0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(w.queries.cols()));
  const auto attn =
      attention_core(w.queries, f_cam * w.w_k.transpose(), f_cam * w.w_v.transpose(), scale);
  return attn.output * w.w_o.transpose();
}

// ---- encode stage --------------------------------------------------------------------------------

EncodedScene encode_scene(const VoxelGrid& grid, std::span<const CameraPose> poses,
                          const ModelWeights& w, const EncodeOptions& options) {
  w.validate();
  EncodedScene out;
  const auto d = static_cast<Eigen::Index>(w.fusion.d_vis());
  if (grid.voxels.size() <= options.fuse_cap) {
    out.fused_before_condense = true;
    const Matrix fused = fuse(grid.voxels, w.fusion, options.time);
    std::vector<std::size_t> groups;
    const VoxelGrid condensed = condense(grid, options.budget, &groups);
    out.scene_tokens = Matrix::Zero(static_cast<Eigen::Index>(condensed.voxels.size()), d);
    for (std::size_t i = 0; i < grid.voxels.size(); ++i) {
      out.scene_tokens.row(static_cast<Eigen::Index>(groups[i])) +=
          static_cast<double>(grid.voxels[i].count) * fused.row(static_cast<Eigen::Index>(i));
    }
    for (std::size_t g = 0; g < condensed.voxels.size(); ++g) {
      out.scene_tokens.row(static_cast<Eigen::Index>(g)) /=
          static_cast<double>(condensed.voxels[g].count);
    }
  } else {
    const VoxelGrid condensed = condense(grid, options.budget);
    out.scene_tokens = fuse(condensed.voxels, w.fusion, options.time);
  }
  out.camera_tokens = camera_embed(pose_matrix(poses), w.camera);
  return out;
}

void save_tokens(const EncodedScene& tokens, const std::filesystem::path& path) {
  BinaryWriter w;
  w.magic("D4DT");
  w.u32(static_cast<std::uint32_t>(tokens.scene_tokens.rows()));
  w.u32(static_cast<std::uint32_t>(tokens.camera_tokens.rows()));
  const auto d = tokens.camera_tokens.rows() ? tokens.camera_tokens.cols() : tokens.scene_tokens.cols();
  w.u32(static_cast<std::uint32_t>(d));
  std::vector<float> buf(tokens.scene_tokens.data(),
                         tokens.scene_tokens.data() + tokens.scene_tokens.size());
  w.f32s(buf);
  buf.assign(tokens.camera_tokens.data(), tokens.camera_tokens.data() + tokens.camera_tokens.size());
  w.f32s(buf);
  w.save(path);
}

EncodedScene load_tokens(const std::filesystem::path& path) {
  auto r = BinaryReader::open(path);
  r.expect_magic("D4DT");
  const std::uint32_t n = r.u32();
  const std::uint32_t m = r.u32();
  const std::uint32_t d = r.u32();
  r.require((std::size_t{n} + m) * d * 4);
  EncodedScene out;
  std::vector<float> buf(std::size_t{n} * d);
  r.f32s(buf);
  out.scene_tokens.resize(n, d);
  std::copy(buf.begin(), buf.end(), out.scene_tokens.data());
  buf.resize(std::size_t{m} * d);
  r.f32s(buf);
  out.camera_tokens.resize(m, d);
  std::copy(buf.begin(), buf.end(), out.camera_tokens.data());
  r.expect_end();
  return out;
}

}  // namespace d4d
