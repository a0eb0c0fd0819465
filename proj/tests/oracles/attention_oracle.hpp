#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "d4d/encoding.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat matmul_t(const Mat& a, const Mat& b) {  // a * b^T
  Mat out(a.size(), std::vector<double>(b.size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a[i].size(); ++k) s += a[i][k] * b[j][k];
      out[i][j] = s;
    }
  }
  return out;
}

inline Mat softmax_rows(Mat m) {
  for (auto& row : m) {
    double mx = row[0];
    for (double x : row) mx = std::max(mx, x);
    double z = 0.0;
    for (double& x : row) z += (x = std::exp(x - mx));
    for (double& x : row) x /= z;
  }
  return m;
}

// softmax(q k^T scale) v
inline Mat attention(const Mat& q, const Mat& k, const Mat& v, double scale) {
  Mat logits = matmul_t(q, k);
  for (auto& row : logits) {
    for (double& x : row) x *= scale;
  }
  const Mat w = softmax_rows(logits);
  Mat out(q.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = 0; j < k.size(); ++j) {
      for (std::size_t c = 0; c < v[0].size(); ++c) out[i][c] += w[i][j] * v[j][c];
    }
  }
  return out;
}

template <class M>
Mat from_eigen(const M& m) {
  Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  }
  return out;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  if (a.size() != b.size()) return INFINITY;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return INFINITY;
    for (std::size_t j = 0; j < a[i].size(); ++j) d = std::max(d, std::abs(a[i][j] - b[i][j]));
  }
  return d;
}

// [sin(x f_0), cos(x f_0), ...] with f_m = base^(-m / dim).
inline std::vector<double> ladder(double x, std::size_t dim, double base) {
  std::vector<double> out(dim, 0.0);
  for (std::size_t m = 0; 2 * m + 1 < dim; ++m) {
    const double f = std::pow(base, -static_cast<double>(m) / static_cast<double>(dim));
    out[2 * m] = std::sin(x * f);
    out[2 * m + 1] = std::cos(x * f);
  }
  return out;
}

inline std::vector<double> fusion_row(const d4d::VoxelRecord& v, const Mat& w_ins, double alpha) {
  const std::size_t d = w_ins.size();
  std::vector<double> row(3 * d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < v.ins.size(); ++c) row[r] += w_ins[r][c] * v.ins[c];
  }
  std::vector<double> mx(d, -INFINITY), mean(d, 0.0);
  for (float t : v.times) {
    const auto b = ladder(t, d, 1e4);
    for (std::size_t c = 0; c < d; ++c) {
      mx[c] = std::max(mx[c], b[c]);
      mean[c] += b[c] / static_cast<double>(v.times.size());
    }
  }
  for (std::size_t c = 0; c < d; ++c) row[d + c] = alpha * mx[c] + (1 - alpha) * mean[c];
  const std::size_t axis = 2 * (d / 6);
  for (std::size_t a = 0; a < 3 && axis > 0; ++a) {
    const auto b = ladder(v.pos[a], axis, 1e2);
    for (std::size_t c = 0; c < axis; ++c) row[2 * d + a * axis + c] = b[c];
  }
  return row;
}

inline Mat fuse(const std::vector<d4d::VoxelRecord>& voxels, const d4d::FusionWeights& w,
                double alpha) {
  const Mat w_ins = from_eigen(w.w_ins);
  Mat x;
  for (const auto& v : voxels) x.push_back(fusion_row(v, w_ins, alpha));
  const Mat h = matmul_t(x, from_eigen(w.in_proj));
  const double d = static_cast<double>(w_ins.size());
  const Mat a = attention(matmul_t(h, from_eigen(w.w_q)), matmul_t(h, from_eigen(w.w_k)),
                          matmul_t(h, from_eigen(w.w_v)), 1.0 / std::sqrt(d));
  Mat out = matmul_t(a, from_eigen(w.w_o));
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    for (std::size_t c = 0; c < out[i].size(); ++c) out[i][c] += voxels[i].vis[c];
  }
  return out;
}

inline Mat camera_embed(const Mat& poses, const d4d::CameraWeights& w) {
  Mat f = matmul_t(poses, from_eigen(w.proj));
  for (auto& row : f) {
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += w.bias(0, static_cast<Eigen::Index>(c));
  }
  const Mat q = from_eigen(w.queries);
  const Mat a = attention(q, matmul_t(f, from_eigen(w.w_k)), matmul_t(f, from_eigen(w.w_v)),
                          1.0 / std::sqrt(static_cast<double>(q[0].size())));
  return matmul_t(a, from_eigen(w.w_o));
}

}  // namespace oracle
