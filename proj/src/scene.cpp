#include "d4d/scene.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include <fmt/format.h>

#include "d4d/error.hpp"

namespace d4d {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(Errc::kConfig, fmt::format("intrinsics: focal lengths must be positive ({}, {})",
                                           fx, fy));
  }
  if (width == 0 || height == 0) throw Error(Errc::kConfig, "intrinsics: empty image size");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw Error(Errc::kConfig,
                fmt::format("intrinsics: principal point ({}, {}) outside {}x{}", cx, cy, width,
                            height));
  }
}

Frame Frame::blank(std::uint32_t index, double t, std::uint32_t width, std::uint32_t height) {
  Frame f;
  f.index = index;
  f.t = t;
  f.width = width;
  f.height = height;
  const std::size_t n = f.pixel_count();
  f.rgb.assign(n * 3, 0);
  f.depth.assign(n, std::numeric_limits<float>::quiet_NaN());
  f.mask.assign(n, 0);
  return f;
}

bool Frame::operator==(const Frame& other) const {
  return index == other.index && t == other.t && width == other.width &&
         height == other.height && rgb == other.rgb && mask == other.mask &&
         depth.size() == other.depth.size() &&
         std::memcmp(depth.data(), other.depth.data(), depth.size() * sizeof(float)) == 0;
}

void SceneSequence::validate() const {
  if (frames.size() != poses.size()) {
    throw Error(Errc::kCountMismatch, fmt::format("sequence: {} frames but {} poses",
                                                  frames.size(), poses.size()));
  }
  if (!(fps > 0.0)) throw Error(Errc::kConfig, "sequence: fps must be positive");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    if (f.t != poses[i].t) {
      throw Error(Errc::kFormat, fmt::format("sequence: frame {} timestamp {} != pose {}", i, f.t,
                                             poses[i].t));
    }
    if (i > 0 && !(poses[i].t > poses[i - 1].t)) {
      throw Error(Errc::kFormat, fmt::format("sequence: pose timestamps not increasing at {}", i));
    }
    const std::size_t n = f.pixel_count();
    if (f.rgb.size() != 3 * n || f.depth.size() != n || f.mask.size() != n) {
      throw Error(Errc::kCountMismatch, fmt::format("sequence: frame {} buffers disagree", i));
    }
    for (std::uint32_t id : f.mask) {
      if (id != 0 && !instances.contains(id)) {
        throw Error(Errc::kLookup, fmt::format("sequence: frame {} has unregistered id {}", i, id));
      }
    }
  }
}

Eigen::Quaterniond pose_rotation(const CameraPose& pose) {
  const Eigen::Quaterniond q(pose.qw, pose.qx, pose.qy, pose.qz);
  const double norm = q.norm();
  if (!(std::abs(norm - 1.0) <= kQuaternionTolerance)) {
    throw Error(Errc::kNormalization,
                fmt::format("pose at t={}: quaternion norm {} is not 1 (normalize first)", pose.t,
                            norm));
  }
  return q.normalized();
}

Eigen::Matrix4d pose_to_matrix(const CameraPose& pose) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = pose_rotation(pose).toRotationMatrix();
  m.topRightCorner<3, 1>() = pose.position();
  return m;
}

CameraPose pose_from_rotation(double t, const Vec3& position, const Eigen::Matrix3d& rotation) {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  // Canonical sign keeps serialized poses stable.
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return CameraPose{t, position.x(), position.y(), position.z(), q.x(), q.y(), q.z(), q.w()};
}

CameraPose look_pose(double t, const Vec3& position, double yaw, double pitch) {
  const Vec3 forward(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw),
                     -std::sin(pitch));
  const Vec3 right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Vec3 down = forward.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return pose_from_rotation(t, position, r);
}

Vec3 world_to_camera(const Vec3& world, const CameraPose& pose) {
  const Eigen::Matrix3d r = pose_rotation(pose).toRotationMatrix();
  return r.transpose() * (world - pose.position());
}

std::vector<PixelPoint> unproject(const Frame& frame, const Intrinsics& intrinsics,
                                  const CameraPose& pose) {
  if (frame.width != intrinsics.width || frame.height != intrinsics.height) {
    throw Error(Errc::kFormat, fmt::format("unproject: frame {} is {}x{} but intrinsics are {}x{}",
                                           frame.index, frame.width, frame.height,
                                           intrinsics.width, intrinsics.height));
  }
  if (frame.depth.size() != frame.pixel_count() || frame.mask.size() != frame.pixel_count()) {
    throw Error(Errc::kFormat, fmt::format("unproject: frame {} buffer sizes disagree",
                                           frame.index));
  }
  const Eigen::Matrix4d m = pose_to_matrix(pose);
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  const Vec3 origin = m.topRightCorner<3, 1>();

  std::vector<PixelPoint> out;
  for (std::uint32_t row = 0; row < frame.height; ++row) {
    for (std::uint32_t col = 0; col < frame.width; ++col) {
      const std::size_t k = frame.offset(row, col);
      const double d = frame.depth[k];
      if (!std::isfinite(d) || d <= 0.0) continue;
      const Vec3 cam((col - intrinsics.cx) * d / intrinsics.fx,
                     (row - intrinsics.cy) * d / intrinsics.fy, d);
      out.push_back(PixelPoint{r * cam + origin, row, col, frame.mask[k], frame.t});
    }
  }
  return out;
}

std::optional<Projection> project(const Vec3& world, const Intrinsics& intrinsics,
                                  const CameraPose& pose) {
  const Vec3 cam = world_to_camera(world, pose);
  if (!(cam.z() > kMinProjectDepth)) return std::nullopt;
  Projection p;
  p.u = intrinsics.fx * cam.x() / cam.z() + intrinsics.cx;
  p.v = intrinsics.fy * cam.y() / cam.z() + intrinsics.cy;
  p.depth = cam.z();
  const double col = std::round(p.u);
  const double row = std::round(p.v);
  p.in_image = col >= 0.0 && row >= 0.0 && col < intrinsics.width && row < intrinsics.height;
  return p;
}

}  // namespace d4d
