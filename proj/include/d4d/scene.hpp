#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace d4d {

using Vec3 = Eigen::Vector3d;

// Conventions shared by every module: right-handed world with +z up; camera
// frame has +z forward, +x right and +y down in the image.

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  std::uint32_t width = 1;
  std::uint32_t height = 1;

  // Throws Errc::kConfig when the invariants do not hold.
  void validate() const;
  bool operator==(const Intrinsics&) const = default;
};

// Camera-to-world pose, quaternion scalar-last (Hamilton).
struct CameraPose {
  double t = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;
  double qx = 0.0, qy = 0.0, qz = 0.0, qw = 1.0;

  Vec3 position() const { return {x, y, z}; }
  bool operator==(const CameraPose&) const = default;
};

struct Frame {
  std::uint32_t index = 0;
  double t = 0.0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> rgb;     // row-major, 3 bytes per pixel
  std::vector<float> depth;          // meters, NaN = invalid
  std::vector<std::uint32_t> mask;   // instance ids, 0 = background

  static Frame blank(std::uint32_t index, double t, std::uint32_t width, std::uint32_t height);

  std::size_t pixel_count() const { return std::size_t{width} * height; }
  std::size_t offset(std::uint32_t row, std::uint32_t col) const {
    return std::size_t{row} * width + col;
  }
  // Bitwise on depth so NaN pixels compare equal.
  bool operator==(const Frame& other) const;
};

struct BBox3D {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.5);
  double yaw = 0.0;

  bool operator==(const BBox3D&) const = default;
};

struct TimedBox {
  double t = 0.0;
  BBox3D box;

  bool operator==(const TimedBox&) const = default;
};

struct Instance {
  std::uint32_t id = 0;
  std::string label;
  std::vector<TimedBox> boxes;  // time-ordered

  bool operator==(const Instance&) const = default;
};

struct SceneSequence {
  std::vector<Frame> frames;
  std::vector<CameraPose> poses;
  Intrinsics intrinsics;
  std::map<std::uint32_t, Instance> instances;
  double fps = 5.0;

  // Throws Errc::kCountMismatch / kFormat when the structural invariants fail.
  void validate() const;
  bool operator==(const SceneSequence&) const = default;
};

// ---- geometry -------------------------------------------------------------

inline constexpr double kQuaternionTolerance = 1e-6;

Eigen::Quaterniond pose_rotation(const CameraPose& pose);
Eigen::Matrix4d pose_to_matrix(const CameraPose& pose);
CameraPose pose_from_rotation(double t, const Vec3& position, const Eigen::Matrix3d& rotation);

// Camera at `position` looking horizontally along `yaw` (radians from +x,
// counter-clockwise about +z) and tilted down by `pitch` radians.
CameraPose look_pose(double t, const Vec3& position, double yaw, double pitch);

struct PixelPoint {
  Vec3 world;
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::uint32_t instance_id = 0;
  double t = 0.0;
};

// Lifts every valid-depth pixel (finite, > 0) to world coordinates.
std::vector<PixelPoint> unproject(const Frame& frame, const Intrinsics& intrinsics,
                                  const CameraPose& pose);

struct Projection {
  double u = 0.0;  // column
  double v = 0.0;  // row
  double depth = 0.0;
  bool in_image = false;  // rounded pixel lies inside the image
};

inline constexpr double kMinProjectDepth = 1e-6;

// std::nullopt when the point is not in front of the camera.
std::optional<Projection> project(const Vec3& world, const Intrinsics& intrinsics,
                                  const CameraPose& pose);

Vec3 world_to_camera(const Vec3& world, const CameraPose& pose);

}  // namespace d4d
