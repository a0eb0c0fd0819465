#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "d4d/scene.hpp"

namespace d4d {

using Rgb = std::array<std::uint8_t, 3>;

struct Waypoint {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
};

/// Piecewise-linear trajectory; clamps to the end waypoints outside its span.
struct TrajectorySpec {
  std::vector<Waypoint> waypoints;

  struct Sample {
    Vec3 position;
    double yaw;
  };
  Sample at(double t) const;
  void validate(const std::string& owner) const;
};

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

struct ObjectSpec {
  std::uint32_t id = 0;
  std::string label;
  Vec3 half_extents = Vec3::Constant(0.25);
  std::optional<Rgb> color;  // drawn from the seed when absent
  TrajectorySpec trajectory;
  // Trajectory time is paused inside each interval, so the object holds
  // still and resumes where it stopped.
  std::vector<Interval> static_intervals;
};

struct GrabSpec {
  std::uint32_t object_id = 0;
  double start = 0.0;
  double end = 0.0;
};

struct AgentSpec {
  std::uint32_t id = 0;
  std::string label = "person";
  TrajectorySpec trajectory;  // eye position and facing yaw
  std::vector<GrabSpec> grabs;
  double pitch = 0.45;        // camera tilt below the horizon, radians
  std::optional<Rgb> color;
};

struct RoomBounds {
  Vec3 min = Vec3(-3.0, -3.0, 0.0);
  Vec3 max = Vec3(3.0, 3.0, 3.0);

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct SimConfig {
  double duration = 10.0;
  double fps = 5.0;
  Intrinsics intrinsics{48.0, 48.0, 32.0, 24.0, 64, 48};
  RoomBounds room;
  std::vector<ObjectSpec> objects;
  AgentSpec ego;
  std::vector<AgentSpec> extra_agents;
  std::uint64_t seed = 0;

  // Throws Errc::kConfig on any invariant violation.
  void validate() const;
  std::size_t frame_count() const;
};

// ---- ground truth -----------------------------------------------------------

struct ObjectTrack {
  std::uint32_t id = 0;
  std::string label;
  Vec3 half_extents = Vec3::Zero();
  Rgb color{};
  std::vector<BBox3D> boxes;  // one per frame
};

struct AgentTrack {
  std::uint32_t id = 0;
  std::string label;
  bool ego = false;
  Rgb color{};
  std::vector<Vec3> positions;  // one per frame
  std::vector<double> yaws;
  std::vector<CameraPose> cameras;
};

struct GrabEvent {
  std::uint32_t agent_id = 0;
  std::uint32_t object_id = 0;
  double start = 0.0;
  double end = 0.0;

  bool active(double t) const { return t >= start && t <= end; }
};

struct GroundTruth {
  std::string sequence_id = "seq";
  double fps = 5.0;
  double duration = 0.0;
  Intrinsics intrinsics;
  RoomBounds room;
  std::uint32_t ego_id = 0;
  std::vector<double> times;
  std::vector<ObjectTrack> objects;  // ascending id
  std::vector<AgentTrack> agents;    // ego first, then ascending id
  std::vector<GrabEvent> grabs;      // ascending start

  std::size_t frame_count() const { return times.size(); }
  // Index of the sampled frame at time t (exact to 1e-6 s); throws Errc::kLookup.
  std::size_t frame_index(double t) const;
  const ObjectTrack* find_object(std::uint32_t id) const;
  const AgentTrack* find_agent(std::uint32_t id) const;
  const AgentTrack& ego() const;
  // Position series for an object (box centers) or agent.
  std::vector<Vec3> positions_of(std::uint32_t id) const;
};

struct SimResult {
  SceneSequence sequence;
  GroundTruth truth;
};

SimResult simulate(const SimConfig& config);

// Instantaneous state of every primitive, evaluated directly from the specs.
struct SceneState {
  double t = 0.0;
  std::vector<BBox3D> object_boxes;  // aligned with config.objects
  std::vector<TrajectorySpec::Sample> agents;  // ego, then extra agents
};
SceneState scene_state(const SimConfig& config, double t);

struct RenderBox {
  BBox3D box;
  std::uint32_t id = 0;
  Rgb color{};
};

inline constexpr Rgb kFloorColor{96, 96, 96};

// Z-buffer render of oriented boxes plus, optionally, the room's floor
// rectangle at room.min.z (id 0).
Frame rasterize(std::span<const RenderBox> boxes, const std::optional<RoomBounds>& floor,
                const Intrinsics& intrinsics, const CameraPose& pose, std::uint32_t index = 0);

// Nearest positive ray parameter where the ray hits the box, if any.
std::optional<double> ray_box_hit(const Vec3& origin, const Vec3& dir, const BBox3D& box);

BBox3D agent_body_box(const Vec3& eye, double yaw, double floor_z);

// ---- instantaneous properties -------------------------------------------------

inline constexpr double kMotionThreshold = 0.05;  // m/s

struct Properties {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double speed = 0.0;
  double heading = 0.0;  // atan2(vy, vx)
  double yaw = 0.0;
  double yaw_rate = 0.0;
  bool is_moving = false;
};

// Central difference at interior samples, one-sided at the ends.
Vec3 central_difference(std::span<const Vec3> values, std::span<const double> times,
                        std::size_t i);
double central_difference(std::span<const double> values, std::span<const double> times,
                          std::size_t i);

Properties ground_truth_properties(const GroundTruth& gt, std::uint32_t id, double t);
Properties ground_truth_properties_at(const GroundTruth& gt, std::uint32_t id, std::size_t frame);

// ---- files ------------------------------------------------------------------

SimConfig load_sim_config(const std::filesystem::path& path);
void save_sim_config(const SimConfig& config, const std::filesystem::path& path);
void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

// Keeps every k-th frame so the result samples at `fps`; throws Errc::kConfig
// when fps does not divide the source rate.
GroundTruth resample(const GroundTruth& gt, double fps);

// ---- canned scenes ------------------------------------------------------------

// Random desk-scale scene: n objects (some moving, one with a pause), a
// walking ego with one grab, and one extra agent.
SimConfig make_demo_config(std::uint64_t seed, std::size_t n_objects = 5, double duration = 20.0);

// Hand-built scene that exercises every QA task.
SimConfig make_stress_config();

}  // namespace d4d
