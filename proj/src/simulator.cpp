#include "d4d/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "d4d/error.hpp"
#include "d4d/parallel.hpp"
#include "d4d/rng.hpp"

namespace d4d {
namespace {

Eigen::Matrix3d yaw_matrix(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

// Trajectory time after removing the paused spans that precede t.
double effective_time(const std::vector<Interval>& pauses, double t) {
  double paused = 0.0;
  for (const auto& p : pauses) {
    if (t > p.start) paused += std::min(t, p.end) - p.start;
  }
  return t - paused;
}

struct GrabRef {
  const AgentSpec* agent;
  GrabSpec grab;
};

std::vector<GrabRef> grabs_for(const SimConfig& cfg, std::uint32_t object_id) {
  std::vector<GrabRef> out;
  auto collect = [&](const AgentSpec& a) {
    for (const auto& g : a.grabs) {
      if (g.object_id == object_id) out.push_back({&a, g});
    }
  };
  collect(cfg.ego);
  for (const auto& a : cfg.extra_agents) collect(a);
  std::sort(out.begin(), out.end(),
            [](const GrabRef& a, const GrabRef& b) { return a.grab.start < b.grab.start; });
  return out;
}

BBox3D free_box(const ObjectSpec& obj, double t) {
  const auto s = obj.trajectory.at(effective_time(obj.static_intervals, t));
  return BBox3D{s.position, obj.half_extents, s.yaw};
}

BBox3D object_box(const SimConfig& cfg, const ObjectSpec& obj, double t) {
  std::optional<BBox3D> released;
  for (const auto& [agent, g] : grabs_for(cfg, obj.id)) {
    if (t < g.start) break;
    const BBox3D at_grab = released ? *released : free_box(obj, g.start);
    const auto anchor = agent->trajectory.at(g.start);
    const Vec3 offset = yaw_matrix(-anchor.yaw) * (at_grab.center - anchor.position);
    const double yaw_offset = at_grab.yaw - anchor.yaw;
    const auto now = agent->trajectory.at(std::min(t, g.end));
    BBox3D held{now.position + yaw_matrix(now.yaw) * offset, obj.half_extents,
                now.yaw + yaw_offset};
    if (t <= g.end) return held;
    released = held;
  }
  return released ? *released : free_box(obj, t);
}

void validate_intervals(const std::vector<Interval>& intervals, const std::string& owner) {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (!(intervals[i].end > intervals[i].start)) {
      throw Error(Errc::kConfig, fmt::format("{}: empty static interval", owner));
    }
    if (i > 0 && intervals[i].start < intervals[i - 1].end) {
      throw Error(Errc::kConfig, fmt::format("{}: static intervals overlap or are unsorted", owner));
    }
  }
}

}  // namespace

// ---- trajectories ---------------------------------------------------------------

TrajectorySpec::Sample TrajectorySpec::at(double t) const {
  if (waypoints.empty()) throw Error(Errc::kConfig, "trajectory has no waypoints");
  if (t <= waypoints.front().t) return {waypoints.front().position, waypoints.front().yaw};
  if (t >= waypoints.back().t) return {waypoints.back().position, waypoints.back().yaw};
  const auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                                   [](double v, const Waypoint& w) { return v < w.t; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const double s = (t - a.t) / (b.t - a.t);
  return {a.position + s * (b.position - a.position), a.yaw + s * (b.yaw - a.yaw)};
}

void TrajectorySpec::validate(const std::string& owner) const {
  if (waypoints.empty()) throw Error(Errc::kConfig, fmt::format("{}: no waypoints", owner));
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if (!(waypoints[i].t > waypoints[i - 1].t)) {
      throw Error(Errc::kConfig, fmt::format("{}: waypoint times not increasing", owner));
    }
  }
}

// ---- config -----------------------------------------------------------------

std::size_t SimConfig::frame_count() const {
  return static_cast<std::size_t>(std::floor(duration * fps + 1e-9)) + 1;
}

void SimConfig::validate() const {
  if (!(duration > 0.0)) throw Error(Errc::kConfig, "sim: duration must be positive");
  if (!(fps > 0.0)) throw Error(Errc::kConfig, "sim: fps must be positive");
  intrinsics.validate();
  if (!(room.max.array() > room.min.array()).all()) {
    throw Error(Errc::kConfig, "sim: room bounds are empty");
  }
  auto check_inside = [&](const TrajectorySpec& traj, const std::string& owner) {
    traj.validate(owner);
    for (const auto& w : traj.waypoints) {
      if (!room.contains(w.position)) {
        throw Error(Errc::kConfig,
                    fmt::format("{}: waypoint at t={} ({}, {}, {}) leaves the room bounds", owner,
                                w.t, w.position.x(), w.position.y(), w.position.z()));
      }
    }
  };
  std::vector<std::uint32_t> ids;
  for (const auto& o : objects) {
    const std::string owner = fmt::format("object {}", o.id);
    if (o.id == 0) throw Error(Errc::kConfig, "sim: object id 0 is reserved for background");
    if (!(o.half_extents.array() > 0.0).all()) {
      throw Error(Errc::kConfig, fmt::format("{}: half extents must be positive", owner));
    }
    check_inside(o.trajectory, owner);
    validate_intervals(o.static_intervals, owner);
    ids.push_back(o.id);
  }
  auto check_agent = [&](const AgentSpec& a) {
    const std::string owner = fmt::format("agent {}", a.id);
    if (a.id == 0) throw Error(Errc::kConfig, "sim: agent id 0 is reserved for background");
    check_inside(a.trajectory, owner);
    for (const auto& g : a.grabs) {
      if (!(g.end > g.start)) throw Error(Errc::kConfig, fmt::format("{}: empty grab", owner));
      if (std::none_of(objects.begin(), objects.end(),
                       [&](const ObjectSpec& o) { return o.id == g.object_id; })) {
        throw Error(Errc::kConfig, fmt::format("{}: grabs unknown object {}", owner, g.object_id));
      }
    }
    ids.push_back(a.id);
  };
  check_agent(ego);
  for (const auto& a : extra_agents) check_agent(a);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(Errc::kConfig, "sim: instance ids must be unique across objects and agents");
  }
  for (const auto& o : objects) {
    const auto refs = grabs_for(*this, o.id);
    for (std::size_t i = 1; i < refs.size(); ++i) {
      if (refs[i].grab.start < refs[i - 1].grab.end) {
        throw Error(Errc::kConfig, fmt::format("object {}: grab intervals overlap", o.id));
      }
    }
  }
}

// ---- state and rendering ----------------------------------------------------------

SceneState scene_state(const SimConfig& config, double t) {
  SceneState s;
  s.t = t;
  for (const auto& o : config.objects) s.object_boxes.push_back(object_box(config, o, t));
  s.agents.push_back(config.ego.trajectory.at(t));
  for (const auto& a : config.extra_agents) s.agents.push_back(a.trajectory.at(t));
  return s;
}

BBox3D agent_body_box(const Vec3& eye, double yaw, double floor_z) {
  const double top = eye.z() + 0.1;
  const double half_height = std::max(0.05, 0.5 * (top - floor_z));
  return BBox3D{Vec3(eye.x(), eye.y(), floor_z + half_height), Vec3(0.2, 0.2, half_height), yaw};
}

std::optional<double> ray_box_hit(const Vec3& origin, const Vec3& dir, const BBox3D& box) {
  const Eigen::Matrix3d to_local = yaw_matrix(-box.yaw);
  const Vec3 o = to_local * (origin - box.center);
  const Vec3 d = to_local * dir;
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double h = box.half_extents[a];
    if (std::abs(d[a]) < 1e-15) {
      if (std::abs(o[a]) > h) return std::nullopt;
      continue;
    }
    double t1 = (-h - o[a]) / d[a];
    double t2 = (h - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    t_enter = std::max(t_enter, t1);
    t_exit = std::min(t_exit, t2);
  }
  if (t_enter > t_exit || !(t_enter > 1e-9)) return std::nullopt;
  return t_enter;
}

Frame rasterize(std::span<const RenderBox> boxes, const std::optional<RoomBounds>& floor,
                const Intrinsics& intrinsics, const CameraPose& pose, std::uint32_t index) {
  Frame frame = Frame::blank(index, pose.t, intrinsics.width, intrinsics.height);
  const Eigen::Matrix4d m = pose_to_matrix(pose);
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  const Vec3 origin = pose.position();
  for (std::uint32_t row = 0; row < intrinsics.height; ++row) {
    for (std::uint32_t col = 0; col < intrinsics.width; ++col) {
      // Camera-frame ray with unit z, so the hit parameter is the depth.
      const Vec3 dir = r * Vec3((col - intrinsics.cx) / intrinsics.fx,
                                (row - intrinsics.cy) / intrinsics.fy, 1.0);
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t id = 0;
      Rgb color{};
      bool hit = false;
      if (floor && dir.z() < 0.0 && origin.z() > floor->min.z()) {
        const double s = (floor->min.z() - origin.z()) / dir.z();
        const Vec3 p = origin + s * dir;
        if (p.x() >= floor->min.x() && p.x() <= floor->max.x() && p.y() >= floor->min.y() &&
            p.y() <= floor->max.y()) {
          best = s;
          color = kFloorColor;
          hit = true;
        }
      }
      for (const auto& b : boxes) {
        if (auto s = ray_box_hit(origin, dir, b.box); s && *s < best) {
          best = *s;
          id = b.id;
          color = b.color;
          hit = true;
        }
      }
      if (!hit) continue;
      const std::size_t k = frame.offset(row, col);
      frame.depth[k] = static_cast<float>(best);
      frame.mask[k] = id;
      std::copy(color.begin(), color.end(), frame.rgb.begin() + static_cast<std::ptrdiff_t>(3 * k));
    }
  }
  return frame;
}

// ---- simulation ------------------------------------------------------------------

namespace {

Rgb seeded_color(std::uint64_t seed, std::uint32_t id) {
  Rng rng(hash_combine(seed, id));
  return {static_cast<std::uint8_t>(40 + rng.next_u64() % 200),
          static_cast<std::uint8_t>(40 + rng.next_u64() % 200),
          static_cast<std::uint8_t>(40 + rng.next_u64() % 200)};
}

}  // namespace

SimResult simulate(const SimConfig& config) {
  config.validate();
  const std::size_t n_frames = config.frame_count();
  const double floor_z = config.room.min.z();

  GroundTruth gt;
  gt.fps = config.fps;
  gt.duration = config.duration;
  gt.intrinsics = config.intrinsics;
  gt.room = config.room;
  gt.ego_id = config.ego.id;
  for (std::size_t i = 0; i < n_frames; ++i) gt.times.push_back(static_cast<double>(i) / config.fps);

  std::vector<const ObjectSpec*> objects;
  for (const auto& o : config.objects) objects.push_back(&o);
  std::sort(objects.begin(), objects.end(),
            [](const ObjectSpec* a, const ObjectSpec* b) { return a->id < b->id; });
  std::vector<const AgentSpec*> agents{&config.ego};
  for (const auto& a : config.extra_agents) agents.push_back(&a);
  std::sort(agents.begin() + 1, agents.end(),
            [](const AgentSpec* a, const AgentSpec* b) { return a->id < b->id; });

  for (const ObjectSpec* o : objects) {
    ObjectTrack track{o->id, o->label, o->half_extents,
                      o->color.value_or(seeded_color(config.seed, o->id)), {}};
    for (double t : gt.times) track.boxes.push_back(object_box(config, *o, t));
    gt.objects.push_back(std::move(track));
  }
  for (const AgentSpec* a : agents) {
    AgentTrack track;
    track.id = a->id;
    track.label = a->label;
    track.ego = (a == &config.ego);
    track.color = a->color.value_or(seeded_color(config.seed, a->id));
    for (double t : gt.times) {
      const auto s = a->trajectory.at(t);
      track.positions.push_back(s.position);
      track.yaws.push_back(s.yaw);
      track.cameras.push_back(look_pose(t, s.position, s.yaw, a->pitch));
    }
    gt.agents.push_back(std::move(track));
    for (const auto& g : a->grabs) gt.grabs.push_back({a->id, g.object_id, g.start, g.end});
  }
  std::sort(gt.grabs.begin(), gt.grabs.end(), [](const GrabEvent& a, const GrabEvent& b) {
    return std::tie(a.start, a.agent_id, a.object_id) < std::tie(b.start, b.agent_id, b.object_id);
  });

  SimResult result;
  SceneSequence& seq = result.sequence;
  seq.fps = config.fps;
  seq.intrinsics = config.intrinsics;
  seq.poses = gt.agents.front().cameras;
  for (const auto& o : gt.objects) {
    Instance inst{o.id, o.label, {}};
    for (std::size_t i = 0; i < n_frames; ++i) inst.boxes.push_back({gt.times[i], o.boxes[i]});
    seq.instances.emplace(o.id, std::move(inst));
  }
  for (std::size_t k = 1; k < gt.agents.size(); ++k) {
    const auto& a = gt.agents[k];
    Instance inst{a.id, a.label, {}};
    for (std::size_t i = 0; i < n_frames; ++i) {
      inst.boxes.push_back({gt.times[i], agent_body_box(a.positions[i], a.yaws[i], floor_z)});
    }
    seq.instances.emplace(a.id, std::move(inst));
  }

  seq.frames.resize(n_frames);
  parallel_for(n_frames, [&](std::size_t i) {
    std::vector<RenderBox> boxes;
    for (const auto& o : gt.objects) boxes.push_back({o.boxes[i], o.id, o.color});
    for (std::size_t k = 1; k < gt.agents.size(); ++k) {
      const auto& a = gt.agents[k];
      boxes.push_back({agent_body_box(a.positions[i], a.yaws[i], floor_z), a.id, a.color});
    }
    seq.frames[i] = rasterize(boxes, config.room, config.intrinsics, seq.poses[i],
                              static_cast<std::uint32_t>(i));
  });
  result.truth = std::move(gt);
  return result;
}

// ---- ground-truth queries -----------------------------------------------------------

std::size_t GroundTruth::frame_index(double t) const {
  if (!times.empty()) {
    const double k = std::round(t * fps);
    if (k >= 0.0 && k < static_cast<double>(times.size())) {
      const auto i = static_cast<std::size_t>(k);
      if (std::abs(times[i] - t) <= 1e-6) return i;
    }
    const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-6);
    if (it != times.end() && std::abs(*it - t) <= 1e-6) {
      return static_cast<std::size_t>(it - times.begin());
    }
  }
  throw Error(Errc::kLookup, fmt::format("ground truth has no sampled frame at t={}", t));
}

const ObjectTrack* GroundTruth::find_object(std::uint32_t id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

const AgentTrack* GroundTruth::find_agent(std::uint32_t id) const {
  for (const auto& a : agents) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

const AgentTrack& GroundTruth::ego() const {
  if (const AgentTrack* a = find_agent(ego_id)) return *a;
  throw Error(Errc::kLookup, "ground truth has no ego agent");
}

std::vector<Vec3> GroundTruth::positions_of(std::uint32_t id) const {
  if (const ObjectTrack* o = find_object(id)) {
    std::vector<Vec3> out;
    for (const auto& b : o->boxes) out.push_back(b.center);
    return out;
  }
  if (const AgentTrack* a = find_agent(id)) return a->positions;
  throw Error(Errc::kLookup, fmt::format("ground truth has no instance {}", id));
}

Vec3 central_difference(std::span<const Vec3> values, std::span<const double> times,
                        std::size_t i) {
  const std::size_t n = values.size();
  if (n < 2) return Vec3::Zero();
  const std::size_t lo = (i == 0) ? 0 : i - 1;
  const std::size_t hi = (i + 1 >= n) ? n - 1 : i + 1;
  const Vec3 delta = values[hi] - values[lo];
  const double dt = times[hi] - times[lo];
  return Vec3(delta.x() / dt, delta.y() / dt, delta.z() / dt);
}

double central_difference(std::span<const double> values, std::span<const double> times,
                          std::size_t i) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const std::size_t lo = (i == 0) ? 0 : i - 1;
  const std::size_t hi = (i + 1 >= n) ? n - 1 : i + 1;
  return (values[hi] - values[lo]) / (times[hi] - times[lo]);
}

Properties ground_truth_properties_at(const GroundTruth& gt, std::uint32_t id, std::size_t frame) {
  if (frame >= gt.frame_count()) {
    throw Error(Errc::kLookup, fmt::format("frame {} outside ground truth", frame));
  }
  std::vector<double> yaws;
  if (const ObjectTrack* o = gt.find_object(id)) {
    for (const auto& b : o->boxes) yaws.push_back(b.yaw);
  } else if (const AgentTrack* a = gt.find_agent(id)) {
    yaws = a->yaws;
  } else {
    throw Error(Errc::kLookup, fmt::format("ground truth has no instance {}", id));
  }
  const std::vector<Vec3> pos = gt.positions_of(id);
  Properties p;
  p.position = pos[frame];
  p.velocity = central_difference(pos, gt.times, frame);
  p.speed = p.velocity.norm();
  p.heading = std::atan2(p.velocity.y(), p.velocity.x());
  p.yaw = yaws[frame];
  p.yaw_rate = central_difference(yaws, gt.times, frame);
  p.is_moving = p.speed > kMotionThreshold;
  return p;
}

Properties ground_truth_properties(const GroundTruth& gt, std::uint32_t id, double t) {
  return ground_truth_properties_at(gt, id, gt.frame_index(t));
}

GroundTruth resample(const GroundTruth& gt, double fps) {
  if (!(fps > 0.0)) throw Error(Errc::kConfig, "resample: fps must be positive");
  const double ratio = gt.fps / fps;
  const double k = std::round(ratio);
  if (k < 1.0 || std::abs(ratio - k) > 1e-9) {
    throw Error(Errc::kConfig,
                fmt::format("resample: {} Hz is not an integer divisor of {} Hz", fps, gt.fps));
  }
  const auto step = static_cast<std::size_t>(k);
  if (step == 1) return gt;
  GroundTruth out = gt;
  out.fps = fps;
  out.times.clear();
  for (auto& o : out.objects) o.boxes.clear();
  for (auto& a : out.agents) {
    a.positions.clear();
    a.yaws.clear();
    a.cameras.clear();
  }
  for (std::size_t i = 0; i < gt.times.size(); i += step) {
    out.times.push_back(gt.times[i]);
    for (std::size_t k2 = 0; k2 < gt.objects.size(); ++k2) {
      out.objects[k2].boxes.push_back(gt.objects[k2].boxes[i]);
    }
    for (std::size_t k2 = 0; k2 < gt.agents.size(); ++k2) {
      out.agents[k2].positions.push_back(gt.agents[k2].positions[i]);
      out.agents[k2].yaws.push_back(gt.agents[k2].yaws[i]);
      out.agents[k2].cameras.push_back(gt.agents[k2].cameras[i]);
    }
  }
  return out;
}

// ---- canned scenes ------------------------------------------------------------------

namespace {

constexpr std::array<const char*, 10> kLabels{"mug",  "book",  "chair", "box", "ball",
                                              "bottle", "laptop", "plant", "lamp", "bag"};
constexpr std::array<Rgb, 10> kPalette{{{220, 40, 40},
                                        {40, 180, 60},
                                        {40, 70, 220},
                                        {230, 210, 40},
                                        {240, 140, 30},
                                        {140, 60, 180},
                                        {40, 200, 210},
                                        {240, 130, 180},
                                        {130, 80, 40},
                                        {235, 235, 235}}};

Waypoint wp(double t, double x, double y, double z, double yaw = 0.0) {
  return Waypoint{t, Vec3(x, y, z), yaw};
}

}  // namespace

SimConfig make_demo_config(std::uint64_t seed, std::size_t n_objects, double duration) {
  SimConfig cfg;
  cfg.duration = duration;
  cfg.seed = seed;
  Rng rng(hash_combine(seed, 0xdec0));
  const std::size_t offset = rng.next_u64() % kPalette.size();

  for (std::size_t i = 0; i < n_objects; ++i) {
    ObjectSpec o;
    o.id = static_cast<std::uint32_t>(i + 1);
    o.label = kLabels[(i + offset) % kLabels.size()];
    o.color = kPalette[(i + offset) % kPalette.size()];
    o.half_extents = Vec3(rng.uniform(0.1, 0.35), rng.uniform(0.1, 0.35), rng.uniform(0.1, 0.35));
    const double z = o.half_extents.z();
    const double x0 = rng.uniform(-1.8, 1.8);
    const double y0 = rng.uniform(-1.8, 1.8);
    const double yaw0 = rng.uniform(-1.0, 1.0);
    o.trajectory.waypoints.push_back(wp(0.0, x0, y0, z, yaw0));
    if (i % 3 != 0) {
      // Wait, then travel between random points.
      const double start = rng.uniform(0.1, 0.4) * duration;
      o.trajectory.waypoints.push_back(wp(start, x0, y0, z, yaw0));
      const double mid = start + rng.uniform(0.15, 0.3) * duration;
      o.trajectory.waypoints.push_back(
          wp(mid, rng.uniform(-1.8, 1.8), rng.uniform(-1.8, 1.8), z, yaw0 + 0.5));
      const double end = std::min(duration, mid + rng.uniform(0.1, 0.25) * duration);
      if (end > mid) {
        o.trajectory.waypoints.push_back(
            wp(end, rng.uniform(-1.8, 1.8), rng.uniform(-1.8, 1.8), z, yaw0));
      }
      if (i % 3 == 2) {
        const double pause = 0.5 * (start + mid);
        o.static_intervals.push_back({pause, pause + 0.2 * duration});
      }
    }
    cfg.objects.push_back(std::move(o));
  }

  // Ego orbits the room centre looking inward, with a standing pause.
  cfg.ego.id = 100;
  cfg.ego.label = "ego";
  const double radius = 2.5;
  const double theta0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double omega = 0.6 / duration * std::numbers::pi;
  const double pause_at = 0.3 * duration;
  const double pause_len = 0.1 * duration;
  for (int k = 0; k <= 10; ++k) {
    const double t = duration * k / 10.0;
    const double travel = (t <= pause_at) ? t : std::max(pause_at, t - pause_len);
    const double theta = theta0 + omega * travel;
    cfg.ego.trajectory.waypoints.push_back(wp(t, radius * std::cos(theta),
                                              radius * std::sin(theta), 1.5,
                                              theta + std::numbers::pi));
  }
  if (n_objects > 0) {
    cfg.ego.grabs.push_back({1, 0.55 * duration, 0.7 * duration});
  }

  AgentSpec walker;
  walker.id = 200;
  walker.label = "person";
  walker.color = Rgb{200, 150, 120};
  walker.trajectory.waypoints = {wp(0.0, -2.2, 1.0, 1.6, 0.0),
                                 wp(0.5 * duration, 2.2, 1.0, 1.6, 0.0),
                                 wp(duration, -2.2, -1.0, 1.6, std::numbers::pi)};
  cfg.extra_agents.push_back(std::move(walker));
  return cfg;
}

SimConfig make_stress_config() {
  SimConfig cfg;
  cfg.duration = 30.0;
  cfg.fps = 5.0;
  cfg.seed = 11;

  ObjectSpec box{1, "box", Vec3(0.25, 0.25, 0.2), kPalette[0], {}, {}};
  box.trajectory.waypoints = {wp(0.0, 1.5, 0.5, 0.2)};

  // Moves 3-6 s, pauses 6-10 s, moves again 10-16 s.
  ObjectSpec ball{2, "ball", Vec3(0.15, 0.15, 0.15), kPalette[2], {}, {{6.0, 10.0}}};
  ball.trajectory.waypoints = {wp(0.0, -2.0, -1.5, 0.15), wp(3.0, -2.0, -1.5, 0.15),
                               wp(13.0, 2.0, -1.5, 0.15)};

  ObjectSpec chair{3, "chair", Vec3(0.3, 0.3, 0.45), kPalette[1], {}, {}};
  chair.trajectory.waypoints = {wp(0.0, 1.0, 1.5, 0.45), wp(8.0, 1.0, 1.5, 0.45),
                                wp(14.0, -1.0, 1.5, 0.45, 0.6)};

  ObjectSpec mug{4, "mug", Vec3(0.06, 0.06, 0.08), kPalette[3], {}, {}};
  mug.trajectory.waypoints = {wp(0.0, 0.5, -0.6, 0.08)};

  cfg.objects = {box, ball, chair, mug};

  cfg.ego.id = 100;
  cfg.ego.label = "ego";
  const double half_pi = std::numbers::pi / 2.0;
  cfg.ego.trajectory.waypoints = {
      wp(0.0, -2.5, 0.0, 1.5, 0.0),         wp(2.0, -2.5, 0.0, 1.5, 0.0),
      wp(8.0, -0.5, 0.0, 1.5, 0.0),         wp(10.0, -0.5, 0.0, 1.5, half_pi),
      wp(12.0, -0.5, 0.0, 1.5, half_pi),    wp(17.0, 0.2, -0.2, 1.5, -0.5),
      wp(22.0, -1.0, -2.0, 1.5, -0.5),      wp(30.0, -1.0, -2.0, 1.5, -0.5)};
  cfg.ego.grabs = {{4, 18.0, 22.0}};

  AgentSpec walker;
  walker.id = 200;
  walker.label = "person";
  walker.color = Rgb{200, 150, 120};
  walker.trajectory.waypoints = {wp(0.0, 2.5, 2.5, 1.6, -2.4), wp(10.0, 0.5, 0.5, 1.6, -2.4),
                                 wp(20.0, 2.5, 2.5, 1.6, 0.8), wp(30.0, 2.5, -2.5, 1.6, -1.6)};
  walker.grabs = {{3, 24.0, 27.0}};
  cfg.extra_agents = {walker};
  return cfg;
}

}  // namespace d4d
