#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "d4d/qa.hpp"
#include "d4d/simulator.hpp"

namespace oracle {

using d4d::Answer;
using d4d::AnswerKind;
using d4d::GroundTruth;
using d4d::Measure;
using d4d::QAPair;
using d4d::TaskKind;
using d4d::Vec3;

inline std::size_t frame_at(const GroundTruth& gt, double t) {
  for (std::size_t i = 0; i < gt.times.size(); ++i) {
    if (std::abs(gt.times[i] - t) < 1e-6) return i;
  }
  throw std::runtime_error(fmt::format("no frame at {}", t));
}

inline std::vector<Vec3> track(const GroundTruth& gt, std::uint32_t id) {
  std::vector<Vec3> out;
  for (const auto& o : gt.objects) {
    if (o.id == id) {
      for (const auto& b : o.boxes) out.push_back(b.center);
      return out;
    }
  }
  for (const auto& a : gt.agents) {
    if (a.id == id) return a.positions;
  }
  throw std::runtime_error(fmt::format("no entity {}", id));
}

inline std::vector<double> yaw_track(const GroundTruth& gt, std::uint32_t id) {
  std::vector<double> out;
  for (const auto& o : gt.objects) {
    if (o.id == id) {
      for (const auto& b : o.boxes) out.push_back(b.yaw);
      return out;
    }
  }
  for (const auto& a : gt.agents) {
    if (a.id == id) return a.yaws;
  }
  throw std::runtime_error(fmt::format("no entity {}", id));
}

struct Neighbors {
  std::size_t lo, hi;
};

inline Neighbors neighbors(std::size_t n, std::size_t i) {
  return {i > 0 ? i - 1 : 0, i + 1 < n ? i + 1 : n - 1};
}

inline Vec3 velocity(const GroundTruth& gt, std::uint32_t id, std::size_t i) {
  const auto p = track(gt, id);
  const auto [lo, hi] = neighbors(p.size(), i);
  if (lo == hi) return Vec3::Zero();
  return (p[hi] - p[lo]) / (gt.times[hi] - gt.times[lo]);
}

inline double speed(const GroundTruth& gt, std::uint32_t id, std::size_t i) {
  const Vec3 v = velocity(gt, id, i);
  return std::sqrt(v.x() * v.x() + v.y() * v.y() + v.z() * v.z());
}

inline double yaw_rate(const GroundTruth& gt, std::uint32_t id, std::size_t i) {
  const auto y = yaw_track(gt, id);
  const auto [lo, hi] = neighbors(y.size(), i);
  if (lo == hi) return 0.0;
  return (y[hi] - y[lo]) / (gt.times[hi] - gt.times[lo]);
}

inline std::vector<std::size_t> frames_between(const GroundTruth& gt, double t0, double t1) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < gt.times.size(); ++i) {
    if (gt.times[i] >= t0 - 1e-6 && gt.times[i] <= t1 + 1e-6) out.push_back(i);
  }
  return out;
}

inline std::string direction(const Vec3& a, const Vec3& b, double yaw) {
  const Vec3 d = b - a;
  const Vec3 right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Vec3 fwd(std::cos(yaw), std::sin(yaw), 0.0);
  const double lat = d.dot(right);
  const double lon = d.dot(fwd);
  if (std::abs(lat) < 0.2 && std::abs(lon) < 0.2) return "near";
  std::string side;
  if (std::abs(lat) >= std::abs(lon)) {
    side = lat > 0 ? "right" : "left";
  } else {
    side = lon < 0 ? "front" : "behind";
  }
  return side + (d.norm() < 1.5 ? "-near" : "-far");
}

inline std::string status(double speed, double rate) {
  if (std::abs(rate) > 0.3) return "turning";
  return speed > 0.05 ? "walking" : "stationary";
}

inline std::string colour(const d4d::Rgb& c) {
  const std::vector<std::pair<std::string, std::array<int, 3>>> table{
      {"red", {220, 40, 40}},    {"green", {40, 180, 60}},   {"blue", {40, 70, 220}},
      {"yellow", {230, 210, 40}}, {"orange", {240, 140, 30}}, {"purple", {140, 60, 180}},
      {"cyan", {40, 200, 210}},  {"pink", {240, 130, 180}},  {"brown", {130, 80, 40}},
      {"white", {235, 235, 235}}, {"gray", {128, 128, 128}}, {"black", {20, 20, 20}}};
  std::string best;
  long best_d = std::numeric_limits<long>::max();
  for (const auto& [name, rgb] : table) {
    long d = 0;
    for (int k = 0; k < 3; ++k) d += long(c[k] - rgb[k]) * (c[k] - rgb[k]);
    if (d < best_d) {
      best_d = d;
      best = name;
    }
  }
  return best;
}

// Recomputes the answer of a generated question from the dense ground truth
// alone, using the question's anchors.
inline Answer recompute(const GroundTruth& gt, const QAPair& q, double dwell = 3.0) {
  const auto& ts = q.anchors.timestamps;
  const auto& ids = q.anchors.instance_ids;
  Answer a;
  switch (q.task) {
    case TaskKind::kDynamicScene: {
      const std::size_t f = frame_at(gt, ts.at(0));
      a.kind = AnswerKind::kIdSet;
      for (const auto& o : gt.objects) {
        if (speed(gt, o.id, f) > 0.05) a.ids.push_back(o.id);
      }
      std::sort(a.ids.begin(), a.ids.end());
      return a;
    }
    case TaskKind::kRelativePosition: {
      const std::size_t f = frame_at(gt, ts.at(0));
      a.kind = AnswerKind::kLabel;
      a.text = direction(track(gt, ids.at(0))[f], track(gt, ids.at(1))[f], gt.agents[0].yaws[f]);
      return a;
    }
    case TaskKind::kCurrentObjectProperty: {
      const std::size_t f = frame_at(gt, ts.at(0));
      const std::uint32_t id = ids.at(0);
      if (q.anchors.detail == "position") {
        a.kind = AnswerKind::kVector;
        a.measure = Measure::kPosition;
        a.units = "m";
        const Vec3 p = track(gt, id)[f];
        a.vec = {p.x(), p.y(), p.z()};
      } else if (q.anchors.detail == "speed") {
        a.kind = AnswerKind::kNumber;
        a.measure = Measure::kSpeed;
        a.units = "m/s";
        a.number = speed(gt, id, f);
      } else {
        a.kind = AnswerKind::kBox;
        a.measure = Measure::kBox;
        for (const auto& o : gt.objects) {
          if (o.id == id) a.box = o.boxes[f];
        }
      }
      return a;
    }
    case TaskKind::kAgentVelocity: {
      const std::size_t f = frame_at(gt, ts.at(0));
      const Vec3 v = velocity(gt, ids.at(0), f);
      a.kind = AnswerKind::kVelocity;
      a.measure = Measure::kSpeed;
      a.units = "m/s";
      a.speed = speed(gt, ids.at(0), f);
      a.heading = std::atan2(v.y(), v.x());
      return a;
    }
    case TaskKind::kMultiAgentRelation: {
      const std::size_t f = frame_at(gt, ts.at(0));
      const auto me = track(gt, ids.at(0));
      const auto other = track(gt, ids.at(1));
      const auto [lo, hi] = neighbors(me.size(), f);
      const double rate =
          lo == hi ? 0.0
                   : ((other[hi] - me[hi]).norm() - (other[lo] - me[lo]).norm()) /
                         (gt.times[hi] - gt.times[lo]);
      a.kind = AnswerKind::kLabel;
      a.text = rate < -0.05 ? "approaching" : rate > 0.05 ? "receding" : "static";
      return a;
    }
    case TaskKind::kMotionSequence: {
      const auto frames = frames_between(gt, ts.at(0), ts.at(1));
      std::vector<std::pair<double, std::uint32_t>> onsets;
      for (const auto& o : gt.objects) {
        for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
          if (speed(gt, o.id, frames[k]) > 0.05 && speed(gt, o.id, frames[k + 1]) > 0.05) {
            onsets.emplace_back(gt.times[frames[k]], o.id);
            break;
          }
        }
      }
      std::sort(onsets.begin(), onsets.end());
      a.kind = AnswerKind::kIdList;
      for (const auto& [t, id] : onsets) a.ids.push_back(id);
      return a;
    }
    case TaskKind::kMostActiveObject: {
      const auto frames = frames_between(gt, ts.at(0), ts.at(1));
      double best = -1.0;
      std::uint32_t best_id = 0;
      for (const auto& o : gt.objects) {
        double len = 0.0;
        for (std::size_t k = 1; k < frames.size(); ++k) {
          len += (o.boxes[frames[k]].center - o.boxes[frames[k - 1]].center).norm();
        }
        if (len > best || (len == best && o.id < best_id)) {
          best = len;
          best_id = o.id;
        }
      }
      a.kind = AnswerKind::kId;
      a.ids = {best_id};
      return a;
    }
    case TaskKind::kTemporaryStaticObjects: {
      const auto frames = frames_between(gt, ts.at(0), ts.at(1));
      a.kind = AnswerKind::kIdSet;
      for (const auto& o : gt.objects) {
        // Look for moving, then a static run of at least `dwell`, then moving.
        std::vector<bool> moving;
        for (auto i : frames) moving.push_back(speed(gt, o.id, i) > 0.05);
        bool found = false;
        for (std::size_t s = 1; s < moving.size() && !found; ++s) {
          if (moving[s] || !moving[s - 1]) continue;
          std::size_t e = s;
          while (e + 1 < moving.size() && !moving[e + 1]) ++e;
          if (e + 1 < moving.size() &&
              gt.times[frames[e]] - gt.times[frames[s]] >= dwell - 1e-9) {
            found = true;
          }
        }
        if (found) a.ids.push_back(o.id);
      }
      std::sort(a.ids.begin(), a.ids.end());
      return a;
    }
    case TaskKind::kAgentTrajectory: {
      const auto frames = frames_between(gt, ts.at(0), ts.at(1));
      const auto p = track(gt, ids.at(0));
      const Vec3 d = p[frames.back()] - p[frames.front()];
      a.kind = AnswerKind::kVector;
      a.measure = Measure::kPosition;
      a.units = "m";
      a.vec = {d.x(), d.y(), d.z()};
      return a;
    }
    case TaskKind::kAgentMotionStatus: {
      const auto frames = frames_between(gt, ts.at(0), ts.at(1));
      a.kind = AnswerKind::kLabelList;
      for (auto i : frames) {
        const auto s = status(speed(gt, ids.at(0), i), yaw_rate(gt, ids.at(0), i));
        if (a.labels.empty() || a.labels.back() != s) a.labels.push_back(s);
      }
      return a;
    }
    case TaskKind::kAgentGrabObject: {
      a.kind = AnswerKind::kId;
      for (const auto& g : gt.grabs) {
        if (g.agent_id == ids.at(0) && std::abs(g.start - ts.at(2)) < 1e-9) a.ids = {g.object_id};
      }
      return a;
    }
    case TaskKind::kObjectCaptioning: {
      const std::size_t f = frame_at(gt, ts.at(0));
      const d4d::ObjectTrack* self = nullptr;
      for (const auto& o : gt.objects) {
        if (o.id == ids.at(0)) self = &o;
      }
      const double extent = 2.0 * self->half_extents.maxCoeff();
      std::string text = fmt::format("a {} {} {}", colour(self->color),
                                     extent < 0.3 ? "small" : extent < 1.0 ? "medium" : "large",
                                     self->label);
      const d4d::ObjectTrack* nn = nullptr;
      double best = INFINITY;
      for (const auto& o : gt.objects) {
        if (o.id == self->id) continue;
        const double d = (o.boxes[f].center - self->boxes[f].center).norm();
        if (d < best) {
          best = d;
          nn = &o;
        }
      }
      text += nn ? fmt::format(", {:.2f} m from the {}", best, nn->label)
                 : std::string(" with no other objects around");
      text += speed(gt, self->id, f) > 0.05 ? ", moving." : ", static.";
      a.kind = AnswerKind::kText;
      a.text = text;
      return a;
    }
  }
  return a;
}

// Empty when equal; numeric fields compared within `tol`.
inline std::string diff(const Answer& got, const Answer& want, double tol = 1e-9) {
  const auto near = [&](double x, double y) { return std::abs(x - y) <= tol; };
  if (got.kind != want.kind) return "kind";
  switch (want.kind) {
    case AnswerKind::kNumber:
      return near(got.number, want.number) && got.units == want.units ? "" : "number";
    case AnswerKind::kVector:
      for (int k = 0; k < 3; ++k) {
        if (!near(got.vec[k], want.vec[k])) return "vector";
      }
      return "";
    case AnswerKind::kVelocity:
      if (!near(got.speed, want.speed)) return "speed";
      if (want.speed > 1e-9 && !near(got.heading, want.heading)) return "heading";
      return "";
    case AnswerKind::kBox:
      return got.box == want.box ? "" : "box";
    case AnswerKind::kLabel:
    case AnswerKind::kText:
      return got.text == want.text ? "" : "text '" + got.text + "' vs '" + want.text + "'";
    case AnswerKind::kLabelList:
      return got.labels == want.labels ? "" : "labels";
    case AnswerKind::kId:
    case AnswerKind::kIdList:
    case AnswerKind::kIdSet:
      return got.ids == want.ids ? "" : "ids";
  }
  return "";
}

}  // namespace oracle
