#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "d4d/binary_io.hpp"
#include "d4d/error.hpp"
#include "d4d/json_types.hpp"
#include "d4d/parallel.hpp"
#include "d4d/qa.hpp"
#include "d4d/rng.hpp"

namespace d4d {

using nlohmann::json;

std::size_t FrameProperties::index_of(std::uint32_t id) const {
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (entities[i].id == id) return i;
  }
  throw Error(Errc::kLookup, fmt::format("frame {} has no instance {}", frame, id));
}

FrameProperties frame_level_properties(const GroundTruth& gt, double t) {
  FrameProperties fp;
  fp.frame = gt.frame_index(t);
  fp.t = gt.times[fp.frame];
  const CameraPose& cam = gt.ego().cameras[fp.frame];
  const auto add = [&](std::uint32_t id, bool agent, const std::string& label) {
    EntityProperties e;
    e.id = id;
    e.agent = agent;
    e.label = label;
    e.props = ground_truth_properties_at(gt, id, fp.frame);
    if (id != gt.ego_id) {
      const auto proj = project(e.props.position, gt.intrinsics, cam);
      e.in_view = proj && proj->in_image;
    }
    fp.entities.push_back(std::move(e));
  };
  for (const auto& o : gt.objects) add(o.id, false, o.label);
  for (const auto& a : gt.agents) add(a.id, true, a.label);

  const std::size_t n = fp.entities.size();
  fp.distance.assign(n, std::vector<double>(n, 0.0));
  fp.bearing.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const Properties& a = fp.entities[i].props;
    const double c = std::cos(a.yaw);
    const double s = std::sin(a.yaw);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const Vec3 d = fp.entities[j].props.position - a.position;
      fp.distance[i][j] = d.norm();
      fp.bearing[i][j] = std::atan2(-s * d.x() + c * d.y(), c * d.x() + s * d.y());
    }
  }
  return fp;
}

void WindowSpec::validate() const {
  if (!(end > start) || !(stride > 0.0)) {
    throw Error(Errc::kConfig,
                fmt::format("window [{}, {}] stride {} is degenerate", start, end, stride));
  }
}

std::vector<WindowSpec> make_windows(double duration, double length, double stride) {
  if (!(length > 0.0) || !(stride > 0.0) || !(duration > 0.0)) {
    throw Error(Errc::kConfig, "windows need positive duration, length and stride");
  }
  if (length >= duration) return {{0.0, duration, stride}};
  std::vector<WindowSpec> out;
  for (std::size_t k = 0;; ++k) {
    const double start = static_cast<double>(k) * stride;
    if (start + length > duration + 1e-9) break;
    out.push_back({start, start + length, stride});
  }
  return out;
}

std::string color_name(const Rgb& rgb) {
  struct Named {
    const char* name;
    int r, g, b;
  };
  static constexpr std::array<Named, 12> kNames{{{"red", 220, 40, 40},
                                                 {"green", 40, 180, 60},
                                                 {"blue", 40, 70, 220},
                                                 {"yellow", 230, 210, 40},
                                                 {"orange", 240, 140, 30},
                                                 {"purple", 140, 60, 180},
                                                 {"cyan", 40, 200, 210},
                                                 {"pink", 240, 130, 180},
                                                 {"brown", 130, 80, 40},
                                                 {"white", 235, 235, 235},
                                                 {"gray", 128, 128, 128},
                                                 {"black", 20, 20, 20}}};
  const Named* best = &kNames[0];
  int best_d = std::numeric_limits<int>::max();
  for (const auto& c : kNames) {
    const int dr = rgb[0] - c.r, dg = rgb[1] - c.g, db = rgb[2] - c.b;
    const int d = dr * dr + dg * dg + db * db;
    if (d < best_d) {
      best_d = d;
      best = &c;
    }
  }
  return best->name;
}

std::string size_class(const Vec3& half_extents) {
  const double extent = 2.0 * half_extents.maxCoeff();
  if (extent < 0.3) return "small";
  if (extent < 1.0) return "medium";
  return "large";
}

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::string ref(std::size_t k) { return fmt::format("${}", k); }

// Records steps while evaluating them with the same interpreter used for
// verification, so the trace replays exactly.
class CotBuilder {
 public:
  std::size_t add(std::string text, std::string op, json args) {
    json resolved = json::array();
    for (const auto& a : args) {
      if (a.is_string() && a.get<std::string>().starts_with('$')) {
        resolved.push_back(steps_.at(std::stoul(a.get<std::string>().substr(1))).value);
      } else {
        resolved.push_back(a);
      }
    }
    CotStep s{std::move(text), std::move(op), std::move(args), json()};
    s.value = apply_cot_op(s.op, resolved);
    steps_.push_back(std::move(s));
    return steps_.size() - 1;
  }
  std::size_t given(std::string text, json value) {
    return add(std::move(text), "given", json::array({std::move(value)}));
  }
  const json& value(std::size_t k) const { return steps_.at(k).value; }
  std::vector<CotStep> take() const { return steps_; }

 private:
  std::vector<CotStep> steps_;
};

struct Diff {
  std::size_t velocity;
  std::size_t speed;
};

// Central difference of an entity's position at `frame`, spelled out.
Diff speed_steps(CotBuilder& cot, const GroundTruth& gt, const std::vector<Vec3>& pos,
                 std::size_t frame, const std::string& who) {
  const std::size_t n = pos.size();
  const std::size_t lo = frame == 0 ? 0 : frame - 1;
  const std::size_t hi = frame + 1 >= n ? n - 1 : frame + 1;
  if (lo == hi) {
    const std::size_t v = cot.given(fmt::format("{} has a single sample, velocity is zero", who),
                                    json::array({0.0, 0.0, 0.0}));
    return {v, cot.add(fmt::format("speed of {}", who), "norm", json::array({ref(v)}))};
  }
  const auto p0 = cot.given(fmt::format("{} at t={:.2f} s", who, gt.times[lo]), vec_json(pos[lo]));
  const auto p1 = cot.given(fmt::format("{} at t={:.2f} s", who, gt.times[hi]), vec_json(pos[hi]));
  const auto dp = cot.add(fmt::format("displacement of {}", who), "sub",
                          json::array({ref(p1), ref(p0)}));
  const auto dt = cot.add("elapsed time", "sub", json::array({gt.times[hi], gt.times[lo]}));
  const auto v = cot.add(fmt::format("velocity of {}", who), "vdiv",
                         json::array({ref(dp), ref(dt)}));
  const auto s = cot.add(fmt::format("speed of {}", who), "norm", json::array({ref(v)}));
  return {v, s};
}

std::string describe(const std::string& label, std::uint32_t id) {
  return fmt::format("the {} (id {})", label, id);
}

// Picks one of three phrasings from the seed and the question's anchors.
std::string phrase(std::uint64_t seed, TaskKind task, std::uint64_t key,
                   const std::array<std::string_view, 3>& variants, fmt::format_args args) {
  const std::uint64_t h = hash_combine(hash_combine(seed, fnv1a(task_name(task))), key);
  return fmt::vformat(variants[h % variants.size()], args);
}

std::uint64_t anchor_key(std::size_t frame, std::initializer_list<std::uint32_t> ids) {
  std::uint64_t h = mix64(frame);
  for (auto id : ids) h = hash_combine(h, id);
  return h;
}

QAPair make_pair(const GroundTruth& gt, TaskKind task, std::string question, Answer answer,
                 std::vector<CotStep> cot, std::vector<double> times,
                 std::vector<std::uint32_t> ids, std::string detail = {}) {
  QAPair q;
  q.task = task;
  q.question = std::move(question);
  q.answer = std::move(answer);
  q.cot = std::move(cot);
  q.anchors = {gt.sequence_id, std::move(times), std::move(ids), std::move(detail)};
  return q;
}

Answer answer_of(const CotBuilder& cot, std::size_t last, AnswerKind kind,
                 Measure measure = Measure::kNone, std::string units = {}) {
  return answer_from_payload(kind, measure, std::move(units), cot.value(last));
}

std::vector<std::uint32_t> object_ids(const GroundTruth& gt) {
  std::vector<std::uint32_t> ids;
  for (const auto& o : gt.objects) ids.push_back(o.id);
  return ids;
}

std::vector<std::size_t> window_frames(const GroundTruth& gt, const WindowSpec& w) {
  std::vector<std::size_t> frames;
  for (std::size_t i = 0; i < gt.times.size(); ++i) {
    if (gt.times[i] >= w.start - 1e-9 && gt.times[i] <= w.end + 1e-9) frames.push_back(i);
  }
  return frames;
}

}  // namespace

std::vector<QAPair> gen_momentary(const GroundTruth& gt, double t, std::uint64_t seed,
                                  const QaOptions&) {
  const std::size_t f = gt.frame_index(t);
  const double tf = gt.times[f];
  std::vector<QAPair> out;
  const std::size_t n = gt.objects.size();
  const AgentTrack& ego = gt.ego();

  if (n > 0) {
    CotBuilder cot;
    json speeds = json::array();
    for (const auto& o : gt.objects) {
      speeds.push_back(ref(speed_steps(cot, gt, gt.positions_of(o.id), f,
                                       describe(o.label, o.id)).speed));
    }
    const auto list = cot.add("speeds of all objects", "list", speeds);
    const auto flags = cot.add(fmt::format("moving when speed exceeds {} m/s", kMotionThreshold),
                               "threshold", json::array({ref(list), kMotionThreshold}));
    const auto sel = cot.add("moving objects", "select", json::array({object_ids(gt), ref(flags)}));
    out.push_back(make_pair(
        gt, TaskKind::kDynamicScene,
        phrase(seed, TaskKind::kDynamicScene, anchor_key(f, {}),
               {"Which objects are moving at t={0:.2f} s?",
                "At {0:.2f} seconds, list the ids of all objects in motion.",
                "Which objects are in motion at time {0:.2f} s?"},
               fmt::make_format_args(tf)),
        answer_of(cot, sel, AnswerKind::kIdSet), cot.take(), {tf}, {}));
  }

  if (n >= 2) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a != b) pairs.emplace_back(a, b);
      }
    }
    const auto [ia, ib] = pairs[f % pairs.size()];
    const ObjectTrack& A = gt.objects[ia];
    const ObjectTrack& B = gt.objects[ib];
    CotBuilder cot;
    const auto pa = cot.given(fmt::format("center of {}", describe(A.label, A.id)),
                              vec_json(A.boxes[f].center));
    const auto pb = cot.given(fmt::format("center of {}", describe(B.label, B.id)),
                              vec_json(B.boxes[f].center));
    const auto d = cot.add("offset from the first to the second", "sub",
                           json::array({ref(pb), ref(pa)}));
    const double yaw = ego.yaws[f];
    const auto right = cot.given(fmt::format("my right axis for yaw {:.3f} rad", yaw),
                                 json::array({std::sin(yaw), -std::cos(yaw), 0.0}));
    const auto fwd = cot.given(fmt::format("my forward axis for yaw {:.3f} rad", yaw),
                               json::array({std::cos(yaw), std::sin(yaw), 0.0}));
    const auto lat = cot.add("lateral offset", "dot", json::array({ref(d), ref(right)}));
    const auto lon = cot.add("longitudinal offset", "dot", json::array({ref(d), ref(fwd)}));
    const auto dist = cot.add("distance", "norm", json::array({ref(d)}));
    const auto label = cot.add(
        fmt::format("dominant axis outside a {} m dead-band, near below {} m", kDeadBand,
                    kNearDistance),
        "classify_direction", json::array({ref(lat), ref(lon), ref(dist)}));
    const std::string a_desc = describe(A.label, A.id);
    const std::string b_desc = describe(B.label, B.id);
    out.push_back(make_pair(
        gt, TaskKind::kRelativePosition,
        phrase(seed, TaskKind::kRelativePosition, anchor_key(f, {A.id, B.id}),
               {"From my viewpoint at t={0:.2f} s, where is {1} relative to {2}?",
                "At {0:.2f} s, as I see it, how is {1} positioned with respect to {2}?",
                "Seen from my camera at {0:.2f} s, where does {1} sit relative to {2}?"},
               fmt::make_format_args(tf, b_desc, a_desc)),
        answer_of(cot, label, AnswerKind::kLabel), cot.take(), {tf}, {A.id, B.id}));
  }

  if (n > 0) {
    const ObjectTrack& o = gt.objects[f % n];
    const std::string who = describe(o.label, o.id);
    CotBuilder cot;
    Answer answer;
    std::string detail;
    switch ((f + o.id) % 3) {
      case 0: {
        detail = "position";
        const auto p = cot.given(fmt::format("center of {}", who), vec_json(o.boxes[f].center));
        answer = answer_of(cot, p, AnswerKind::kVector, Measure::kPosition, "m");
        break;
      }
      case 1: {
        detail = "speed";
        const auto s = speed_steps(cot, gt, gt.positions_of(o.id), f, who).speed;
        answer = answer_of(cot, s, AnswerKind::kNumber, Measure::kSpeed, "m/s");
        break;
      }
      default: {
        detail = "box";
        const auto b = cot.given(fmt::format("3D box of {}", who), json(o.boxes[f]));
        answer = answer_of(cot, b, AnswerKind::kBox, Measure::kBox);
        break;
      }
    }
    out.push_back(make_pair(
        gt, TaskKind::kCurrentObjectProperty,
        phrase(seed, TaskKind::kCurrentObjectProperty, anchor_key(f, {o.id}),
               {"What is the {2} of {1} at t={0:.2f} s?",
                "Report the current {2} of {1} at {0:.2f} seconds.",
                "At {0:.2f} s, what {2} does {1} have?"},
               fmt::make_format_args(tf, who, detail)),
        std::move(answer), cot.take(), {tf}, {o.id}, detail));
  }

  {
    CotBuilder cot;
    const auto diff = speed_steps(cot, gt, ego.positions, f, "me");
    const auto vy = cot.add("northward component", "component", json::array({ref(diff.velocity), 1}));
    const auto vx = cot.add("eastward component", "component", json::array({ref(diff.velocity), 0}));
    const auto heading = cot.add("heading", "atan2", json::array({ref(vy), ref(vx)}));
    const auto packed =
        cot.add("speed and heading", "pack_velocity", json::array({ref(diff.speed), ref(heading)}));
    out.push_back(make_pair(
        gt, TaskKind::kAgentVelocity,
        phrase(seed, TaskKind::kAgentVelocity, anchor_key(f, {ego.id}),
               {"How fast am I moving at t={0:.2f} s, and in which direction?",
                "What is my speed and heading at {0:.2f} seconds?",
                "At {0:.2f} s, give my current speed and heading."},
               fmt::make_format_args(tf)),
        answer_of(cot, packed, AnswerKind::kVelocity, Measure::kSpeed, "m/s"), cot.take(), {tf},
        {ego.id}));
  }

  if (gt.agents.size() >= 2) {
    const AgentTrack& other = gt.agents[1 + f % (gt.agents.size() - 1)];
    const std::size_t lo = f == 0 ? 0 : f - 1;
    const std::size_t hi = f + 1 >= gt.times.size() ? gt.times.size() - 1 : f + 1;
    const std::string who = describe(other.label, other.id);
    CotBuilder cot;
    std::size_t rate = 0;
    if (lo == hi) {
      rate = cot.given("a single sample has zero range rate", 0.0);
    } else {
      std::array<std::size_t, 2> range{};
      for (int k = 0; k < 2; ++k) {
        const std::size_t i = k == 0 ? lo : hi;
        const auto me = cot.given(fmt::format("my position at t={:.2f} s", gt.times[i]),
                                  vec_json(ego.positions[i]));
        const auto them = cot.given(fmt::format("{} at t={:.2f} s", who, gt.times[i]),
                                    vec_json(other.positions[i]));
        const auto d = cot.add("offset", "sub", json::array({ref(them), ref(me)}));
        range[static_cast<std::size_t>(k)] =
            cot.add(fmt::format("range at t={:.2f} s", gt.times[i]), "norm", json::array({ref(d)}));
      }
      const auto dr = cot.add("range change", "sub", json::array({ref(range[1]), ref(range[0])}));
      const auto dt = cot.add("elapsed time", "sub", json::array({gt.times[hi], gt.times[lo]}));
      rate = cot.add("range rate", "div", json::array({ref(dr), ref(dt)}));
    }
    const auto label = cot.add(fmt::format("classify against +/-{} m/s", kRangeRateThreshold),
                               "classify_rate", json::array({ref(rate)}));
    out.push_back(make_pair(
        gt, TaskKind::kMultiAgentRelation,
        phrase(seed, TaskKind::kMultiAgentRelation, anchor_key(f, {other.id}),
               {"At t={0:.2f} s, is {1} approaching me, receding, or static?",
                "Is {1} getting closer to me or moving away at {0:.2f} s?",
                "How is the distance between me and {1} changing at {0:.2f} s?"},
               fmt::make_format_args(tf, who)),
        answer_of(cot, label, AnswerKind::kLabel), cot.take(), {tf}, {ego.id, other.id}));
  }
  return out;
}

std::vector<QAPair> gen_durative(const GroundTruth& gt, const WindowSpec& window,
                                 std::uint64_t seed, const QaOptions& options) {
  window.validate();
  const auto frames = window_frames(gt, window);
  if (frames.empty()) {
    throw Error(Errc::kEmpty,
                fmt::format("window [{}, {}] contains no samples", window.start, window.end));
  }
  const double t0 = gt.times[frames.front()];
  const double t1 = gt.times[frames.back()];
  const std::size_t key_frame = frames.front();
  json times = json::array();
  for (auto i : frames) times.push_back(gt.times[i]);

  const auto series = [&](std::uint32_t id) {
    json speeds = json::array();
    json yaw_rates = json::array();
    for (auto i : frames) {
      const Properties p = ground_truth_properties_at(gt, id, i);
      speeds.push_back(p.speed);
      yaw_rates.push_back(p.yaw_rate);
    }
    return std::pair{speeds, yaw_rates};
  };

  std::vector<QAPair> out;
  const auto ids = object_ids(gt);
  std::vector<json> object_speeds;
  for (auto id : ids) object_speeds.push_back(series(id).first);

  if (!gt.objects.empty()) {
    CotBuilder cot;
    const auto ts = cot.given("sample times in the window", times);
    json onsets = json::array();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::string who = describe(gt.objects[k].label, ids[k]);
      const auto s = cot.given(fmt::format("speeds of {}", who), object_speeds[k]);
      onsets.push_back(ref(cot.add(
          fmt::format("first time {} exceeds {} m/s for two samples", who, kMotionThreshold),
          "onset", json::array({ref(s), ref(ts)}))));
    }
    const auto list = cot.add("onset times", "list", onsets);
    const auto order = cot.add("objects ordered by onset", "sort_by", json::array({ids, ref(list)}));
    if (!cot.value(order).empty()) {
      out.push_back(make_pair(
          gt, TaskKind::kMotionSequence,
          phrase(seed, TaskKind::kMotionSequence, anchor_key(key_frame, {}),
                 {"Between {0:.2f} s and {1:.2f} s, in what order do objects start moving?",
                  "List the objects by when they begin to move, from {0:.2f} s to {1:.2f} s.",
                  "From {0:.2f} s to {1:.2f} s, which objects start moving first to last?"},
                 fmt::make_format_args(t0, t1)),
          answer_of(cot, order, AnswerKind::kIdList), cot.take(), {t0, t1}, {}));
    }
  }

  if (!gt.objects.empty()) {
    CotBuilder cot;
    json lengths = json::array();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto pos = gt.positions_of(ids[k]);
      json pts = json::array();
      for (auto i : frames) pts.push_back(vec_json(pos[i]));
      const std::string who = describe(gt.objects[k].label, ids[k]);
      const auto p = cot.given(fmt::format("positions of {}", who), pts);
      lengths.push_back(ref(cot.add(fmt::format("path length of {}", who), "path_length",
                                    json::array({ref(p)}))));
    }
    const auto list = cot.add("path lengths", "list", lengths);
    const auto best =
        cot.add("longest path, smallest id on ties", "argmax", json::array({ids, ref(list)}));
    double longest = 0.0;
    for (const auto& l : cot.value(list)) longest = std::max(longest, l.get<double>());
    if (longest > 0.0) {
      out.push_back(make_pair(
          gt, TaskKind::kMostActiveObject,
          phrase(seed, TaskKind::kMostActiveObject, anchor_key(key_frame, {}),
                 {"Which object travels the farthest between {0:.2f} s and {1:.2f} s?",
                  "From {0:.2f} s to {1:.2f} s, which object is the most active?",
                  "Which object covers the longest path from {0:.2f} s to {1:.2f} s?"},
                 fmt::make_format_args(t0, t1)),
          answer_of(cot, best, AnswerKind::kId), cot.take(), {t0, t1}, {}));
    }
  }

  if (!gt.objects.empty()) {
    CotBuilder cot;
    const auto ts = cot.given("sample times in the window", times);
    json flags = json::array();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::string who = describe(gt.objects[k].label, ids[k]);
      const auto s = cot.given(fmt::format("speeds of {}", who), object_speeds[k]);
      flags.push_back(ref(cot.add(
          fmt::format("{} moves, rests at least {:.1f} s, then moves again", who, options.dwell),
          "temporary_stop", json::array({ref(s), ref(ts), options.dwell}))));
    }
    const auto list = cot.add("stop flags", "list", flags);
    const auto sel = cot.add("temporarily static objects", "select", json::array({ids, ref(list)}));
    out.push_back(make_pair(
        gt, TaskKind::kTemporaryStaticObjects,
        phrase(seed, TaskKind::kTemporaryStaticObjects, anchor_key(key_frame, {}),
               {"Which objects stop for a while and then move again between {0:.2f} s and {1:.2f} s?",
                "From {0:.2f} s to {1:.2f} s, which objects pause temporarily before moving on?",
                "Name the objects that are temporarily static between {0:.2f} s and {1:.2f} s."},
               fmt::make_format_args(t0, t1)),
        answer_of(cot, sel, AnswerKind::kIdSet), cot.take(), {t0, t1}, {}));
  }

  const AgentTrack& ego = gt.ego();
  {
    CotBuilder cot;
    const auto p0 = cot.given(fmt::format("my position at t={:.2f} s", t0),
                              vec_json(ego.positions[frames.front()]));
    const auto p1 = cot.given(fmt::format("my position at t={:.2f} s", t1),
                              vec_json(ego.positions[frames.back()]));
    const auto d = cot.add("net displacement", "sub", json::array({ref(p1), ref(p0)}));
    out.push_back(make_pair(
        gt, TaskKind::kAgentTrajectory,
        phrase(seed, TaskKind::kAgentTrajectory, anchor_key(key_frame, {ego.id}),
               {"What is my net displacement from {0:.2f} s to {1:.2f} s?",
                "How far and in which direction did I move between {0:.2f} s and {1:.2f} s?",
                "Give my overall displacement vector over {0:.2f}-{1:.2f} s."},
               fmt::make_format_args(t0, t1)),
        answer_of(cot, d, AnswerKind::kVector, Measure::kPosition, "m"), cot.take(), {t0, t1},
        {ego.id}));
  }

  {
    CotBuilder cot;
    const auto [speeds, rates] = series(ego.id);
    const auto s = cot.given("my speeds", speeds);
    const auto r = cot.given("my yaw rates", rates);
    const auto timeline = cot.add(
        fmt::format("turning above {} rad/s, walking above {} m/s, else stationary", kTurnRate,
                    kMotionThreshold),
        "status_timeline", json::array({ref(s), ref(r)}));
    out.push_back(make_pair(
        gt, TaskKind::kAgentMotionStatus,
        phrase(seed, TaskKind::kAgentMotionStatus, anchor_key(key_frame, {ego.id}),
               {"How does my motion status change from {0:.2f} s to {1:.2f} s?",
                "Describe the sequence of my motion states between {0:.2f} s and {1:.2f} s.",
                "List my motion phases over {0:.2f}-{1:.2f} s in order."},
               fmt::make_format_args(t0, t1)),
        answer_of(cot, timeline, AnswerKind::kLabelList), cot.take(), {t0, t1}, {ego.id}));
  }

  for (const auto& g : gt.grabs) {
    if (g.start < window.start - 1e-9 || g.start > window.end + 1e-9) continue;
    const AgentTrack* agent = gt.find_agent(g.agent_id);
    const std::string who =
        g.agent_id == gt.ego_id ? std::string("I") : describe(agent->label, agent->id);
    CotBuilder cot;
    const auto rec = cot.given(
        fmt::format("grab by agent {} starting at t={:.2f} s", g.agent_id, g.start),
        json{{"agent", g.agent_id}, {"object", g.object_id}, {"start", g.start}, {"end", g.end}});
    const auto obj = cot.add("grabbed object", "field", json::array({ref(rec), "object"}));
    out.push_back(make_pair(
        gt, TaskKind::kAgentGrabObject,
        phrase(seed, TaskKind::kAgentGrabObject, anchor_key(key_frame, {g.agent_id, g.object_id}),
               {"Which object does {2} pick up between {0:.2f} s and {1:.2f} s?",
                "Between {0:.2f} s and {1:.2f} s, what does {2} grab?",
                "Identify the object grabbed by {2} from {0:.2f} s to {1:.2f} s."},
               fmt::make_format_args(t0, t1, who)),
        answer_of(cot, obj, AnswerKind::kId), cot.take(), {t0, t1, g.start}, {g.agent_id}));
  }
  return out;
}

QAPair gen_caption(const GroundTruth& gt, double t, std::uint32_t id, std::uint64_t seed) {
  const std::size_t f = gt.frame_index(t);
  const double tf = gt.times[f];
  const ObjectTrack* o = gt.find_object(id);
  if (!o) throw Error(Errc::kLookup, fmt::format("caption: no object {}", id));
  const std::string who = describe(o->label, o->id);
  CotBuilder cot;
  const auto color = cot.given(
      fmt::format("color ({}, {}, {}) is closest to", o->color[0], o->color[1], o->color[2]),
      color_name(o->color));
  const auto size = cot.given(fmt::format("largest extent {:.2f} m", 2.0 * o->half_extents.maxCoeff()),
                              size_class(o->half_extents));
  const auto label = cot.given("label", o->label);

  const ObjectTrack* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& other : gt.objects) {
    if (other.id == id) continue;
    const double d = (other.boxes[f].center - o->boxes[f].center).norm();
    if (d < best) {
      best = d;
      nearest = &other;
    }
  }
  json neighbor = nullptr;
  json distance = nullptr;
  if (nearest) {
    const auto pa = cot.given(fmt::format("center of {}", who), vec_json(o->boxes[f].center));
    const auto pb = cot.given(fmt::format("center of the nearest object, {}",
                                          describe(nearest->label, nearest->id)),
                              vec_json(nearest->boxes[f].center));
    const auto d = cot.add("offset", "sub", json::array({ref(pb), ref(pa)}));
    distance = ref(cot.add("distance to the nearest object", "norm", json::array({ref(d)})));
    neighbor = ref(cot.given("nearest object label", nearest->label));
  }
  const auto speed = speed_steps(cot, gt, gt.positions_of(id), f, who).speed;
  const bool moving = cot.value(speed).get<double>() > kMotionThreshold;
  const auto motion = cot.given(fmt::format("speed {} m/s threshold", kMotionThreshold),
                                moving ? "moving" : "static");
  const auto text =
      cot.add("caption", "caption",
              json::array({ref(color), ref(size), ref(label), neighbor, distance, ref(motion)}));
  const BBox3D& b = o->boxes[f];
  const std::string box_text =
      fmt::format("center ({:.2f}, {:.2f}, {:.2f}), size ({:.2f}, {:.2f}, {:.2f}), yaw {:.2f}",
                  b.center.x(), b.center.y(), b.center.z(), 2 * b.half_extents.x(),
                  2 * b.half_extents.y(), 2 * b.half_extents.z(), b.yaw);
  return make_pair(gt, TaskKind::kObjectCaptioning,
                   phrase(seed, TaskKind::kObjectCaptioning, anchor_key(f, {id}),
                          {"Describe the object in the box with {1} at t={0:.2f} s.",
                           "At {0:.2f} s, caption the object inside the box with {1}.",
                           "What is the object in the 3D box with {1} at {0:.2f} s like?"},
                          fmt::make_format_args(tf, box_text)),
                   answer_of(cot, text, AnswerKind::kText), cot.take(), {tf}, {id});
}

DatasetSummary dynamics_summary(const GroundTruth& gt) {
  DatasetSummary s;
  s.frames = gt.frame_count();
  std::vector<std::vector<double>> speeds;
  for (const auto& o : gt.objects) {
    const auto pos = gt.positions_of(o.id);
    std::vector<double> sp(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) sp[i] = central_difference(pos, gt.times, i).norm();
    speeds.push_back(std::move(sp));
  }
  for (std::size_t i = 0; i < s.frames; ++i) {
    const bool dynamic = std::any_of(speeds.begin(), speeds.end(),
                                     [&](const auto& sp) { return sp[i] > kMotionThreshold; });
    if (dynamic) ++s.dynamic_frames;
  }
  s.dynamic_fraction =
      s.frames ? static_cast<double>(s.dynamic_frames) / static_cast<double>(s.frames) : 0.0;
  return s;
}

std::vector<QAPair> generate_dataset(const GroundTruth& gt, const std::vector<WindowSpec>& windows,
                                     std::uint64_t seed, const QaOptions& options,
                                     const RewriteHook& rewrite) {
  if (gt.frame_count() == 0) throw Error(Errc::kEmpty, "ground truth has no frames");
  const auto stride = static_cast<std::size_t>(
      std::max(1.0, std::round(options.momentary_interval * gt.fps)));
  std::vector<std::size_t> momentary;
  for (std::size_t f = 0; f < gt.frame_count(); f += stride) momentary.push_back(f);

  // One job per sampled frame and per window; results land in fixed slots.
  std::vector<std::vector<QAPair>> slots(momentary.size() + windows.size());
  parallel_for(slots.size(), [&](std::size_t k) {
    if (k < momentary.size()) {
      slots[k] = gen_momentary(gt, gt.times[momentary[k]], seed, options);
      return;
    }
    const WindowSpec& w = windows[k - momentary.size()];
    auto qa = gen_durative(gt, w, seed, options);
    const auto frames = window_frames(gt, w);
    for (const auto& o : gt.objects) {
      qa.push_back(gen_caption(gt, gt.times[frames.front()], o.id, seed));
    }
    slots[k] = std::move(qa);
  });

  std::vector<QAPair> all;
  for (auto& s : slots) {
    for (auto& q : s) all.push_back(std::move(q));
  }
  std::stable_sort(all.begin(), all.end(), [](const QAPair& a, const QAPair& b) {
    const auto key = [](const QAPair& q) {
      return std::tie(q.task, q.anchors.timestamps, q.anchors.instance_ids);
    };
    return key(a) < key(b);
  });
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i].id = fmt::format("{}-{:05d}", gt.sequence_id, i);
    if (rewrite) all[i].question = rewrite(all[i]);
  }
  return all;
}

DatasetSummary summarize(const GroundTruth& gt, const std::vector<QAPair>& qa) {
  DatasetSummary s = dynamics_summary(gt);
  for (TaskKind t : kAllTasks) s.counts[t] = 0;
  for (const auto& q : qa) ++s.counts[q.task];
  s.total = qa.size();
  return s;
}

DatasetSummary emit_dataset(const GroundTruth& gt, const std::vector<WindowSpec>& windows,
                            std::uint64_t seed, const std::filesystem::path& qa_path,
                            const std::filesystem::path& answers_path, const QaOptions& options,
                            const RewriteHook& rewrite) {
  const auto qa = generate_dataset(gt, windows, seed, options, rewrite);
  save_qa(qa, qa_path);
  std::string answers;
  for (const auto& q : qa) {
    answers += json{{"id", q.id}, {"answer", q.answer}}.dump();
    answers += '\n';
  }
  write_text(answers_path, answers);
  return summarize(gt, qa);
}

}  // namespace d4d
