#include "d4d/qa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "d4d/binary_io.hpp"
#include "d4d/error.hpp"
#include "d4d/json_types.hpp"

namespace d4d {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 12> kTaskNames{
    "object-captioning",      "dynamic-scene",     "relative-position",
    "current-object-property", "agent-velocity",   "multi-agent-relation",
    "temporary-static-objects", "most-active-object", "motion-sequence",
    "agent-trajectory",       "agent-motion-status", "agent-grab-object"};

constexpr std::array<std::string_view, 10> kKindNames{
    "number", "vector", "label", "label_list", "id", "id_list", "id_set", "text", "velocity", "box"};

constexpr std::array<std::string_view, 6> kMeasureNames{"none",     "speed",    "direction",
                                                        "distance", "position", "box"};

}  // namespace

std::string_view task_name(TaskKind task) { return kTaskNames[static_cast<std::size_t>(task)]; }

TaskKind parse_task(std::string_view name) {
  for (std::size_t i = 0; i < kTaskNames.size(); ++i) {
    if (kTaskNames[i] == name) return static_cast<TaskKind>(i);
  }
  throw Error(Errc::kFormat, fmt::format("unknown task '{}'", name));
}

std::string_view answer_kind_name(AnswerKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::string_view measure_name(Measure measure) {
  return kMeasureNames[static_cast<std::size_t>(measure)];
}

namespace {

AnswerKind parse_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<AnswerKind>(i);
  }
  throw Error(Errc::kFormat, fmt::format("unknown answer type '{}'", name));
}

Measure parse_measure(std::string_view name) {
  for (std::size_t i = 0; i < kMeasureNames.size(); ++i) {
    if (kMeasureNames[i] == name) return static_cast<Measure>(i);
  }
  throw Error(Errc::kFormat, fmt::format("unknown measure '{}'", name));
}

std::array<double, 3> to_array3(const json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(Errc::kFormat, fmt::format("{}: expected a 3-vector", what));
  }
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw Error(Errc::kFormat, fmt::format("{}: non-numeric entry", what));
    out[i] = j[i].get<double>();
  }
  return out;
}

std::vector<std::uint32_t> to_ids(const json& j) {
  if (!j.is_array()) throw Error(Errc::kFormat, "expected an id list");
  std::vector<std::uint32_t> out;
  for (const auto& e : j) {
    if (!e.is_number_integer() || e.get<std::int64_t>() < 0) {
      throw Error(Errc::kFormat, "ids must be non-negative integers");
    }
    out.push_back(e.get<std::uint32_t>());
  }
  return out;
}

}  // namespace

json Answer::payload() const {
  switch (kind) {
    case AnswerKind::kNumber:
      return number;
    case AnswerKind::kVector:
      return json::array({vec[0], vec[1], vec[2]});
    case AnswerKind::kLabel:
    case AnswerKind::kText:
      return text;
    case AnswerKind::kLabelList:
      return labels;
    case AnswerKind::kId:
      return ids.empty() ? json() : json(ids.front());
    case AnswerKind::kIdList:
    case AnswerKind::kIdSet:
      return ids;
    case AnswerKind::kVelocity:
      return json{{"speed", speed}, {"heading", heading}};
    case AnswerKind::kBox:
      return box;
  }
  return json();
}

Answer answer_from_payload(AnswerKind kind, Measure measure, std::string units, const json& v) {
  Answer a;
  a.kind = kind;
  a.measure = measure;
  a.units = std::move(units);
  switch (kind) {
    case AnswerKind::kNumber:
      if (!v.is_number()) throw Error(Errc::kFormat, "number answer needs a numeric value");
      a.number = v.get<double>();
      break;
    case AnswerKind::kVector:
      a.vec = to_array3(v, "vector answer");
      break;
    case AnswerKind::kLabel:
    case AnswerKind::kText:
      if (!v.is_string()) throw Error(Errc::kFormat, "label/text answer needs a string");
      a.text = v.get<std::string>();
      break;
    case AnswerKind::kLabelList:
      if (!v.is_array()) throw Error(Errc::kFormat, "label list answer needs an array");
      for (const auto& e : v) {
        if (!e.is_string()) throw Error(Errc::kFormat, "label list entries must be strings");
        a.labels.push_back(e.get<std::string>());
      }
      break;
    case AnswerKind::kId:
      a.ids = to_ids(json::array({v}));
      break;
    case AnswerKind::kIdList:
      a.ids = to_ids(v);
      break;
    case AnswerKind::kIdSet:
      a.ids = to_ids(v);
      std::sort(a.ids.begin(), a.ids.end());
      a.ids.erase(std::unique(a.ids.begin(), a.ids.end()), a.ids.end());
      break;
    case AnswerKind::kVelocity:
      if (!v.is_object() || !v.contains("speed") || !v.contains("heading")) {
        throw Error(Errc::kFormat, "velocity answer needs speed and heading");
      }
      a.speed = v.at("speed").get<double>();
      a.heading = v.at("heading").get<double>();
      break;
    case AnswerKind::kBox:
      a.box = v.get<BBox3D>();
      break;
  }
  return a;
}

void to_json(json& j, const Answer& a) {
  j = json{{"type", answer_kind_name(a.kind)}};
  if (a.measure != Measure::kNone) j["measure"] = measure_name(a.measure);
  if (!a.units.empty()) j["units"] = a.units;
  j["value"] = a.payload();
}

void from_json(const json& j, Answer& a) {
  if (!j.is_object() || !j.contains("type") || !j.contains("value")) {
    throw Error(Errc::kFormat, "answer needs 'type' and 'value'");
  }
  const Measure m = j.contains("measure") ? parse_measure(j.at("measure").get<std::string>())
                                          : Measure::kNone;
  a = answer_from_payload(parse_kind(j.at("type").get<std::string>()), m,
                          j.value("units", std::string()), j.at("value"));
}

std::string answer_text(const Answer& a) {
  const auto join_ids = [](const std::vector<std::uint32_t>& ids) {
    if (ids.empty()) return std::string("none");
    return fmt::format("{}", fmt::join(ids, ", "));
  };
  switch (a.kind) {
    case AnswerKind::kNumber:
      return a.units.empty() ? fmt::format("{:.2f}", a.number)
                             : fmt::format("{:.2f} {}", a.number, a.units);
    case AnswerKind::kVector:
      return fmt::format("({:.2f}, {:.2f}, {:.2f}) {}", a.vec[0], a.vec[1], a.vec[2], a.units);
    case AnswerKind::kLabel:
    case AnswerKind::kText:
      return a.text;
    case AnswerKind::kLabelList:
      return a.labels.empty() ? std::string("none") : fmt::format("{}", fmt::join(a.labels, ", "));
    case AnswerKind::kId:
      return a.ids.empty() ? std::string("none") : fmt::format("id {}", a.ids.front());
    case AnswerKind::kIdList:
    case AnswerKind::kIdSet:
      return "ids " + join_ids(a.ids);
    case AnswerKind::kVelocity:
      return fmt::format("{:.2f} m/s heading {:.2f} rad", a.speed, a.heading);
    case AnswerKind::kBox: {
      const auto& b = a.box;
      return fmt::format("center ({:.2f}, {:.2f}, {:.2f}) size ({:.2f}, {:.2f}, {:.2f}) yaw {:.2f}",
                         b.center.x(), b.center.y(), b.center.z(), 2 * b.half_extents.x(),
                         2 * b.half_extents.y(), 2 * b.half_extents.z(), b.yaw);
    }
  }
  return {};
}

// ---- chain of thought ---------------------------------------------------------------------

void to_json(json& j, const CotStep& s) {
  j = json{{"text", s.text}, {"op", s.op}, {"args", s.args}, {"value", s.value}};
}

void from_json(const json& j, CotStep& s) {
  s.text = j.at("text").get<std::string>();
  s.op = j.at("op").get<std::string>();
  s.args = j.at("args");
  s.value = j.at("value");
}

std::string relative_position_label(const Vec3& a, const Vec3& b, double ego_yaw) {
  const Vec3 d = b - a;
  const double lateral = d.x() * std::sin(ego_yaw) - d.y() * std::cos(ego_yaw);
  const double longitudinal = d.x() * std::cos(ego_yaw) + d.y() * std::sin(ego_yaw);
  return apply_cot_op("classify_direction", json::array({lateral, longitudinal, d.norm()}))
      .get<std::string>();
}

std::string range_rate_label(double rate) {
  if (rate < -kRangeRateThreshold) return "approaching";
  if (rate > kRangeRateThreshold) return "receding";
  return "static";
}

std::string motion_status(double speed, double yaw_rate) {
  if (std::abs(yaw_rate) > kTurnRate) return "turning";
  if (speed > kMotionThreshold) return "walking";
  return "stationary";
}

namespace {

double num(const json& j, std::string_view op) {
  if (!j.is_number()) throw Error(Errc::kFormat, fmt::format("cot {}: expected a number", op));
  return j.get<double>();
}

std::vector<double> nums(const json& j, std::string_view op) {
  if (!j.is_array()) throw Error(Errc::kFormat, fmt::format("cot {}: expected an array", op));
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(num(e, op));
  return out;
}

void need_args(const json& args, std::size_t n, std::string_view op) {
  if (!args.is_array() || args.size() != n) {
    throw Error(Errc::kFormat, fmt::format("cot {}: expected {} arguments", op, n));
  }
}

// Moving, then still for at least `dwell` seconds, then moving again.
bool has_temporary_stop(const std::vector<double>& speeds, const std::vector<double>& times,
                        double dwell) {
  bool seen_motion = false;
  std::optional<std::size_t> run_start;
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    const bool moving = speeds[i] > kMotionThreshold;
    if (moving) {
      if (seen_motion && run_start && times[i - 1] - times[*run_start] >= dwell - 1e-9) {
        return true;
      }
      seen_motion = true;
      run_start.reset();
    } else if (seen_motion && !run_start) {
      run_start = i;
    }
  }
  return false;
}

}  // namespace

json apply_cot_op(std::string_view op, const json& args) {
  if (op == "given") {
    need_args(args, 1, op);
    return args[0];
  }
  if (op == "list") return args;
  if (op == "field") {
    need_args(args, 2, op);
    if (!args[0].is_object() || !args[1].is_string() || !args[0].contains(args[1].get<std::string>())) {
      throw Error(Errc::kFormat, "cot field: missing key");
    }
    return args[0].at(args[1].get<std::string>());
  }
  if (op == "sub") {
    need_args(args, 2, op);
    if (args[0].is_array()) {
      const auto a = nums(args[0], op);
      const auto b = nums(args[1], op);
      if (a.size() != b.size()) throw Error(Errc::kFormat, "cot sub: length mismatch");
      json out = json::array();
      for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] - b[i]);
      return out;
    }
    return num(args[0], op) - num(args[1], op);
  }
  if (op == "norm") {
    need_args(args, 1, op);
    double s = 0.0;
    for (double x : nums(args[0], op)) s += x * x;
    return std::sqrt(s);
  }
  if (op == "div") {
    need_args(args, 2, op);
    const double d = num(args[1], op);
    if (d == 0.0) throw Error(Errc::kFormat, "cot div: division by zero");
    return num(args[0], op) / d;
  }
  if (op == "vdiv") {
    need_args(args, 2, op);
    const double d = num(args[1], op);
    if (d == 0.0) throw Error(Errc::kFormat, "cot vdiv: division by zero");
    json out = json::array();
    for (double x : nums(args[0], op)) out.push_back(x / d);
    return out;
  }
  if (op == "component") {
    need_args(args, 2, op);
    const auto v = nums(args[0], op);
    const auto k = static_cast<std::size_t>(num(args[1], op));
    if (k >= v.size()) throw Error(Errc::kFormat, "cot component: index out of range");
    return v[k];
  }
  if (op == "atan2") {
    need_args(args, 2, op);
    return std::atan2(num(args[0], op), num(args[1], op));
  }
  if (op == "dot") {
    need_args(args, 2, op);
    const auto a = nums(args[0], op);
    const auto b = nums(args[1], op);
    if (a.size() != b.size()) throw Error(Errc::kFormat, "cot dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  if (op == "sum") {
    need_args(args, 1, op);
    double s = 0.0;
    for (double x : nums(args[0], op)) s += x;
    return s;
  }
  if (op == "path_length") {
    need_args(args, 1, op);
    if (!args[0].is_array()) throw Error(Errc::kFormat, "cot path_length: expected points");
    double s = 0.0;
    for (std::size_t i = 1; i < args[0].size(); ++i) {
      const auto a = nums(args[0][i - 1], op);
      const auto b = nums(args[0][i], op);
      double sq = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) sq += (b[k] - a[k]) * (b[k] - a[k]);
      s += std::sqrt(sq);
    }
    return s;
  }
  if (op == "threshold") {  // [values, thr] -> value > thr
    need_args(args, 2, op);
    const double thr = num(args[1], op);
    json out = json::array();
    for (double x : nums(args[0], op)) out.push_back(x > thr);
    return out;
  }
  if (op == "select") {  // [ids, flags] -> ascending ids whose flag is set
    need_args(args, 2, op);
    const auto ids = to_ids(args[0]);
    if (!args[1].is_array() || args[1].size() != ids.size()) {
      throw Error(Errc::kFormat, "cot select: flags must match ids");
    }
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (args[1][i].get<bool>()) out.push_back(ids[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
  }
  if (op == "argmax") {  // first maximum wins, so ascending ids break ties low
    need_args(args, 2, op);
    const auto ids = to_ids(args[0]);
    const auto v = nums(args[1], op);
    if (ids.empty() || ids.size() != v.size()) {
      throw Error(Errc::kFormat, "cot argmax: ids and values must be non-empty and aligned");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] > v[best]) best = i;
    }
    return ids[best];
  }
  if (op == "sort_by") {  // [ids, keys]; null keys dropped, stable on ties
    need_args(args, 2, op);
    const auto ids = to_ids(args[0]);
    if (!args[1].is_array() || args[1].size() != ids.size()) {
      throw Error(Errc::kFormat, "cot sort_by: keys must match ids");
    }
    std::vector<std::pair<double, std::uint32_t>> keyed;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!args[1][i].is_null()) keyed.emplace_back(num(args[1][i], op), ids[i]);
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::uint32_t> out;
    for (const auto& [k, id] : keyed) out.push_back(id);
    return out;
  }
  if (op == "onset") {  // [speeds, times] -> first time motion holds for two samples
    need_args(args, 2, op);
    const auto s = nums(args[0], op);
    const auto t = nums(args[1], op);
    for (std::size_t i = 0; i + 1 < s.size() && i + 1 < t.size(); ++i) {
      if (s[i] > kMotionThreshold && s[i + 1] > kMotionThreshold) return t[i];
    }
    return json();
  }
  if (op == "temporary_stop") {  // [speeds, times, dwell]
    need_args(args, 3, op);
    return has_temporary_stop(nums(args[0], op), nums(args[1], op), num(args[2], op));
  }
  if (op == "classify_direction") {  // [lateral, longitudinal, distance]
    need_args(args, 3, op);
    const double lat = num(args[0], op);
    const double lon = num(args[1], op);
    const double dist = num(args[2], op);
    if (std::max(std::abs(lat), std::abs(lon)) < kDeadBand) return "near";
    std::string side;
    if (std::abs(lat) >= std::abs(lon)) {
      side = lat > 0 ? "right" : "left";
    } else {
      side = lon < 0 ? "front" : "behind";
    }
    return side + (dist < kNearDistance ? "-near" : "-far");
  }
  if (op == "classify_rate") {
    need_args(args, 1, op);
    return range_rate_label(num(args[0], op));
  }
  if (op == "status_timeline") {  // [speeds, yaw_rates] -> run-length labels
    need_args(args, 2, op);
    const auto s = nums(args[0], op);
    const auto w = nums(args[1], op);
    if (s.size() != w.size()) throw Error(Errc::kFormat, "cot status_timeline: length mismatch");
    json out = json::array();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string label = motion_status(s[i], w[i]);
      if (out.empty() || out.back() != label) out.push_back(label);
    }
    return out;
  }
  if (op == "pack_velocity") {
    need_args(args, 2, op);
    return json{{"speed", num(args[0], op)}, {"heading", num(args[1], op)}};
  }
  if (op == "caption") {  // [color, size, label, neighbor label | null, distance | null, motion]
    need_args(args, 6, op);
    std::string text = fmt::format("a {} {} {}", args[0].get<std::string>(),
                                   args[1].get<std::string>(), args[2].get<std::string>());
    if (args[3].is_null()) {
      text += " with no other objects around";
    } else {
      text += fmt::format(", {:.2f} m from the {}", num(args[4], op), args[3].get<std::string>());
    }
    return text + ", " + args[5].get<std::string>() + ".";
  }
  throw Error(Errc::kFormat, fmt::format("unknown cot op '{}'", op));
}

std::string verify_cot(const std::vector<CotStep>& steps, const Answer& answer) {
  if (steps.empty()) return "empty chain of thought";
  for (std::size_t k = 0; k < steps.size(); ++k) {
    json resolved = json::array();
    for (const auto& arg : steps[k].args) {
      if (arg.is_string() && arg.get<std::string>().starts_with('$')) {
        const std::string ref = arg.get<std::string>().substr(1);
        std::size_t idx = 0;
        try {
          idx = std::stoul(ref);
        } catch (const std::exception&) {
          return fmt::format("step {}: bad reference '{}'", k, arg.get<std::string>());
        }
        if (idx >= k) return fmt::format("step {}: forward reference to step {}", k, idx);
        resolved.push_back(steps[idx].value);
      } else {
        resolved.push_back(arg);
      }
    }
    json value;
    try {
      value = apply_cot_op(steps[k].op, resolved);
    } catch (const Error& e) {
      return fmt::format("step {}: {}", k, e.what());
    }
    if (value != steps[k].value) {
      return fmt::format("step {} ({}): recomputed {} but recorded {}", k, steps[k].op,
                         value.dump(), steps[k].value.dump());
    }
  }
  if (steps.back().value != answer.payload()) {
    return fmt::format("final value {} differs from answer {}", steps.back().value.dump(),
                       answer.payload().dump());
  }
  return {};
}

// ---- QA I/O ---------------------------------------------------------------------------------------

void to_json(json& j, const QAPair& q) {
  json anchors{{"sequence_id", q.anchors.sequence_id},
               {"timestamps", q.anchors.timestamps},
               {"instance_ids", q.anchors.instance_ids}};
  if (!q.anchors.detail.empty()) anchors["detail"] = q.anchors.detail;
  j = json{{"id", q.id},         {"task", task_name(q.task)}, {"question", q.question},
           {"answer", q.answer}, {"cot", q.cot},              {"anchors", anchors}};
}

void from_json(const json& j, QAPair& q) {
  q.id = j.at("id").get<std::string>();
  q.task = parse_task(j.at("task").get<std::string>());
  q.question = j.at("question").get<std::string>();
  q.answer = j.at("answer").get<Answer>();
  q.cot = j.at("cot").get<std::vector<CotStep>>();
  const json& a = j.at("anchors");
  q.anchors.sequence_id = a.at("sequence_id").get<std::string>();
  q.anchors.timestamps = a.at("timestamps").get<std::vector<double>>();
  q.anchors.instance_ids = a.at("instance_ids").get<std::vector<std::uint32_t>>();
  q.anchors.detail = a.value("detail", std::string());
}

std::vector<QAPair> load_qa(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, fmt::format("cannot open {}", path.string()));
  std::vector<QAPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_json_line(line, path.string(), lineno);
    try {
      out.push_back(j.get<QAPair>());
    } catch (const json::exception& e) {
      throw Error(Errc::kFormat, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

void save_qa(const std::vector<QAPair>& qa, const std::filesystem::path& path) {
  std::string text;
  for (const auto& q : qa) {
    text += json(q).dump();
    text += '\n';
  }
  write_text(path, text);
}

}  // namespace d4d
