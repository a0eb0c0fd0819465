#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "d4d/binary_io.hpp"
#include "d4d/error.hpp"
#include "d4d/json_types.hpp"
#include "d4d/simulator.hpp"

namespace d4d {

using nlohmann::json;

namespace {

json rgb_json(const Rgb& c) { return json::array({c[0], c[1], c[2]}); }

Rgb rgb_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::kFormat, "color must be [r, g, b]");
  return {j[0].get<std::uint8_t>(), j[1].get<std::uint8_t>(), j[2].get<std::uint8_t>()};
}

json trajectory_json(const TrajectorySpec& traj) {
  json out = json::array();
  for (const auto& w : traj.waypoints) {
    out.push_back({{"t", w.t}, {"position", vec3_json(w.position)}, {"yaw", w.yaw}});
  }
  return out;
}

TrajectorySpec trajectory_from_json(const json& j) {
  TrajectorySpec traj;
  for (const auto& w : j) {
    traj.waypoints.push_back(
        {w.at("t").get<double>(), vec3_from_json(w.at("position")), w.value("yaw", 0.0)});
  }
  return traj;
}

json agent_json(const AgentSpec& a) {
  json grabs = json::array();
  for (const auto& g : a.grabs) {
    grabs.push_back({{"object", g.object_id}, {"start", g.start}, {"end", g.end}});
  }
  json j = {{"id", a.id},
            {"label", a.label},
            {"pitch", a.pitch},
            {"trajectory", trajectory_json(a.trajectory)},
            {"grabs", grabs}};
  if (a.color) j["color"] = rgb_json(*a.color);
  return j;
}

AgentSpec agent_from_json(const json& j) {
  AgentSpec a;
  j.at("id").get_to(a.id);
  a.label = j.value("label", std::string("person"));
  a.pitch = j.value("pitch", a.pitch);
  a.trajectory = trajectory_from_json(j.at("trajectory"));
  for (const auto& g : j.value("grabs", json::array())) {
    a.grabs.push_back(
        {g.at("object").get<std::uint32_t>(), g.at("start").get<double>(), g.at("end").get<double>()});
  }
  if (j.contains("color")) a.color = rgb_from_json(j.at("color"));
  return a;
}

json room_json(const RoomBounds& r) {
  return {{"min", vec3_json(r.min)}, {"max", vec3_json(r.max)}};
}

RoomBounds room_from_json(const json& j) {
  return {vec3_from_json(j.at("min")), vec3_from_json(j.at("max"))};
}

}  // namespace

void save_sim_config(const SimConfig& cfg, const std::filesystem::path& path) {
  json objects = json::array();
  for (const auto& o : cfg.objects) {
    json intervals = json::array();
    for (const auto& iv : o.static_intervals) intervals.push_back({iv.start, iv.end});
    json jo = {{"id", o.id},
               {"label", o.label},
               {"half_extents", vec3_json(o.half_extents)},
               {"trajectory", trajectory_json(o.trajectory)},
               {"static_intervals", intervals}};
    if (o.color) jo["color"] = rgb_json(*o.color);
    objects.push_back(std::move(jo));
  }
  json extra = json::array();
  for (const auto& a : cfg.extra_agents) extra.push_back(agent_json(a));
  const json j = {{"duration", cfg.duration},   {"fps", cfg.fps},
                  {"seed", cfg.seed},           {"intrinsics", cfg.intrinsics},
                  {"room", room_json(cfg.room)}, {"objects", objects},
                  {"ego", agent_json(cfg.ego)}, {"extra_agents", extra}};
  write_text(path, j.dump(2) + "\n");
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  const json j = parse_json_file(path.string());
  SimConfig cfg;
  try {
    j.at("duration").get_to(cfg.duration);
    cfg.fps = j.value("fps", cfg.fps);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("intrinsics")) cfg.intrinsics = j.at("intrinsics").get<Intrinsics>();
    if (j.contains("room")) cfg.room = room_from_json(j.at("room"));
    for (const auto& jo : j.value("objects", json::array())) {
      ObjectSpec o;
      jo.at("id").get_to(o.id);
      o.label = jo.value("label", std::string("object"));
      o.half_extents = vec3_from_json(jo.at("half_extents"));
      if (jo.contains("color")) o.color = rgb_from_json(jo.at("color"));
      o.trajectory = trajectory_from_json(jo.at("trajectory"));
      for (const auto& iv : jo.value("static_intervals", json::array())) {
        o.static_intervals.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
      }
      cfg.objects.push_back(std::move(o));
    }
    cfg.ego = agent_from_json(j.at("ego"));
    for (const auto& ja : j.value("extra_agents", json::array())) {
      cfg.extra_agents.push_back(agent_from_json(ja));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfig, fmt::format("{}: {}", path.string(), e.what()));
  }
  cfg.validate();
  return cfg;
}

// ground_truth.jsonl: header, object/agent/grab registry lines, then one
// "frame" line per sampled timestamp.
void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  std::string out;
  auto line = [&](const json& j) { out += j.dump() + "\n"; };
  line({{"type", "header"},
        {"sequence_id", gt.sequence_id},
        {"fps", gt.fps},
        {"duration", gt.duration},
        {"frame_count", gt.times.size()},
        {"intrinsics", gt.intrinsics},
        {"room", room_json(gt.room)},
        {"ego_id", gt.ego_id}});
  for (const auto& o : gt.objects) {
    line({{"type", "object"},
          {"id", o.id},
          {"label", o.label},
          {"half_extents", vec3_json(o.half_extents)},
          {"color", rgb_json(o.color)}});
  }
  for (const auto& a : gt.agents) {
    line({{"type", "agent"}, {"id", a.id}, {"label", a.label}, {"ego", a.ego},
          {"color", rgb_json(a.color)}});
  }
  for (const auto& g : gt.grabs) {
    line({{"type", "grab"}, {"agent", g.agent_id}, {"object", g.object_id}, {"start", g.start},
          {"end", g.end}});
  }
  for (std::size_t i = 0; i < gt.times.size(); ++i) {
    json objects = json::array();
    for (const auto& o : gt.objects) {
      json jb = o.boxes[i];
      jb["id"] = o.id;
      objects.push_back(std::move(jb));
    }
    json agents = json::array();
    for (const auto& a : gt.agents) {
      agents.push_back({{"id", a.id},
                        {"position", vec3_json(a.positions[i])},
                        {"yaw", a.yaws[i]},
                        {"camera", a.cameras[i]}});
    }
    line({{"type", "frame"}, {"i", i}, {"t", gt.times[i]}, {"objects", objects},
          {"agents", agents}});
  }
  write_text(path, out);
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  GroundTruth gt;
  bool have_header = false;
  std::size_t declared = 0;
  std::size_t line_no = 0;
  const std::string src = path.string();
  for (std::string text; std::getline(in, text);) {
    ++line_no;
    if (text.empty()) continue;
    const json j = parse_json_line(text, src, line_no);
    try {
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        have_header = true;
        gt.sequence_id = j.value("sequence_id", std::string("seq"));
        j.at("fps").get_to(gt.fps);
        j.at("duration").get_to(gt.duration);
        j.at("frame_count").get_to(declared);
        gt.intrinsics = j.at("intrinsics").get<Intrinsics>();
        gt.room = room_from_json(j.at("room"));
        j.at("ego_id").get_to(gt.ego_id);
      } else if (type == "object") {
        ObjectTrack o;
        j.at("id").get_to(o.id);
        j.at("label").get_to(o.label);
        o.half_extents = vec3_from_json(j.at("half_extents"));
        o.color = rgb_from_json(j.at("color"));
        gt.objects.push_back(std::move(o));
      } else if (type == "agent") {
        AgentTrack a;
        j.at("id").get_to(a.id);
        j.at("label").get_to(a.label);
        j.at("ego").get_to(a.ego);
        a.color = rgb_from_json(j.at("color"));
        gt.agents.push_back(std::move(a));
      } else if (type == "grab") {
        gt.grabs.push_back({j.at("agent").get<std::uint32_t>(), j.at("object").get<std::uint32_t>(),
                            j.at("start").get<double>(), j.at("end").get<double>()});
      } else if (type == "frame") {
        if (j.at("i").get<std::size_t>() != gt.times.size()) {
          throw Error(Errc::kFormat, fmt::format("{}:{}: frames out of order", src, line_no));
        }
        gt.times.push_back(j.at("t").get<double>());
        const auto& objs = j.at("objects");
        const auto& agents = j.at("agents");
        if (objs.size() != gt.objects.size() || agents.size() != gt.agents.size()) {
          throw Error(Errc::kCountMismatch,
                      fmt::format("{}:{}: frame lists disagree with the registry", src, line_no));
        }
        for (std::size_t k = 0; k < objs.size(); ++k) {
          if (objs[k].at("id").get<std::uint32_t>() != gt.objects[k].id) {
            throw Error(Errc::kFormat, fmt::format("{}:{}: object order mismatch", src, line_no));
          }
          gt.objects[k].boxes.push_back(objs[k].get<BBox3D>());
        }
        for (std::size_t k = 0; k < agents.size(); ++k) {
          if (agents[k].at("id").get<std::uint32_t>() != gt.agents[k].id) {
            throw Error(Errc::kFormat, fmt::format("{}:{}: agent order mismatch", src, line_no));
          }
          gt.agents[k].positions.push_back(vec3_from_json(agents[k].at("position")));
          gt.agents[k].yaws.push_back(agents[k].at("yaw").get<double>());
          gt.agents[k].cameras.push_back(agents[k].at("camera").get<CameraPose>());
        }
      } else {
        throw Error(Errc::kFormat, fmt::format("{}:{}: unknown record type '{}'", src, line_no, type));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kFormat, fmt::format("{}:{}: {}", src, line_no, e.what()));
    }
  }
  if (!have_header) throw Error(Errc::kFormat, fmt::format("{}: missing header line", src));
  if (gt.times.size() != declared) {
    throw Error(Errc::kCountMismatch, fmt::format("{}: header declares {} frames, found {}", src,
                                                  declared, gt.times.size()));
  }
  gt.ego();  // must exist
  return gt;
}

}  // namespace d4d
