#include "d4d/json_types.hpp"

#include <fmt/format.h>

#include "d4d/binary_io.hpp"
#include "d4d/error.hpp"

namespace d4d {

void to_json(nlohmann::json& j, const Intrinsics& v) {
  j = {{"fx", v.fx}, {"fy", v.fy}, {"cx", v.cx},
       {"cy", v.cy}, {"width", v.width}, {"height", v.height}};
}

void from_json(const nlohmann::json& j, Intrinsics& v) {
  j.at("fx").get_to(v.fx);
  j.at("fy").get_to(v.fy);
  j.at("cx").get_to(v.cx);
  j.at("cy").get_to(v.cy);
  j.at("width").get_to(v.width);
  j.at("height").get_to(v.height);
}

void to_json(nlohmann::json& j, const CameraPose& v) {
  j = {{"t", v.t},   {"x", v.x},   {"y", v.y},   {"z", v.z},
       {"qx", v.qx}, {"qy", v.qy}, {"qz", v.qz}, {"qw", v.qw}};
}

void from_json(const nlohmann::json& j, CameraPose& v) {
  j.at("t").get_to(v.t);
  j.at("x").get_to(v.x);
  j.at("y").get_to(v.y);
  j.at("z").get_to(v.z);
  j.at("qx").get_to(v.qx);
  j.at("qy").get_to(v.qy);
  j.at("qz").get_to(v.qz);
  j.at("qw").get_to(v.qw);
}

nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::kFormat, "expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void to_json(nlohmann::json& j, const BBox3D& v) {
  j = {{"center", vec3_json(v.center)}, {"half_extents", vec3_json(v.half_extents)},
       {"yaw", v.yaw}};
}

void from_json(const nlohmann::json& j, BBox3D& v) {
  v.center = vec3_from_json(j.at("center"));
  v.half_extents = vec3_from_json(j.at("half_extents"));
  j.at("yaw").get_to(v.yaw);
}

nlohmann::json parse_json_line(const std::string& text, const std::string& source,
                               std::size_t line) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kFormat, fmt::format("{}:{}: {}", source, line, e.what()));
  }
}

nlohmann::json parse_json_file(const std::string& path) {
  return parse_json_line(read_text(path), path, 1);
}

}  // namespace d4d
