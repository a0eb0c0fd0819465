#pragma once

#include <nlohmann/json.hpp>

#include "d4d/scene.hpp"

// JSON mappings for the shared scene types. Field names follow the on-disk
// sequence layout.
namespace d4d {

void to_json(nlohmann::json& j, const Intrinsics& v);
void from_json(const nlohmann::json& j, Intrinsics& v);
void to_json(nlohmann::json& j, const CameraPose& v);
void from_json(const nlohmann::json& j, CameraPose& v);
void to_json(nlohmann::json& j, const BBox3D& v);
void from_json(const nlohmann::json& j, BBox3D& v);

nlohmann::json vec3_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);

// Parses a single JSON line, rethrowing parse failures as Errc::kFormat
// tagged with "<source>:<line>".
nlohmann::json parse_json_line(const std::string& text, const std::string& source,
                               std::size_t line);
nlohmann::json parse_json_file(const std::string& path);

}  // namespace d4d
