#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "d4d/scene.hpp"

namespace d4d {

// Sequence directory layout:
//   manifest.json, poses.jsonl, boxes.jsonl,
//   rgb_%06d.ppm, depth_%06d.d4d ("D4DD"), mask_%06d.d4d ("D4DM").
void save_sequence(const SceneSequence& seq, const std::filesystem::path& dir);
SceneSequence load_sequence(const std::filesystem::path& dir);

std::vector<CameraPose> load_poses(const std::filesystem::path& poses_jsonl);

void save_ppm(const std::filesystem::path& path, std::uint32_t width, std::uint32_t height,
              const std::vector<std::uint8_t>& rgb);
std::vector<std::uint8_t> load_ppm(const std::filesystem::path& path, std::uint32_t& width,
                                   std::uint32_t& height);

void save_depth(const std::filesystem::path& path, const Frame& frame);
void save_mask(const std::filesystem::path& path, const Frame& frame);
std::vector<float> load_depth(const std::filesystem::path& path, std::uint32_t& width,
                              std::uint32_t& height);
std::vector<std::uint32_t> load_mask(const std::filesystem::path& path, std::uint32_t& width,
                                     std::uint32_t& height);

// "D4DF": u32 count, u32 dim, count*dim f32 row-major.
struct FeatureMatrix {
  std::uint32_t count = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;

  const float* row(std::size_t i) const { return values.data() + i * dim; }
  bool operator==(const FeatureMatrix&) const = default;
};

void save_features(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix load_features(const std::filesystem::path& path);

std::string frame_file(const char* prefix, std::uint32_t index, const char* ext);

}  // namespace d4d
