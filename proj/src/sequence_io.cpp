#include "d4d/sequence_io.hpp"

#include <cctype>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "d4d/binary_io.hpp"
#include "d4d/error.hpp"
#include "d4d/json_types.hpp"

namespace d4d {

namespace fs = std::filesystem;
using nlohmann::json;

std::string frame_file(const char* prefix, std::uint32_t index, const char* ext) {
  return fmt::format("{}_{:06d}.{}", prefix, index, ext);
}

// ---- PPM ---------------------------------------------------------------------

void save_ppm(const fs::path& path, std::uint32_t width, std::uint32_t height,
              const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != std::size_t{width} * height * 3) {
    throw Error(Errc::kCountMismatch, fmt::format("{}: rgb buffer size mismatch", path.string()));
  }
  BinaryWriter w;
  w.magic(fmt::format("P6\n{} {}\n255\n", width, height));
  w.bytes(rgb);
  w.save(path);
}

std::vector<std::uint8_t> load_ppm(const fs::path& path, std::uint32_t& width,
                                   std::uint32_t& height) {
  const auto data = read_file(path);
  std::size_t pos = 0;
  auto fail = [&](Errc code, const std::string& why) {
    return Error(code, fmt::format("{}: {}", path.string(), why));
  };
  if (data.size() < 2 || data[0] != 'P' || data[1] != '6') {
    throw fail(Errc::kBadMagic, "magic mismatch (expected binary PPM 'P6')");
  }
  pos = 2;
  auto next_int = [&]() -> std::uint32_t {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(data[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::uint64_t v = 0;
    std::size_t digits = 0;
    while (pos < data.size() && std::isdigit(data[pos])) {
      v = v * 10 + (data[pos++] - '0');
      if (++digits > 9) throw fail(Errc::kFormat, "header value too large");
    }
    if (digits == 0) throw fail(Errc::kTruncated, "truncated PPM header");
    return static_cast<std::uint32_t>(v);
  };
  width = next_int();
  height = next_int();
  const std::uint32_t maxval = next_int();
  if (maxval != 255) throw fail(Errc::kFormat, fmt::format("unsupported maxval {}", maxval));
  if (pos >= data.size() || !std::isspace(data[pos])) throw fail(Errc::kTruncated, "truncated PPM header");
  ++pos;
  const std::size_t need = std::size_t{width} * height * 3;
  if (data.size() - pos < need) throw fail(Errc::kTruncated, "truncated payload");
  if (data.size() - pos > need) throw fail(Errc::kCountMismatch, "unexpected trailing bytes");
  return {data.begin() + static_cast<std::ptrdiff_t>(pos), data.end()};
}

// ---- depth / mask --------------------------------------------------------------

void save_depth(const fs::path& path, const Frame& frame) {
  BinaryWriter w;
  w.magic("D4DD");
  w.u32(frame.width);
  w.u32(frame.height);
  w.f32s(frame.depth);
  w.save(path);
}

void save_mask(const fs::path& path, const Frame& frame) {
  BinaryWriter w;
  w.magic("D4DM");
  w.u32(frame.width);
  w.u32(frame.height);
  w.bytes({reinterpret_cast<const std::uint8_t*>(frame.mask.data()),
           frame.mask.size() * sizeof(std::uint32_t)});
  w.save(path);
}

std::vector<float> load_depth(const fs::path& path, std::uint32_t& width, std::uint32_t& height) {
  auto r = BinaryReader::open(path);
  r.expect_magic("D4DD");
  width = r.u32();
  height = r.u32();
  std::vector<float> depth(std::size_t{width} * height);
  r.f32s(depth);
  r.expect_end();
  return depth;
}

std::vector<std::uint32_t> load_mask(const fs::path& path, std::uint32_t& width,
                                     std::uint32_t& height) {
  auto r = BinaryReader::open(path);
  r.expect_magic("D4DM");
  width = r.u32();
  height = r.u32();
  std::vector<std::uint32_t> mask(std::size_t{width} * height);
  r.bytes({reinterpret_cast<std::uint8_t*>(mask.data()), mask.size() * sizeof(std::uint32_t)});
  r.expect_end();
  return mask;
}

// ---- features ------------------------------------------------------------------

void save_features(const fs::path& path, const FeatureMatrix& features) {
  if (features.values.size() != std::size_t{features.count} * features.dim) {
    throw Error(Errc::kCountMismatch, fmt::format("{}: feature payload size mismatch",
                                                  path.string()));
  }
  BinaryWriter w;
  w.magic("D4DF");
  w.u32(features.count);
  w.u32(features.dim);
  w.f32s(features.values);
  w.save(path);
}

FeatureMatrix load_features(const fs::path& path) {
  auto r = BinaryReader::open(path);
  r.expect_magic("D4DF");
  FeatureMatrix f;
  f.count = r.u32();
  f.dim = r.u32();
  r.require(std::size_t{f.count} * f.dim * sizeof(float));
  f.values.resize(std::size_t{f.count} * f.dim);
  r.f32s(f.values);
  r.expect_end();
  return f;
}

// ---- sequence ------------------------------------------------------------------

namespace {

std::string jsonl_line(const json& j) { return j.dump() + "\n"; }

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

void save_sequence(const SceneSequence& seq, const fs::path& dir) {
  seq.validate();
  fs::create_directories(dir);

  json instances = json::array();
  for (const auto& [id, inst] : seq.instances) {
    instances.push_back({{"id", id}, {"label", inst.label}});
  }
  const json manifest = {{"fps", seq.fps},
                         {"frame_count", seq.frames.size()},
                         {"intrinsics", seq.intrinsics},
                         {"instances", instances}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  std::string poses;
  for (const auto& p : seq.poses) poses += jsonl_line(p);
  write_text(dir / "poses.jsonl", poses);

  std::string boxes;
  for (const auto& [id, inst] : seq.instances) {
    for (const auto& tb : inst.boxes) {
      json j = tb.box;
      j["t"] = tb.t;
      j["id"] = id;
      boxes += jsonl_line(j);
    }
  }
  write_text(dir / "boxes.jsonl", boxes);

  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const Frame& f = seq.frames[i];
    if (f.index != i) {
      throw Error(Errc::kFormat, fmt::format("save_sequence: frame at position {} has index {}",
                                             i, f.index));
    }
    const auto idx = static_cast<std::uint32_t>(i);
    save_ppm(dir / frame_file("rgb", idx, "ppm"), f.width, f.height, f.rgb);
    save_depth(dir / frame_file("depth", idx, "d4d"), f);
    save_mask(dir / frame_file("mask", idx, "d4d"), f);
  }
}

std::vector<CameraPose> load_poses(const fs::path& poses_jsonl) {
  std::vector<CameraPose> poses;
  const auto lines = read_lines(poses_jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const json j = parse_json_line(lines[i], poses_jsonl.string(), i + 1);
    try {
      poses.push_back(j.get<CameraPose>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kFormat, fmt::format("{}:{}: {}", poses_jsonl.string(), i + 1, e.what()));
    }
  }
  return poses;
}

SceneSequence load_sequence(const fs::path& dir) {
  SceneSequence seq;
  const json manifest = parse_json_file((dir / "manifest.json").string());
  std::size_t frame_count = 0;
  try {
    manifest.at("fps").get_to(seq.fps);
    manifest.at("frame_count").get_to(frame_count);
    seq.intrinsics = manifest.at("intrinsics").get<Intrinsics>();
    for (const auto& inst : manifest.at("instances")) {
      Instance entry;
      inst.at("id").get_to(entry.id);
      inst.at("label").get_to(entry.label);
      if (entry.id == 0 || !seq.instances.emplace(entry.id, entry).second) {
        throw Error(Errc::kFormat, fmt::format("{}: invalid or duplicate instance id {}",
                                               (dir / "manifest.json").string(), entry.id));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kFormat, fmt::format("{}: {}", (dir / "manifest.json").string(), e.what()));
  }

  seq.poses = load_poses(dir / "poses.jsonl");
  if (seq.poses.size() != frame_count) {
    throw Error(Errc::kCountMismatch,
                fmt::format("{}: {} poses but manifest declares {} frames",
                            (dir / "poses.jsonl").string(), seq.poses.size(), frame_count));
  }

  const auto box_lines = read_lines(dir / "boxes.jsonl");
  for (std::size_t i = 0; i < box_lines.size(); ++i) {
    const std::string src = (dir / "boxes.jsonl").string();
    const json j = parse_json_line(box_lines[i], src, i + 1);
    try {
      const auto id = j.at("id").get<std::uint32_t>();
      auto it = seq.instances.find(id);
      if (it == seq.instances.end()) {
        throw Error(Errc::kLookup, fmt::format("{}:{}: unknown instance id {}", src, i + 1, id));
      }
      it->second.boxes.push_back(TimedBox{j.at("t").get<double>(), j.get<BBox3D>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kFormat, fmt::format("{}:{}: {}", src, i + 1, e.what()));
    }
  }

  const auto& intr = seq.intrinsics;
  for (std::size_t i = 0; i < frame_count; ++i) {
    const auto idx = static_cast<std::uint32_t>(i);
    Frame f;
    f.index = idx;
    f.t = seq.poses[i].t;
    std::uint32_t w = 0, h = 0;
    const fs::path rgb_path = dir / frame_file("rgb", idx, "ppm");
    f.rgb = load_ppm(rgb_path, w, h);
    auto check_dims = [&](const fs::path& p, std::uint32_t fw, std::uint32_t fh) {
      if (fw != intr.width || fh != intr.height) {
        throw Error(Errc::kCountMismatch,
                    fmt::format("{}: size {}x{} does not match intrinsics {}x{}", p.string(), fw,
                                fh, intr.width, intr.height));
      }
    };
    check_dims(rgb_path, w, h);
    const fs::path depth_path = dir / frame_file("depth", idx, "d4d");
    f.depth = load_depth(depth_path, w, h);
    check_dims(depth_path, w, h);
    const fs::path mask_path = dir / frame_file("mask", idx, "d4d");
    f.mask = load_mask(mask_path, w, h);
    check_dims(mask_path, w, h);
    f.width = w;
    f.height = h;
    seq.frames.push_back(std::move(f));
  }
  seq.validate();
  return seq;
}

}  // namespace d4d
