#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"
#include "tbiformer/motion.hpp"

namespace tbif {

using json = nlohmann::json;

namespace io_detail {

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// Parses JSON text, reporting failures as "<source>:<line>:<column>: msg".
inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

inline const json& field(const json& obj, const char* name, const std::string& where = "") {
  if (!obj.is_object()) throw ValidationError(where + "expected a JSON object");
  auto it = obj.find(name);
  if (it == obj.end()) throw ValidationError(where + "missing field \"" + name + "\"");
  return *it;
}

inline double number(const json& v, const std::string& what) {
  if (!v.is_number()) throw ValidationError(what + ": expected a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(what + ": non-finite number");
  return d;
}

inline int integer(const json& v, const std::string& what) {
  if (!v.is_number_integer()) throw ValidationError(what + ": expected an integer");
  return v.get<int>();
}

}  // namespace io_detail

inline json scene_to_json(const Scene& scene, std::optional<std::size_t> predicted_from_frame = std::nullopt) {
  json j;
  j["fps"] = scene.fps;
  j["unit"] = unit_name(scene.unit);
  j["joint_names"] = scene.skeleton.joint_names;
  j["part_map"] = scene.skeleton.part_map;
  j["root_joint"] = scene.skeleton.root_joint;
  json persons = json::array();
  for (const Tensor& x : scene.persons) {
    json frames = json::array();
    for (std::size_t t = 0; t < x.dim(0); ++t) {
      json joints = json::array();
      for (std::size_t k = 0; k < x.dim(1); ++k) joints.push_back({x(t, k, 0), x(t, k, 1), x(t, k, 2)});
      frames.push_back(std::move(joints));
    }
    persons.push_back(std::move(frames));
  }
  j["persons"] = std::move(persons);
  if (predicted_from_frame) j["predicted_from_frame"] = *predicted_from_frame;
  return j;
}

inline Scene scene_from_json(const json& j, std::optional<std::size_t>* predicted_from_frame = nullptr) {
  using namespace io_detail;
  Scene s;
  s.fps = number(field(j, "fps"), "fps");
  const json& unit = field(j, "unit");
  if (!unit.is_string()) throw ValidationError("unit: expected a string");
  s.unit = parse_unit(unit.get<std::string>());

  const json& names = field(j, "joint_names");
  if (!names.is_array()) throw ValidationError("joint_names: expected an array");
  s.skeleton.joint_names.clear();
  for (const json& n : names) {
    if (!n.is_string()) throw ValidationError("joint_names: entries must be strings");
    s.skeleton.joint_names.push_back(n.get<std::string>());
  }
  const json& parts = field(j, "part_map");
  if (!parts.is_array()) throw ValidationError("part_map: expected an array");
  s.skeleton.part_map.clear();
  for (const json& p : parts) s.skeleton.part_map.push_back(integer(p, "part_map"));
  s.skeleton.root_joint = integer(field(j, "root_joint"), "root_joint");

  const json& persons = field(j, "persons");
  if (!persons.is_array()) throw ValidationError("persons: expected an array");
  for (std::size_t p = 0; p < persons.size(); ++p) {
    const std::string where = "persons[" + std::to_string(p) + "]";
    const json& frames = persons[p];
    if (!frames.is_array() || frames.empty()) throw ValidationError(where + ": expected a non-empty frame array");
    const json& first = frames.front();
    if (!first.is_array() || first.empty()) throw ValidationError(where + "[0]: expected a non-empty joint array");
    const std::size_t F = frames.size(), J = first.size();
    Tensor x({F, J, 3});
    for (std::size_t t = 0; t < F; ++t) {
      const json& joints = frames[t];
      if (!joints.is_array() || joints.size() != J)
        throw ValidationError(where + "[" + std::to_string(t) + "]: expected " + std::to_string(J) + " joints");
      for (std::size_t k = 0; k < J; ++k) {
        const json& xyz = joints[k];
        const std::string at = where + "[" + std::to_string(t) + "][" + std::to_string(k) + "]";
        if (!xyz.is_array() || xyz.size() != 3) throw ValidationError(at + ": expected [x, y, z]");
        for (std::size_t c = 0; c < 3; ++c) x(t, k, c) = number(xyz[c], at);
      }
    }
    s.persons.push_back(std::move(x));
  }
  if (predicted_from_frame) {
    auto it = j.find("predicted_from_frame");
    *predicted_from_frame = it == j.end() ? std::nullopt : std::optional<std::size_t>(integer(*it, "predicted_from_frame"));
  }
  s.validate();
  return s;
}

inline void save_scene(const std::filesystem::path& path, const Scene& scene,
                       std::optional<std::size_t> predicted_from_frame = std::nullopt) {
  scene.validate();
  io_detail::write_text(path, scene_to_json(scene, predicted_from_frame).dump() + "\n");
}

inline Scene load_scene(const std::filesystem::path& path, std::optional<std::size_t>* predicted_from_frame = nullptr) {
  const std::string text = io_detail::read_text(path);
  json j = io_detail::parse_json(text, path.string());
  try {
    return scene_from_json(j, predicted_from_frame);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace tbif
