#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "tbiformer/tensor.hpp"

namespace tbif {

inline constexpr std::size_t kNumParts = 5;

enum class BodyPart : int { LeftArm = 0, RightArm = 1, LeftLeg = 2, RightLeg = 3, Torso = 4 };

// Joint naming and the joint -> body part assignment.
struct Skeleton {
  std::vector<std::string> joint_names;
  std::vector<int> part_map;
  int root_joint = 0;

  std::size_t num_joints() const { return joint_names.size(); }

  // 15 joints: pelvis (root), neck, head and per side shoulder, elbow,
  // wrist, hip, knee, ankle.
  static Skeleton default15() {
    Skeleton s;
    s.joint_names = {"pelvis",     "neck",      "head",       "l_shoulder", "l_elbow",
                     "l_wrist",    "r_shoulder", "r_elbow",   "r_wrist",    "l_hip",
                     "l_knee",     "l_ankle",   "r_hip",      "r_knee",     "r_ankle"};
    s.part_map = {4, 4, 4, 0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3};
    s.root_joint = 0;
    return s;
  }

  void validate() const {
    if (joint_names.empty()) throw ValidationError("skeleton: joint_names is empty");
    if (part_map.size() != joint_names.size())
      throw ValidationError("skeleton: part_map has " + std::to_string(part_map.size()) + " entries for " +
                            std::to_string(joint_names.size()) + " joints");
    std::array<int, kNumParts> count{};
    for (int p : part_map) {
      if (p < 0 || p >= static_cast<int>(kNumParts))
        throw ValidationError("skeleton: part_map entry " + std::to_string(p) + " outside 0..4");
      ++count[static_cast<std::size_t>(p)];
    }
    for (std::size_t b = 0; b < kNumParts; ++b)
      if (count[b] == 0) throw ConfigError("skeleton: body part " + std::to_string(b) + " has no joints");
    if (root_joint < 0 || root_joint >= static_cast<int>(joint_names.size()))
      throw ValidationError("skeleton: root_joint " + std::to_string(root_joint) + " out of range");
  }

  friend bool operator==(const Skeleton&, const Skeleton&) = default;
};

enum class Unit { Meters, Millimeters };

inline std::string unit_name(Unit u) { return u == Unit::Meters ? "m" : "mm"; }

inline Unit parse_unit(const std::string& s) {
  if (s == "m") return Unit::Meters;
  if (s == "mm") return Unit::Millimeters;
  throw ValidationError("unit: unknown unit '" + s + "' (expected \"m\" or \"mm\")");
}

// P persons, each a (T+1) x J x 3 array of absolute joint positions.
struct Scene {
  double fps = 25.0;
  Unit unit = Unit::Meters;
  Skeleton skeleton = Skeleton::default15();
  std::vector<Tensor> persons;

  std::size_t num_persons() const { return persons.size(); }
  std::size_t num_frames() const { return persons.empty() ? 0 : persons.front().dim(0); }
  std::size_t num_joints() const { return skeleton.num_joints(); }

  void validate() const {
    if (!(fps > 0.0) || !std::isfinite(fps)) throw ValidationError("fps: must be positive, got " + std::to_string(fps));
    skeleton.validate();
    if (persons.empty()) throw ValidationError("persons: scene has no persons");
    const std::size_t frames = persons.front().rank() == 3 ? persons.front().dim(0) : 0;
    for (std::size_t p = 0; p < persons.size(); ++p) {
      const Tensor& x = persons[p];
      if (x.rank() != 3 || x.dim(2) != 3)
        throw ValidationError("persons[" + std::to_string(p) + "]: expected frames x joints x 3, got " +
                              shape_str(x.shape()));
      if (x.dim(1) != skeleton.num_joints())
        throw ValidationError("persons[" + std::to_string(p) + "]: " + std::to_string(x.dim(1)) +
                              " joints, skeleton has " + std::to_string(skeleton.num_joints()));
      if (x.dim(0) != frames)
        throw ValidationError("persons[" + std::to_string(p) + "]: " + std::to_string(x.dim(0)) +
                              " frames, persons[0] has " + std::to_string(frames));
      if (!x.all_finite()) throw ValidationError("persons[" + std::to_string(p) + "]: non-finite coordinate");
    }
    if (frames < 2) throw ValidationError("persons: at least 2 frames required");
  }

  // Copy expressed in meters.
  Scene in_meters() const {
    Scene s = *this;
    if (unit == Unit::Millimeters) {
      for (Tensor& x : s.persons)
        for (double& v : x.values()) v /= 1000.0;
      s.unit = Unit::Meters;
    }
    return s;
  }

  // Frames [first, first + count) of every person.
  Scene slice_frames(std::size_t first, std::size_t count) const {
    if (first + count > num_frames() || count == 0)
      throw ValidationError("scene: frame range [" + std::to_string(first) + ", " + std::to_string(first + count) +
                            ") outside " + std::to_string(num_frames()) + " frames");
    Scene s = *this;
    const std::size_t stride = num_joints() * 3;
    for (Tensor& x : s.persons) {
      Tensor y({count, num_joints(), 3});
      std::copy(x.data() + first * stride, x.data() + (first + count) * stride, y.data());
      x = std::move(y);
    }
    return s;
  }

  friend bool operator==(const Scene&, const Scene&) = default;
};

// Per-frame pose differences y_i = x_{i+1} - x_i together with the last
// observed pose, from which the poses can be re-integrated.
struct DisplacementScene {
  double fps = 25.0;
  Skeleton skeleton;
  std::vector<Tensor> persons;  // P x [T x J x 3]
  Tensor first_pose;            // P x J x 3, x_1
  Tensor last_pose;             // P x J x 3, x_{T+1}

  std::size_t num_persons() const { return persons.size(); }
  std::size_t num_steps() const { return persons.empty() ? 0 : persons.front().dim(0); }
};

inline DisplacementScene to_displacements(const Scene& scene) {
  if (scene.num_frames() < 2) throw ValidationError("to_displacements: need at least 2 frames");
  const std::size_t P = scene.num_persons(), F = scene.num_frames(), J = scene.num_joints();
  DisplacementScene out;
  out.fps = scene.fps;
  out.skeleton = scene.skeleton;
  out.first_pose = Tensor({P, J, 3});
  out.last_pose = Tensor({P, J, 3});
  const std::size_t stride = J * 3;
  for (std::size_t p = 0; p < P; ++p) {
    const Tensor& x = scene.persons[p];
    Tensor y({F - 1, J, 3});
    for (std::size_t i = 0; i + 1 < F; ++i)
      for (std::size_t k = 0; k < stride; ++k) y[i * stride + k] = x[(i + 1) * stride + k] - x[i * stride + k];
    std::copy(x.data(), x.data() + stride, out.first_pose.data() + p * stride);
    std::copy(x.data() + (F - 1) * stride, x.data() + F * stride, out.last_pose.data() + p * stride);
    out.persons.push_back(std::move(y));
  }
  return out;
}

// Cumulative sum from a start pose: poses[p][k] = start[p] + sum_{i<=k} Y[p][i].
// start is P x J x 3, Y is P x N x J x 3; the result excludes the start pose.
inline Tensor integrate_displacements(const Tensor& start, const Tensor& Y) {
  if (start.rank() != 3 || Y.rank() != 4 || start.dim(0) != Y.dim(0) || start.dim(1) != Y.dim(2) ||
      start.dim(2) != Y.dim(3))
    throw DimensionError("integrate_displacements: start " + shape_str(start.shape()) + " vs displacements " +
                         shape_str(Y.shape()));
  const std::size_t P = Y.dim(0), N = Y.dim(1), stride = Y.dim(2) * Y.dim(3);
  Tensor out(Y.shape());
  for (std::size_t p = 0; p < P; ++p) {
    const double* prev = start.data() + p * stride;
    for (std::size_t k = 0; k < N; ++k) {
      const std::size_t base = (p * N + k) * stride;
      for (std::size_t c = 0; c < stride; ++c) out[base + c] = prev[c] + Y[base + c];
      prev = out.data() + base;
    }
  }
  return out;
}

// Rebuilds the full pose sequence of every person from a DisplacementScene.
inline Scene integrate_scene(const DisplacementScene& d, Unit unit = Unit::Meters) {
  const std::size_t P = d.num_persons(), T = d.num_steps(), J = d.skeleton.num_joints();
  Tensor Y({P, T, J, 3});
  for (std::size_t p = 0; p < P; ++p)
    std::copy(d.persons[p].data(), d.persons[p].data() + d.persons[p].size(), Y.data() + p * T * J * 3);
  Tensor poses = integrate_displacements(d.first_pose, Y);
  Scene s;
  s.fps = d.fps;
  s.unit = unit;
  s.skeleton = d.skeleton;
  for (std::size_t p = 0; p < P; ++p) {
    Tensor x({T + 1, J, 3});
    std::copy(d.first_pose.data() + p * J * 3, d.first_pose.data() + (p + 1) * J * 3, x.data());
    std::copy(poses.data() + p * T * J * 3, poses.data() + (p + 1) * T * J * 3, x.data() + J * 3);
    s.persons.push_back(std::move(x));
  }
  return s;
}

// Root-joint trajectory of one person: frames x 3.
inline Tensor root_trajectory(const Tensor& poses, int root_joint) {
  const std::size_t F = poses.dim(0), J = poses.dim(1);
  Tensor out({F, 3});
  for (std::size_t t = 0; t < F; ++t)
    for (std::size_t c = 0; c < 3; ++c) out(t, c) = poses[(t * J + static_cast<std::size_t>(root_joint)) * 3 + c];
  return out;
}

}  // namespace tbif
