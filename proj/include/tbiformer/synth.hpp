#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tbiformer/motion.hpp"

namespace tbif {

enum class Behavior { Static, Walk, Follow, Approach, Circle, Mixed };

inline std::string behavior_name(Behavior b) {
  switch (b) {
    case Behavior::Static: return "static";
    case Behavior::Walk: return "walk";
    case Behavior::Follow: return "follow";
    case Behavior::Approach: return "approach";
    case Behavior::Circle: return "circle";
    case Behavior::Mixed: return "mixed";
  }
  return "?";
}

inline Behavior parse_behavior(const std::string& s) {
  for (Behavior b : {Behavior::Static, Behavior::Walk, Behavior::Follow, Behavior::Approach, Behavior::Circle,
                     Behavior::Mixed})
    if (behavior_name(b) == s) return b;
  throw ConfigError("behavior: unknown behavior '" + s + "'");
}

struct GeneratorSpec {
  std::size_t persons = 3;
  std::size_t frames = 76;
  Behavior behavior = Behavior::Mixed;
  double fps = 25.0;

  void validate() const {
    if (persons == 0) throw ConfigError("persons: must be >= 1");
    if (frames < 16) throw ConfigError("frames: must be >= 16, got " + std::to_string(frames));
    if (!(fps > 0.0)) throw ConfigError("fps: must be positive");
    const bool pair = behavior == Behavior::Follow || behavior == Behavior::Approach || behavior == Behavior::Circle;
    if (pair && persons < 2) throw ConfigError("persons: behavior '" + behavior_name(behavior) + "' needs >= 2 persons");
  }
};

namespace synth_detail {

using Vec2 = std::array<double, 2>;

struct Track {
  std::vector<Vec2> pos;
  double heading0 = 0.0;
};

// Constant speed with a constant turn rate, starting at `start`.
inline Track walker(Vec2 start, double heading, double speed, double turn, std::size_t frames, double dt) {
  Track tr;
  tr.heading0 = heading;
  Vec2 p = start;
  for (std::size_t t = 0; t < frames; ++t) {
    tr.pos.push_back(p);
    const double th = heading + turn * static_cast<double>(t) * dt;
    p[0] += speed * dt * std::cos(th);
    p[1] += speed * dt * std::sin(th);
  }
  return tr;
}

// Ground-plane heading per frame from central differences; holds the
// previous heading while stationary.
inline std::vector<double> headings(const Track& tr) {
  const std::size_t F = tr.pos.size();
  std::vector<double> h(F, tr.heading0);
  double last = tr.heading0;
  for (std::size_t t = 0; t < F; ++t) {
    const std::size_t a = t == 0 ? 0 : t - 1, b = std::min(F - 1, t + 1);
    const double dx = tr.pos[b][0] - tr.pos[a][0], dy = tr.pos[b][1] - tr.pos[a][1];
    if (std::hypot(dx, dy) > 1e-6) last = std::atan2(dy, dx);
    h[t] = last;
  }
  return h;
}

struct BodyStyle {
  double scale = 1.0;
  double phase = 0.0;
  double arm_gain = 1.0;
};

// Articulates the default 15-joint skeleton along a root track. Limb swing is
// a sinusoid of the gait phase, which advances with distance travelled.
inline Tensor animate(const Track& tr, const BodyStyle& st, double fps) {
  const std::size_t F = tr.pos.size();
  const std::vector<double> head = headings(tr);
  Tensor x({F, 15, 3});
  const double stride_len = 1.4;
  double travelled = 0.0;
  for (std::size_t t = 0; t < F; ++t) {
    if (t > 0) travelled += std::hypot(tr.pos[t][0] - tr.pos[t - 1][0], tr.pos[t][1] - tr.pos[t - 1][1]);
    const std::size_t a = t == 0 ? 0 : t - 1, b = std::min(F - 1, t + 1);
    const double span = static_cast<double>(b - a) / fps;
    const double speed =
        span > 0 ? std::hypot(tr.pos[b][0] - tr.pos[a][0], tr.pos[b][1] - tr.pos[a][1]) / span : 0.0;
    const double amp = std::min(1.0, speed / 1.2);
    const double phi = st.phase + 2.0 * std::numbers::pi * travelled / stride_len;
    const double th = head[t];
    const std::array<double, 3> f{std::cos(th), std::sin(th), 0.0};
    const std::array<double, 3> s{-std::sin(th), std::cos(th), 0.0};
    const double k = st.scale;

    auto set = [&](std::size_t j, std::array<double, 3> v) {
      for (std::size_t c = 0; c < 3; ++c) x(t, j, c) = v[c];
    };
    auto offset = [](std::array<double, 3> base, double fa, const std::array<double, 3>& fv, double sa,
                     const std::array<double, 3>& sv, double za) {
      for (std::size_t c = 0; c < 3; ++c) base[c] += fa * fv[c] + sa * sv[c];
      base[2] += za;
      return base;
    };
    // Segment hanging from `from` at swing angle `ang` in the sagittal plane.
    auto limb = [&](const std::array<double, 3>& from, double len, double ang) {
      return offset(from, len * std::sin(ang), f, 0.0, s, -len * std::cos(ang));
    };

    const std::array<double, 3> pelvis{tr.pos[t][0], tr.pos[t][1], k * 0.95 + 0.02 * amp * std::cos(2.0 * phi)};
    const auto neck = offset(pelvis, 0.0, f, 0.0, s, k * 0.55);
    const auto head_j = offset(neck, 0.02, f, 0.0, s, k * 0.22);
    set(0, pelvis);
    set(1, neck);
    set(2, head_j);
    for (int side = 0; side < 2; ++side) {
      const double sign = side == 0 ? 1.0 : -1.0;  // left is +s
      const double leg_phase = phi + (side == 0 ? 0.0 : std::numbers::pi);
      const double arm_swing = 0.5 * st.arm_gain * amp * std::sin(leg_phase + std::numbers::pi);
      const auto shoulder = offset(neck, 0.0, f, sign * k * 0.18, s, -k * 0.03);
      const auto elbow = limb(shoulder, k * 0.28, arm_swing);
      const auto wrist = limb(elbow, k * 0.25, arm_swing + 0.2 + 0.3 * amp);
      const double leg_swing = 0.45 * amp * std::sin(leg_phase);
      const double bend = 0.6 * amp * std::max(0.0, std::sin(leg_phase + std::numbers::pi / 2.0));
      const auto hip = offset(pelvis, 0.0, f, sign * k * 0.1, s, 0.0);
      const auto knee = limb(hip, k * 0.45, leg_swing);
      const auto ankle = limb(knee, k * 0.45, leg_swing - bend);
      const std::size_t base = side == 0 ? 3 : 6;
      set(base + 0, shoulder);
      set(base + 1, elbow);
      set(base + 2, wrist);
      const std::size_t lbase = side == 0 ? 9 : 12;
      set(lbase + 0, hip);
      set(lbase + 1, knee);
      set(lbase + 2, ankle);
    }
  }
  return x;
}

}  // namespace synth_detail

// Deterministic synthetic multi-person scene. Interacting behaviors drive
// persons 0 and 1; every further person is an independent walker that starts
// away from the scene center and heads outward.
inline Scene synth_scene(const GeneratorSpec& spec, std::uint64_t seed) {
  using namespace synth_detail;
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double dt = 1.0 / spec.fps;
  const std::size_t F = spec.frames, P = spec.persons;
  const double two_pi = 2.0 * std::numbers::pi;

  Behavior behavior = spec.behavior;
  if (behavior == Behavior::Mixed) {
    static constexpr Behavior choices[] = {Behavior::Follow, Behavior::Approach, Behavior::Circle, Behavior::Walk};
    behavior = P >= 2 ? choices[static_cast<std::size_t>(uni(0.0, 4.0)) % 4] : Behavior::Walk;
  }

  std::vector<Track> tracks;
  const Vec2 center{uni(-1.0, 1.0), uni(-1.0, 1.0)};
  switch (behavior) {
    case Behavior::Static: {
      for (std::size_t p = 0; p < P; ++p) {
        Track tr;
        tr.heading0 = uni(0.0, two_pi);
        const Vec2 at{center[0] + uni(-4.0, 4.0), center[1] + uni(-4.0, 4.0)};
        tr.pos.assign(F, at);
        tracks.push_back(std::move(tr));
      }
      break;
    }
    case Behavior::Follow: {
      const std::size_t delay = static_cast<std::size_t>(std::lround(uni(0.4, 0.7) * spec.fps));
      const double heading = uni(0.0, two_pi);
      Track lead = walker(center, heading, uni(0.9, 1.4), uni(-0.3, 0.3), F + delay, dt);
      Track leader, follower;
      leader.heading0 = follower.heading0 = heading;
      const double side = uni(-0.15, 0.15);
      for (std::size_t t = 0; t < F; ++t) {
        leader.pos.push_back(lead.pos[t + delay]);
        const Vec2 q = lead.pos[t];
        follower.pos.push_back({q[0] - side * std::sin(heading), q[1] + side * std::cos(heading)});
      }
      tracks.push_back(std::move(leader));
      tracks.push_back(std::move(follower));
      break;
    }
    case Behavior::Approach: {
      const double axis = uni(0.0, two_pi);
      const double half = uni(3.0, 4.5), stop = uni(0.45, 0.6), v0 = uni(1.0, 1.4);
      const double travel = half - stop;
      for (int who = 0; who < 2; ++who) {
        const double dir = who == 0 ? 1.0 : -1.0;
        Track tr;
        tr.heading0 = who == 0 ? axis : axis + std::numbers::pi;
        for (std::size_t t = 0; t < F; ++t) {
          // Exponential approach: initial speed v0, stops `stop` short of center.
          const double u = travel * (1.0 - std::exp(-static_cast<double>(t) * dt * v0 / travel));
          const double r = half - u;
          tr.pos.push_back({center[0] - dir * r * std::cos(axis), center[1] - dir * r * std::sin(axis)});
        }
        tracks.push_back(std::move(tr));
      }
      break;
    }
    case Behavior::Circle: {
      const double radius = uni(1.2, 2.0), omega = (unit(rng) < 0.5 ? -1.0 : 1.0) * uni(0.5, 0.8);
      const double a0 = uni(0.0, two_pi);
      for (int who = 0; who < 2; ++who) {
        Track tr;
        const double off = who == 0 ? 0.0 : std::numbers::pi;
        tr.heading0 = a0 + off + (omega > 0 ? 0.5 : -0.5) * std::numbers::pi;
        for (std::size_t t = 0; t < F; ++t) {
          const double a = a0 + off + omega * static_cast<double>(t) * dt;
          tr.pos.push_back({center[0] + radius * std::cos(a), center[1] + radius * std::sin(a)});
        }
        tracks.push_back(std::move(tr));
      }
      break;
    }
    case Behavior::Walk:
    case Behavior::Mixed:
      break;
  }

  // Remaining persons walk outward from the center on separated bearings.
  const std::size_t placed = tracks.size();
  const double bearing0 = uni(0.0, two_pi);
  for (std::size_t p = placed; p < P; ++p) {
    const double bearing =
        bearing0 + two_pi * static_cast<double>(p - placed) / static_cast<double>(P - placed) + uni(-0.2, 0.2);
    const double radius = (placed > 0 ? 5.0 : 1.5) + uni(0.0, 1.5);
    const Vec2 start{center[0] + radius * std::cos(bearing), center[1] + radius * std::sin(bearing)};
    tracks.push_back(walker(start, bearing + uni(-0.4, 0.4), uni(0.8, 1.5), uni(-0.2, 0.2), F, dt));
  }

  Scene scene;
  scene.fps = spec.fps;
  scene.unit = Unit::Meters;
  scene.skeleton = Skeleton::default15();
  for (const Track& tr : tracks) {
    BodyStyle st{uni(0.9, 1.1), uni(0.0, two_pi), uni(0.7, 1.3)};
    scene.persons.push_back(animate(tr, st, spec.fps));
  }
  return scene;
}

// `count` scenes with per-scene seeds derived from `seed`.
inline std::vector<Scene> synth_dataset(const GeneratorSpec& spec, std::size_t count, std::uint64_t seed) {
  std::vector<Scene> out;
  std::vector<std::uint64_t> seeds(count);
  std::mt19937_64 master(seed);
  for (auto& s : seeds) s = master();
  for (std::size_t i = 0; i < count; ++i) out.push_back(synth_scene(spec, seeds[i]));
  return out;
}

}  // namespace tbif
