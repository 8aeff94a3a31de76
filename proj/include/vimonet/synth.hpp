#pragma once

// Procedural 15-joint skeleton motion and its stick-figure rendering.
// Coordinates: meters, y up, z forward, x toward the person's left.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "vimonet/core.hpp"

namespace vimonet::synth {

enum Joint : int {
  kRoot = 0,
  kSpine,
  kHead,
  kLShoulder,
  kLElbow,
  kLWrist,
  kRShoulder,
  kRElbow,
  kRWrist,
  kLHip,
  kLKnee,
  kLAnkle,
  kRHip,
  kRKnee,
  kRAnkle,
  kJointCount
};

inline constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "root",       "spine",   "head",    "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow",
    "r_wrist",    "l_hip",   "l_knee",  "l_ankle",    "r_hip",   "r_knee",  "r_ankle"};

inline constexpr std::array<std::pair<int, int>, 14> kBones = {{{kRoot, kSpine},
                                                               {kSpine, kHead},
                                                               {kSpine, kLShoulder},
                                                               {kLShoulder, kLElbow},
                                                               {kLElbow, kLWrist},
                                                               {kSpine, kRShoulder},
                                                               {kRShoulder, kRElbow},
                                                               {kRElbow, kRWrist},
                                                               {kRoot, kLHip},
                                                               {kLHip, kLKnee},
                                                               {kLKnee, kLAnkle},
                                                               {kRoot, kRHip},
                                                               {kRHip, kRKnee},
                                                               {kRKnee, kRAnkle}}};

inline constexpr double kUpperArm = 0.28, kForearm = 0.27, kThigh = 0.45, kShin = 0.45;

enum class Kind { raise_arm, wave, squat, jump, kick, walk, turn };
enum class Side { none, left, right };
enum class Direction { none, forward, backward, left, right };

inline constexpr std::array<Kind, 7> kAllKinds = {Kind::raise_arm, Kind::wave, Kind::squat, Kind::jump,
                                                  Kind::kick,      Kind::walk, Kind::turn};

inline std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::raise_arm: return "raise-arm";
    case Kind::wave: return "wave";
    case Kind::squat: return "squat";
    case Kind::jump: return "jump";
    case Kind::kick: return "kick";
    case Kind::walk: return "walk";
    case Kind::turn: return "turn";
  }
  return "?";
}
inline std::string_view to_string(Side s) { return s == Side::left ? "left" : s == Side::right ? "right" : "none"; }
inline std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::forward: return "forward";
    case Direction::backward: return "backward";
    case Direction::left: return "left";
    case Direction::right: return "right";
    default: return "none";
  }
}

inline Kind parse_kind(std::string_view s) {
  for (auto k : kAllKinds)
    if (to_string(k) == s) return k;
  throw ContractError("unknown motion kind '" + std::string(s) + "'");
}
inline Side parse_side(std::string_view s) {
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  if (s == "none") return Side::none;
  throw ContractError("unknown side '" + std::string(s) + "'");
}
inline Direction parse_direction(std::string_view s) {
  for (auto d : {Direction::none, Direction::forward, Direction::backward, Direction::left, Direction::right})
    if (to_string(d) == s) return d;
  throw ContractError("unknown direction '" + std::string(s) + "'");
}

inline bool needs_side(Kind k) { return k == Kind::raise_arm || k == Kind::wave || k == Kind::kick; }
inline bool needs_direction(Kind k) { return k == Kind::walk || k == Kind::turn; }

struct MotionPrimitive {
  Kind kind = Kind::squat;
  Side side = Side::none;
  Direction direction = Direction::none;
  int duration_frames = 20;

  void validate() const {
    if (duration_frames < 2) throw ContractError("primitive needs at least 2 frames");
    if (needs_side(kind) != (side != Side::none))
      throw ContractError(std::string(to_string(kind)) + (needs_side(kind) ? " requires a side" : " takes no side"));
    if (needs_direction(kind) != (direction != Direction::none))
      throw ContractError(std::string(to_string(kind)) +
                          (needs_direction(kind) ? " requires a direction" : " takes no direction"));
    if (kind == Kind::turn && direction != Direction::left && direction != Direction::right)
      throw ContractError("turn direction must be left or right");
  }

  // Semantic identity, ignoring duration.
  std::string label() const {
    std::string s(to_string(kind));
    for (auto& c : s)
      if (c == '-') c = '_';
    if (side != Side::none) s += "_" + std::string(to_string(side));
    if (direction != Direction::none) s += "_" + std::string(to_string(direction));
    return s;
  }

  friend bool operator==(const MotionPrimitive&, const MotionPrimitive&) = default;
};

// Every semantically distinct primitive (14 of them).
inline std::vector<MotionPrimitive> all_primitives() {
  std::vector<MotionPrimitive> out;
  for (auto k : kAllKinds) {
    if (needs_side(k)) {
      for (auto s : {Side::left, Side::right}) out.push_back({k, s, Direction::none, 20});
    } else if (k == Kind::walk) {
      for (auto d : {Direction::forward, Direction::backward, Direction::left, Direction::right})
        out.push_back({k, Side::none, d, 20});
    } else if (k == Kind::turn) {
      for (auto d : {Direction::left, Direction::right}) out.push_back({k, Side::none, d, 20});
    } else {
      out.push_back({k, Side::none, Direction::none, 20});
    }
  }
  return out;
}

struct CompositeScript {
  std::vector<MotionPrimitive> primitives;

  int total_frames() const {
    int n = 0;
    for (const auto& p : primitives) n += p.duration_frames;
    return n;
  }

  // [begin, end) frame range of primitive i.
  std::pair<int, int> segment(std::size_t i) const {
    int b = 0;
    for (std::size_t k = 0; k < i; ++k) b += primitives[k].duration_frames;
    return {b, b + primitives[i].duration_frames};
  }

  // Index of the primitive active at `frame`.
  std::size_t primitive_at(int frame) const {
    int end = 0;
    for (std::size_t i = 0; i < primitives.size(); ++i) {
      end += primitives[i].duration_frames;
      if (frame < end) return i;
    }
    return primitives.size() - 1;
  }

  bool has_kind(Kind k) const {
    return std::any_of(primitives.begin(), primitives.end(), [&](const MotionPrimitive& p) { return p.kind == k; });
  }

  void validate() const {
    if (primitives.empty() || primitives.size() > 3) throw ContractError("script needs 1 to 3 primitives");
    for (std::size_t i = 0; i < primitives.size(); ++i) {
      primitives[i].validate();
      for (std::size_t j = 0; j < i; ++j)
        if (primitives[j].kind == primitives[i].kind) throw ContractError("script repeats a motion kind");
    }
  }

  friend bool operator==(const CompositeScript&, const CompositeScript&) = default;
};

inline nlohmann::json to_json(const CompositeScript& s) {
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& p : s.primitives)
    prims.push_back({{"kind", to_string(p.kind)},
                     {"side", to_string(p.side)},
                     {"direction", to_string(p.direction)},
                     {"frames", p.duration_frames}});
  return prims;
}

inline CompositeScript script_from_json(const nlohmann::json& j) {
  CompositeScript s;
  for (const auto& p : j)
    s.primitives.push_back({parse_kind(p.at("kind").get<std::string>()), parse_side(p.at("side").get<std::string>()),
                            parse_direction(p.at("direction").get<std::string>()), p.at("frames").get<int>()});
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Poses

using V3 = Eigen::Vector3d;
using Pose = std::array<V3, kJointCount>;

inline Pose rest_pose() {
  Pose p;
  p[kRoot] = {0, 1.0, 0};
  p[kSpine] = {0, 1.45, 0};
  p[kHead] = {0, 1.7, 0};
  for (int s : {1, -1}) {
    const double x = 0.2 * s, hx = 0.1 * s;
    const int o = s > 0 ? 0 : 3;
    p[kLShoulder + o] = {x, 1.45, 0};
    p[kLElbow + o] = {x, 1.45 - kUpperArm, 0};
    p[kLWrist + o] = {x, 1.45 - kUpperArm - kForearm, 0};
    p[kLHip + o] = {hx, 1.0, 0};
    p[kLKnee + o] = {hx, 1.0 - kThigh, 0};
    p[kLAnkle + o] = {hx, 1.0 - kThigh - kShin, 0};
  }
  return p;
}

inline int arm_offset(Side s) { return s == Side::left ? 0 : 3; }
inline double side_sign(Side s) { return s == Side::left ? 1.0 : -1.0; }

inline void set_arm(Pose& p, Side s, const V3& upper, const V3& lower) {
  const int o = arm_offset(s);
  p[kLElbow + o] = p[kLShoulder + o] + kUpperArm * upper.normalized();
  p[kLWrist + o] = p[kLElbow + o] + kForearm * lower.normalized();
}

inline void set_leg(Pose& p, Side s, const V3& thigh, const V3& shin) {
  const int o = arm_offset(s);
  p[kLKnee + o] = p[kLHip + o] + kThigh * thigh.normalized();
  p[kLAnkle + o] = p[kLKnee + o] + kShin * shin.normalized();
}

inline V3 direction_vector(Direction d) {
  switch (d) {
    case Direction::forward: return {0, 0, 1};
    case Direction::backward: return {0, 0, -1};
    case Direction::left: return {1, 0, 0};
    case Direction::right: return {-1, 0, 0};
    default: return {0, 0, 0};
  }
}

inline constexpr double kRaiseSweep = 0.9 * std::numbers::pi;  // shoulder flexion at the end of a raise
inline constexpr double kWaveAbduction = 0.8 * std::numbers::pi;
inline constexpr double kSquatDepth = 0.35;
inline constexpr double kJumpHeight = 0.35;
inline constexpr double kKickSwing = 70.0 * std::numbers::pi / 180.0;
inline constexpr double kWalkDistance = 0.8;
inline constexpr double kWalkSwing = 0.35;
inline constexpr double kWalkStrides = 2.0;

// Pose of primitive `p` at progress s in [0, 1]. Every primitive starts from
// the rest pose at the origin.
inline Pose primitive_pose(const MotionPrimitive& prim, double s) {
  Pose p = rest_pose();
  const double pi = std::numbers::pi;
  switch (prim.kind) {
    case Kind::raise_arm: {
      const double th = kRaiseSweep * s;
      const V3 d(0, -std::cos(th), std::sin(th));
      set_arm(p, prim.side, d, d);
      break;
    }
    case Kind::wave: {
      const double ramp = std::min(1.0, s / 0.25);
      const double a = kWaveAbduction * ramp;
      const double phi = ramp * 0.4 * std::sin(2.0 * pi * 2.0 * s);
      const double sg = side_sign(prim.side);
      set_arm(p, prim.side, V3(sg * std::sin(a), -std::cos(a), 0), V3(sg * std::sin(a + phi), -std::cos(a + phi), 0));
      break;
    }
    case Kind::squat: {
      const double d = kSquatDepth * std::sin(pi * s);
      for (int j : {kRoot, kSpine, kHead, kLShoulder, kLElbow, kLWrist, kRShoulder, kRElbow, kRWrist, kLHip, kRHip})
        p[j].y() -= d;
      for (Side sd : {Side::left, Side::right}) {
        const int o = arm_offset(sd);
        const V3 hip = p[kLHip + o], ankle = p[kLAnkle + o];
        const double half = 0.5 * (hip.y() - ankle.y());
        const double fwd = std::sqrt(std::max(0.0, kThigh * kThigh - half * half));
        p[kLKnee + o] = V3(hip.x(), 0.5 * (hip.y() + ankle.y()), fwd);
      }
      break;
    }
    case Kind::jump: {
      const double h = kJumpHeight * 4.0 * s * (1.0 - s);
      for (auto& j : p) j.y() += h;
      break;
    }
    case Kind::kick: {
      const double a = kKickSwing * std::sin(pi * s);
      const V3 d(0, -std::cos(a), std::sin(a));
      set_leg(p, prim.side, d, d);
      break;
    }
    case Kind::walk: {
      const V3 dir = direction_vector(prim.direction);
      const double b = kWalkSwing * std::sin(2.0 * pi * kWalkStrides * s);
      set_leg(p, Side::left, dir * std::sin(b) + V3(0, -std::cos(b), 0), dir * std::sin(b) + V3(0, -std::cos(b), 0));
      set_leg(p, Side::right, dir * std::sin(-b) + V3(0, -std::cos(b), 0),
              dir * std::sin(-b) + V3(0, -std::cos(b), 0));
      for (int j : {kSpine, kHead, kLShoulder, kLElbow, kLWrist, kRShoulder, kRElbow, kRWrist}) p[j] += 0.05 * dir;
      const V3 shift = kWalkDistance * s * dir;
      for (auto& j : p) j += shift;
      break;
    }
    case Kind::turn: {
      const double psi = (prim.direction == Direction::left ? 1.0 : -1.0) * 0.5 * pi * s;
      const double c = std::cos(psi), sn = std::sin(psi);
      for (auto& j : p) j = V3(c * j.x() + sn * j.z(), j.y(), -sn * j.x() + c * j.z());
      break;
    }
  }
  return p;
}

// Closed-form trajectories plus uniform noise in [-noise, noise] meters.
inline constexpr double kDefaultFps = 20.0;

inline MotionSequence synth_motion(const CompositeScript& script, int joints, double fps, std::uint64_t seed,
                                   double noise = 0.004) {
  script.validate();
  if (!(fps > 0.0)) throw ContractError("fps must be positive");
  if (joints != kJointCount) throw ContractError("the synthetic skeleton has exactly 15 joints");
  if (!(noise >= 0.0) || noise >= 0.01) throw ContractError("noise must be in [0, 0.01) meters");
  const int F = script.total_frames();
  Mat frames(F, 3 * kJointCount);
  int row = 0;
  for (const auto& prim : script.primitives) {
    for (int i = 0; i < prim.duration_frames; ++i, ++row) {
      const double s = static_cast<double>(i) / (prim.duration_frames - 1);
      const Pose p = primitive_pose(prim, s);
      for (int j = 0; j < kJointCount; ++j) frames.block<1, 3>(row, 3 * j) = p[j].transpose();
    }
  }
  if (noise > 0.0) {
    Rng rng(mix_seed(seed, 0x6e6f697365ULL));
    std::uniform_real_distribution<double> u(-noise, noise);
    for (Eigen::Index i = 0; i < frames.size(); ++i) frames.data()[i] += u(rng);
  }
  return MotionSequence(std::move(frames), kJointCount, fps);
}

// ---------------------------------------------------------------------------
// Rendering

struct Camera {
  double yaw = 30.0 * std::numbers::pi / 180.0;
  double pitch = 15.0 * std::numbers::pi / 180.0;
  double scale = 11.0;  // pixels per meter at 32 px; scaled with the frame size
};

// Orthographic oblique projection to (column, row) pixel coordinates.
inline std::pair<int, int> project(const V3& p, int H, int W, const Camera& cam = {}) {
  const double x1 = std::cos(cam.yaw) * p.x() + std::sin(cam.yaw) * p.z();
  const double z1 = -std::sin(cam.yaw) * p.x() + std::cos(cam.yaw) * p.z();
  const double y2 = std::cos(cam.pitch) * p.y() - std::sin(cam.pitch) * z1;
  const double k = cam.scale * std::min(H, W) / 32.0;
  const double u = 0.5 * W + k * x1;
  const double v = (H - 3) - k * y2;
  auto clampi = [](double a, int hi) { return static_cast<int>(std::clamp(std::lround(a), 0L, static_cast<long>(hi))); };
  return {clampi(u, W - 1), clampi(v, H - 1)};
}

// Bresenham line, endpoints inclusive.
inline void draw_line(VideoClip& v, int t, int x0, int y0, int x1, int y1) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    for (int c = 0; c < v.channels(); ++c) v.at(t, y0, x0, c) = 255;
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

// White 1-pixel bones on black, one frame per motion frame. Skeletons with
// other joint counts draw a chain through consecutive joints.
inline VideoClip render_stick_figure(const MotionSequence& m, int H = 32, int W = 32, int channels = 1) {
  auto clip = VideoClip::blank(m.frame_count(), H, W, channels);
  std::vector<std::pair<int, int>> bones;
  if (m.joint_count() == kJointCount)
    bones.assign(kBones.begin(), kBones.end());
  else
    for (int j = 1; j < m.joint_count(); ++j) bones.emplace_back(j - 1, j);
  for (int t = 0; t < m.frame_count(); ++t)
    for (auto [a, b] : bones) {
      auto [x0, y0] = project(m.joint(t, a), H, W);
      auto [x1, y1] = project(m.joint(t, b), H, W);
      draw_line(clip, t, x0, y0, x1, y1);
    }
  return clip;
}

}  // namespace vimonet::synth
