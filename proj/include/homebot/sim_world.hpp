#pragma once

// Deterministic 2.5D arena: static geometry, objects, scripted people, the robot,
// and the simulated LIDAR / camera / skeleton sensors.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "homebot/geometry.hpp"

namespace homebot {

class ArenaError : public std::runtime_error {
 public:
  enum class Kind { syntax, semantic };

  ArenaError(Kind kind, int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " +
                           (kind == Kind::syntax ? "syntax error: " : "semantic error: ") + what),
        kind_(kind),
        line_(line) {}

  Kind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  constexpr bool operator==(const Rgb&) const = default;
};

struct TimeInterval {
  double start = 0.0;
  double end = 0.0;
  constexpr bool contains(double t) const { return t >= start && t <= end; }
};

struct TimedWaypoint {
  double t = 0.0;
  Vec2 position;
};

struct SimObject {
  int id = 0;
  std::string class_label;
  Box3 aabb;
  std::optional<std::string> category;
  bool graspable = false;
  /// Sticky loads (trash bags) only let go after the wrist rolls both ways.
  bool sticky = false;
};

struct StaticBox {
  std::string name;
  Box3 box;
};

/// Door leaf occupying a wall gap; blocks everything until `open_at`.
struct Door {
  std::string name;
  Box3 box;
  double open_at = 0.0;

  bool is_open(double t) const { return t >= open_at; }
  Vec2 center() const { return box.footprint().center(); }
  /// Unit normal of the door plane (perpendicular to its long side).
  Vec2 normal() const {
    const Vec3 s = box.size();
    return s.x >= s.y ? Vec2{0.0, 1.0} : Vec2{1.0, 0.0};
  }
};

struct Zone {
  std::string name;
  Vec2 center;
  double radius = 0.0;
};

struct DialogueLine {
  std::string speaker;
  std::string text;
};

struct SimConfig {
  double dt = 0.1;

  double robot_radius = 0.25;
  double robot_height = 1.0;
  double max_linear_speed = 1.0;
  double max_angular_speed = 1.5;
  double max_joint_speed = 1.0;

  double scanner_height = 0.25;
  double lidar_max_range = 10.0;
  double lidar_fov = 240.0 * std::numbers::pi / 180.0;
  double lidar_resolution = 0.5 * std::numbers::pi / 180.0;

  double head_height = 1.1;
  int image_width = 640;
  int image_height = 480;
  double head_hfov = 58.0 * std::numbers::pi / 180.0;
  double hand_hfov = 90.0 * std::numbers::pi / 180.0;
  double head_max_range = 4.0;
  double hand_max_range = 1.5;
  double head_noise_sigma = 0.02;
  double hand_noise_sigma = 0.005;
  double skeleton_max_range = 6.0;

  double leg_radius = 0.07;
  double leg_separation = 0.2;
  double leg_height = 0.8;
  double torso_height = 1.1;
  double shoulder_height = 1.4;
  double shoulder_offset = 0.2;
  double wave_amplitude = 0.3;
  double wave_frequency = 2.0;
  double torso_color_sigma = 6.0;
  int torso_samples = 32;

  double grasp_margin = 0.03;
  double release_roll = 0.4;
  double wall_thickness = 0.1;
  double overlap_epsilon = 1e-6;
};

enum Joint : int { kLift = 0, kArmFlex, kArmRoll, kWristFlex, kWristRoll, kJointCount };

struct JointLimit {
  double lo;
  double hi;
};

inline constexpr std::array<JointLimit, kJointCount> kJointLimits{{
    {0.0, 0.69},     // lift (m)
    {-2.62, 0.0},    // arm flex
    {-2.0, 3.6},     // arm roll
    {-1.92, 1.22},   // wrist flex
    {-1.92, 3.67},   // wrist roll
}};

/// Planar arm chain in the robot's sagittal plane.
struct ArmGeometry {
  double shoulder_forward = 0.14;
  double shoulder_height = 0.34;
  double upper_arm = 0.345;
  double hand = 0.2;
};

struct RobotState {
  Pose2 base;
  std::array<double, kJointCount> arm{};
  double head_pan = 0.0;
  double head_tilt = 0.0;
  bool gripper_open = true;
  std::optional<int> held_object;
  /// Offset of the held object's center from the gripper, in the robot frame.
  Vec3 held_offset;
  /// Lowest point of the carried load, or the gripper height when empty.
  double carry_height = 0.0;
  std::optional<double> release_roll_start;
  double release_roll_min = 0.0;
  double release_roll_max = 0.0;
};

enum class GripperCommand { none, open, close };

struct Commands {
  /// Robot-frame planar velocity (holonomic base).
  Vec2 base_velocity;
  double angular_velocity = 0.0;
  std::array<double, kJointCount> joint_velocities{};
  GripperCommand gripper = GripperCommand::none;
  std::optional<double> head_pan;
  std::optional<double> head_tilt;
};

struct SimEvent {
  std::string kind;
  std::string detail;
};

struct SimPerson {
  std::string id;
  std::vector<TimedWaypoint> trajectory;
  Rgb torso_color;
  std::vector<TimeInterval> wave_script;
  std::vector<TimeInterval> hidden;
  std::vector<std::pair<double, Rgb>> recolor;
  bool has_drink = false;

  Vec2 position_at(double t) const {
    if (trajectory.empty()) return {};
    if (t <= trajectory.front().t) return trajectory.front().position;
    for (std::size_t i = 1; i < trajectory.size(); ++i) {
      const auto& a = trajectory[i - 1];
      const auto& b = trajectory[i];
      if (t <= b.t) {
        const double s = (t - a.t) / (b.t - a.t);
        return a.position + (b.position - a.position) * s;
      }
    }
    return trajectory.back().position;
  }

  /// Heading of the latest segment with motion at or before t; 0 when never moving.
  double facing_at(double t) const {
    double facing = 0.0;
    for (std::size_t i = 1; i < trajectory.size(); ++i) {
      if (trajectory[i - 1].t > t) break;
      const Vec2 d = trajectory[i].position - trajectory[i - 1].position;
      if (d.norm() > 1e-9) facing = std::atan2(d.y, d.x);
    }
    return facing;
  }

  bool waving_at(double t) const {
    for (const auto& w : wave_script)
      if (w.contains(t)) return true;
    return false;
  }

  bool hidden_at(double t) const {
    for (const auto& h : hidden)
      if (h.contains(t)) return true;
    return false;
  }

  Rgb color_at(double t) const {
    Rgb c = torso_color;
    for (const auto& [when, color] : recolor)
      if (t >= when) c = color;
    return c;
  }
};

struct World {
  Box2 bounds;
  std::vector<StaticBox> static_boxes;
  std::vector<Door> doors;
  std::vector<SimObject> objects;
  std::vector<SimPerson> people;
  std::vector<Zone> zones;
  std::vector<DialogueLine> dialogue;
  std::map<std::string, std::string, std::less<>> params;
  RobotState robot;
  double clock = 0.0;
  std::uint64_t rng_seed = 0;
  SimConfig config;
  ArmGeometry arm;
  /// Events raised by the most recent step.
  std::vector<SimEvent> events;

  const SimObject* object(int id) const {
    return id >= 0 && id < static_cast<int>(objects.size()) ? &objects[id] : nullptr;
  }
  SimObject* object(int id) {
    return id >= 0 && id < static_cast<int>(objects.size()) ? &objects[id] : nullptr;
  }
  const SimObject* object_by_class(std::string_view label) const {
    for (const auto& o : objects)
      if (o.class_label == label) return &o;
    return nullptr;
  }
  const SimPerson* person(std::string_view id) const {
    for (const auto& p : people)
      if (p.id == id) return &p;
    return nullptr;
  }
  const Zone* zone(std::string_view name) const {
    for (const auto& z : zones)
      if (z.name == name) return &z;
    return nullptr;
  }
  const Door* door(std::string_view name) const {
    for (const auto& d : doors)
      if (d.name == name) return &d;
    return nullptr;
  }
  std::optional<std::string> param(std::string_view key) const {
    auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    return it->second;
  }
  double param_or(std::string_view key, double fallback) const {
    auto v = param(key);
    return v ? std::stod(*v) : fallback;
  }
  std::vector<Box3> furniture_boxes(std::string_view name) const {
    std::vector<Box3> out;
    for (const auto& b : static_boxes)
      if (b.name == name) out.push_back(b.box);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Arena document parsing

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<double> to_number(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

class LineParser {
 public:
  LineParser(std::vector<std::string> tokens, int line) : tokens_(std::move(tokens)), line_(line) {}

  bool done() const { return pos_ >= tokens_.size(); }
  const std::string& peek() const { return tokens_.at(pos_); }
  std::string word(const char* what) {
    if (done()) fail(std::string("missing ") + what);
    return tokens_[pos_++];
  }
  double number(const char* what) {
    const std::string tok = word(what);
    auto v = to_number(tok);
    if (!v) fail(std::string("expected number for ") + what + ", got '" + tok + "'");
    return *v;
  }
  bool peek_is_number() const { return !done() && to_number(tokens_[pos_]).has_value(); }
  void expect_end() {
    if (!done()) fail("unexpected token '" + tokens_[pos_] + "'");
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ArenaError(ArenaError::Kind::syntax, line_, msg);
  }

 private:
  std::vector<std::string> tokens_;
  std::size_t pos_ = 1;
  int line_;
};

inline Rgb parse_rgb(LineParser& p) {
  Rgb c;
  std::uint8_t* channels[3] = {&c.r, &c.g, &c.b};
  for (auto* ch : channels) {
    const double v = p.number("color channel");
    if (v < 0 || v > 255 || v != std::floor(v)) p.fail("color channel out of range");
    *ch = static_cast<std::uint8_t>(v);
  }
  return c;
}

inline std::vector<TimeInterval> parse_intervals(LineParser& p, int line, const char* what) {
  std::vector<TimeInterval> out;
  while (p.peek_is_number()) {
    const double a = p.number(what);
    const double b = p.number(what);
    if (b < a) throw ArenaError(ArenaError::Kind::semantic, line, std::string(what) + " interval ends before it starts");
    out.push_back({a, b});
  }
  if (out.empty()) p.fail(std::string("expected at least one ") + what + " interval");
  return out;
}

}  // namespace detail

/// Parses an arena document. Entities keep their document order; object ids are
/// assigned sequentially from 0.
inline World load_arena(std::string_view text, SimConfig config = {}) {
  World w;
  w.config = config;
  bool have_bounds = false;
  std::vector<std::pair<int, int>> furniture_lines;  // (static box index, line)
  std::vector<int> object_lines;

  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    auto tokens = detail::split_ws(raw);
    if (tokens.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const std::string directive = tokens.front();
    const std::string rest_text = [&] {
      // raw text after the first two tokens, used by `say`
      std::string s;
      for (std::size_t i = 2; i < tokens.size(); ++i) {
        if (i > 2) s += ' ';
        s += tokens[i];
      }
      return s;
    }();
    detail::LineParser p(std::move(tokens), line_no);

    if (directive == "arena") {
      const double W = p.number("width");
      const double H = p.number("height");
      p.expect_end();
      if (W <= 0 || H <= 0) throw ArenaError(ArenaError::Kind::semantic, line_no, "arena must have positive size");
      if (have_bounds) throw ArenaError(ArenaError::Kind::semantic, line_no, "arena bounds declared twice");
      w.bounds = {{0.0, 0.0}, {W, H}};
      have_bounds = true;
    } else if (directive == "wall") {
      const double x1 = p.number("x1"), y1 = p.number("y1"), x2 = p.number("x2"), y2 = p.number("y2");
      const double h = p.number("height");
      p.expect_end();
      if (x1 != x2 && y1 != y2) throw ArenaError(ArenaError::Kind::semantic, line_no, "walls must be axis-aligned");
      if (h <= 0) throw ArenaError(ArenaError::Kind::semantic, line_no, "wall height must be positive");
      const double t = config.wall_thickness / 2.0;
      Box3 b{{std::min(x1, x2) - (x1 == x2 ? t : 0.0), std::min(y1, y2) - (y1 == y2 ? t : 0.0), 0.0},
             {std::max(x1, x2) + (x1 == x2 ? t : 0.0), std::max(y1, y2) + (y1 == y2 ? t : 0.0), h}};
      w.static_boxes.push_back({"wall", b});
    } else if (directive == "door") {
      Door d;
      d.name = p.word("door name");
      const double x1 = p.number("x1"), y1 = p.number("y1"), x2 = p.number("x2"), y2 = p.number("y2");
      const double h = p.number("height");
      d.open_at = 0.0;
      while (!p.done()) {
        const std::string opt = p.word("door option");
        if (opt.rfind("open_at=", 0) == 0) {
          auto v = detail::to_number(std::string_view(opt).substr(8));
          if (!v) p.fail("bad open_at value");
          d.open_at = *v;
        } else if (opt == "closed") {
          d.open_at = std::numeric_limits<double>::infinity();
        } else {
          p.fail("unknown door option '" + opt + "'");
        }
      }
      if (x1 != x2 && y1 != y2) throw ArenaError(ArenaError::Kind::semantic, line_no, "doors must be axis-aligned");
      const double t = config.wall_thickness / 2.0;
      d.box = {{std::min(x1, x2) - (x1 == x2 ? t : 0.0), std::min(y1, y2) - (y1 == y2 ? t : 0.0), 0.0},
               {std::max(x1, x2) + (x1 == x2 ? t : 0.0), std::max(y1, y2) + (y1 == y2 ? t : 0.0), h}};
      w.doors.push_back(std::move(d));
    } else if (directive == "furniture") {
      StaticBox sb;
      sb.name = p.word("furniture name");
      const Vec3 c{p.number("x"), p.number("y"), p.number("z")};
      const Vec3 s{p.number("dx"), p.number("dy"), p.number("dz")};
      p.expect_end();
      if (s.x <= 0 || s.y <= 0 || s.z <= 0) throw ArenaError(ArenaError::Kind::semantic, line_no, "furniture extents must be positive");
      sb.box = Box3::from_center(c, s);
      furniture_lines.emplace_back(static_cast<int>(w.static_boxes.size()), line_no);
      w.static_boxes.push_back(std::move(sb));
    } else if (directive == "object") {
      SimObject o;
      o.id = static_cast<int>(w.objects.size());
      o.class_label = p.word("object class");
      const Vec3 c{p.number("x"), p.number("y"), p.number("z")};
      const Vec3 s{p.number("dx"), p.number("dy"), p.number("dz")};
      while (!p.done()) {
        const std::string opt = p.word("object option");
        if (opt.rfind("category=", 0) == 0 && opt.size() > 9) {
          o.category = opt.substr(9);
        } else if (opt == "graspable") {
          o.graspable = true;
        } else if (opt == "sticky") {
          o.sticky = true;
        } else {
          p.fail("unknown object option '" + opt + "'");
        }
      }
      if (s.x <= 0 || s.y <= 0 || s.z <= 0) throw ArenaError(ArenaError::Kind::semantic, line_no, "object extents must be positive");
      o.aabb = Box3::from_center(c, s);
      object_lines.push_back(line_no);
      w.objects.push_back(std::move(o));
    } else if (directive == "person") {
      SimPerson person;
      person.id = p.word("person id");
      bool have_color = false, have_waypoints = false;
      while (!p.done()) {
        const std::string key = p.word("person attribute");
        if (key == "color") {
          person.torso_color = detail::parse_rgb(p);
          have_color = true;
        } else if (key == "drink") {
          person.has_drink = true;
        } else if (key == "wave") {
          person.wave_script = detail::parse_intervals(p, line_no, "wave");
        } else if (key == "hidden") {
          person.hidden = detail::parse_intervals(p, line_no, "hidden");
        } else if (key == "recolor") {
          const double t = p.number("recolor time");
          person.recolor.emplace_back(t, detail::parse_rgb(p));
        } else if (key == "waypoints") {
          while (!p.done()) {
            const std::string tok = p.word("waypoint");
            const auto c1 = tok.find(',');
            const auto c2 = c1 == std::string::npos ? c1 : tok.find(',', c1 + 1);
            if (c2 == std::string::npos) p.fail("waypoint must be t,x,y: '" + tok + "'");
            auto t = detail::to_number(std::string_view(tok).substr(0, c1));
            auto x = detail::to_number(std::string_view(tok).substr(c1 + 1, c2 - c1 - 1));
            auto y = detail::to_number(std::string_view(tok).substr(c2 + 1));
            if (!t || !x || !y) p.fail("waypoint must be t,x,y: '" + tok + "'");
            person.trajectory.push_back({*t, {*x, *y}});
          }
          have_waypoints = true;
        } else {
          p.fail("unknown person attribute '" + key + "'");
        }
      }
      if (!have_color) p.fail("person needs a color");
      if (!have_waypoints || person.trajectory.empty()) p.fail("person needs waypoints");
      for (std::size_t i = 1; i < person.trajectory.size(); ++i)
        if (!(person.trajectory[i].t > person.trajectory[i - 1].t))
          throw ArenaError(ArenaError::Kind::semantic, line_no, "waypoint timestamps must strictly increase");
      if (w.person(person.id)) throw ArenaError(ArenaError::Kind::semantic, line_no, "duplicate person id '" + person.id + "'");
      w.people.push_back(std::move(person));
    } else if (directive == "robot") {
      w.robot.base = {p.number("x"), p.number("y"), p.number("theta")};
      p.expect_end();
    } else if (directive == "zone") {
      Zone z;
      z.name = p.word("zone name");
      z.center = {p.number("x"), p.number("y")};
      z.radius = p.number("radius");
      p.expect_end();
      if (z.radius <= 0) throw ArenaError(ArenaError::Kind::semantic, line_no, "zone radius must be positive");
      w.zones.push_back(std::move(z));
    } else if (directive == "say") {
      const std::string speaker = p.word("speaker");
      if (rest_text.empty()) p.fail("say needs text");
      w.dialogue.push_back({speaker, rest_text});
    } else if (directive == "param") {
      const std::string key = p.word("param key");
      const std::string value = p.word("param value");
      p.expect_end();
      w.params[key] = value;
    } else {
      p.fail("unknown directive '" + directive + "'");
    }
    if (end == text.size()) break;
  }

  if (!have_bounds) throw ArenaError(ArenaError::Kind::semantic, line_no, "missing 'arena W H' directive");

  for (std::size_t a = 0; a < furniture_lines.size(); ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      const auto& ba = w.static_boxes[furniture_lines[a].first];
      const auto& bb = w.static_boxes[furniture_lines[b].first];
      if (ba.name == bb.name && ba.box.overlap_depth(bb.box) > config.overlap_epsilon)
        throw ArenaError(ArenaError::Kind::semantic, furniture_lines[a].second,
                         "furniture '" + ba.name + "' boxes overlap");
    }
  }
  for (std::size_t i = 0; i < w.objects.size(); ++i) {
    const Vec3 c = w.objects[i].aabb.center();
    if (!w.bounds.contains(c.xy()) || c.z < 0.0)
      throw ArenaError(ArenaError::Kind::semantic, object_lines[i],
                       "object '" + w.objects[i].class_label + "' lies outside the arena");
  }
  return w;
}

// ---------------------------------------------------------------------------
// Kinematics

inline Vec3 hand_direction(const RobotState& r) {
  const double phi = r.arm[kArmFlex] + r.arm[kWristFlex];  // from vertical-up, negative = forward
  const Vec2 fwd = r.base.heading_vector();
  const double f = std::sin(-phi);
  return {fwd.x * f, fwd.y * f, std::cos(phi)};
}

/// Gripper tool point (between the finger tips) in the world frame.
inline Vec3 tcp_position(const RobotState& r, const ArmGeometry& g) {
  const double af = r.arm[kArmFlex];
  const double phi = af + r.arm[kWristFlex];
  const double forward = g.shoulder_forward + g.upper_arm * std::sin(-af) + g.hand * std::sin(-phi);
  const double up = g.shoulder_height + r.arm[kLift] + g.upper_arm * std::cos(af) + g.hand * std::cos(phi);
  const Vec2 p = r.base.transform({forward, 0.0});
  return {p.x, p.y, up};
}

inline Vec3 tcp_position(const World& w) { return tcp_position(w.robot, w.arm); }

/// Obstacles for the robot body: static boxes reaching below the robot's top and closed doors.
inline std::vector<Box2> base_obstacles(const World& w) {
  std::vector<Box2> out;
  for (const auto& b : w.static_boxes)
    if (b.box.min.z < w.config.robot_height) out.push_back(b.box.footprint());
  for (const auto& d : w.doors)
    if (!d.is_open(w.clock)) out.push_back(d.box.footprint());
  return out;
}

inline bool footprint_collides(const World& w, const Vec2& p, double radius) {
  for (const auto& b : base_obstacles(w))
    if (distance_point_box(p, b) < radius) return true;
  return false;
}

/// Fraction in [0,1] of the displacement `d` a disc at `p` can travel before touching a box.
inline double sweep_fraction(const Vec2& p, const Vec2& d, double radius, const std::vector<Box2>& boxes) {
  double best = 1.0;
  if (d.norm() == 0.0) return 1.0;
  for (const auto& b : boxes) {
    const double d0 = distance_point_box(p, b);
    if (d0 < radius) {
      if (distance_point_box(p + d, b) < d0) best = 0.0;
      continue;
    }
    const Box2 ex{{b.min.x - radius, b.min.y}, {b.max.x + radius, b.max.y}};
    const Box2 ey{{b.min.x, b.min.y - radius}, {b.max.x, b.max.y + radius}};
    for (const auto& e : {ex, ey})
      if (auto c = clip_ray_box(p, d, e, 0.0, 1.0)) best = std::min(best, c->enter);
    const Vec2 corners[4] = {b.min, {b.max.x, b.min.y}, b.max, {b.min.x, b.max.y}};
    const double len = d.norm();
    for (const auto& c : corners)
      if (auto t = ray_hit_circle(p, d / len, c, radius, len)) best = std::min(best, *t / len);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Stepping

namespace detail {

inline void settle_object(World& w, SimObject& o) {
  const Vec2 c = o.aabb.center().xy();
  double support = 0.0;
  const double bottom = o.aabb.min.z;
  for (const auto& b : w.static_boxes)
    if (b.box.footprint().contains(c) && b.box.max.z <= bottom + 1e-6) support = std::max(support, b.box.max.z);
  for (const auto& other : w.objects)
    if (other.id != o.id && other.aabb.footprint().contains(c) && other.aabb.max.z <= bottom + 1e-6)
      support = std::max(support, other.aabb.max.z);
  const double dz = support - bottom;
  o.aabb.min.z += dz;
  o.aabb.max.z += dz;
}

inline void release_held(World& w) {
  const int id = *w.robot.held_object;
  w.robot.held_object.reset();
  w.robot.release_roll_start.reset();
  settle_object(w, w.objects[id]);
  w.events.push_back({"released", "id=" + std::to_string(id)});
}

inline void slave_held(World& w) {
  if (!w.robot.held_object) return;
  SimObject& o = w.objects[*w.robot.held_object];
  const Vec3 tcp = tcp_position(w);
  const Vec2 off = w.robot.held_offset.xy().rotated(w.robot.base.theta);
  const Vec3 c = tcp + Vec3{off.x, off.y, w.robot.held_offset.z};
  o.aabb = Box3::from_center(c, o.aabb.size());
}

}  // namespace detail

/// Advances the world by dt: integrates base and joints, resolves gripper commands,
/// and moves the clock. Base motion stops at first contact with static geometry and
/// raises a `bumper` event.
inline World step(const World& in, double dt, const Commands& cmd) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  World w = in;
  w.events.clear();
  const SimConfig& cfg = w.config;
  RobotState& r = w.robot;

  for (int j = 0; j < kJointCount; ++j) {
    const double v = std::clamp(cmd.joint_velocities[j], -cfg.max_joint_speed, cfg.max_joint_speed);
    r.arm[j] = std::clamp(r.arm[j] + v * dt, kJointLimits[j].lo, kJointLimits[j].hi);
  }
  if (cmd.head_pan) r.head_pan = *cmd.head_pan;
  if (cmd.head_tilt) r.head_tilt = *cmd.head_tilt;

  Vec2 v = cmd.base_velocity;
  if (const double n = v.norm(); n > cfg.max_linear_speed) v = v * (cfg.max_linear_speed / n);
  const double omega = std::clamp(cmd.angular_velocity, -cfg.max_angular_speed, cfg.max_angular_speed);
  const Vec2 disp = v.rotated(r.base.theta) * dt;
  if (disp.norm() > 0.0) {
    const auto boxes = base_obstacles(w);
    double s = sweep_fraction(r.base.position(), disp, cfg.robot_radius, boxes);
    if (s < 1.0) {
      s = std::max(0.0, s - 1e-9 / disp.norm());
      w.events.push_back({"bumper", ""});
    }
    r.base.x += disp.x * s;
    r.base.y += disp.y * s;
  }
  r.base.theta = wrap_angle(r.base.theta + omega * dt);

  if (cmd.gripper == GripperCommand::close && !r.held_object) {
    r.gripper_open = false;
    const Vec3 tcp = tcp_position(w);
    const SimObject* best = nullptr;
    for (const auto& o : w.objects) {
      if (!o.graspable || !o.aabb.inflated(cfg.grasp_margin).contains(tcp)) continue;
      if (!best || o.aabb.max.z > best->aabb.max.z) best = &o;
    }
    if (best) {
      r.held_object = best->id;
      const Vec3 off = best->aabb.center() - tcp;
      const Vec2 off_robot = off.xy().rotated(-r.base.theta);
      r.held_offset = {off_robot.x, off_robot.y, off.z};
      w.events.push_back({"grasped", "id=" + std::to_string(best->id)});
    } else {
      w.events.push_back({"grasp_missed", ""});
    }
  } else if (cmd.gripper == GripperCommand::open) {
    r.gripper_open = true;
    if (r.held_object && !r.release_roll_start) {
      if (w.objects[*r.held_object].sticky) {
        r.release_roll_start = r.arm[kWristRoll];
        r.release_roll_min = r.release_roll_max = r.arm[kWristRoll];
        w.events.push_back({"release_stuck", "id=" + std::to_string(*r.held_object)});
      } else {
        detail::slave_held(w);
        detail::release_held(w);
      }
    }
  }

  if (r.held_object && r.release_roll_start) {
    r.release_roll_min = std::min(r.release_roll_min, r.arm[kWristRoll]);
    r.release_roll_max = std::max(r.release_roll_max, r.arm[kWristRoll]);
    const double start = *r.release_roll_start;
    if (r.release_roll_max - start >= cfg.release_roll && start - r.release_roll_min >= cfg.release_roll) {
      detail::slave_held(w);
      detail::release_held(w);
    }
  }

  detail::slave_held(w);
  r.carry_height = r.held_object ? w.objects[*r.held_object].aabb.min.z : tcp_position(w).z;
  w.clock += dt;
  return w;
}

/// Attaches an object directly to the gripper (scripted hand-over).
inline World handover(const World& in, int object_id) {
  World w = in;
  if (!w.object(object_id)) throw std::out_of_range("handover: unknown object");
  if (w.robot.held_object) throw std::logic_error("handover: gripper already holds an object");
  SimObject& o = w.objects[object_id];
  w.robot.held_object = object_id;
  w.robot.gripper_open = false;
  w.robot.held_offset = {0.0, 0.0, -o.aabb.size().z / 2.0};
  detail::slave_held(w);
  w.robot.carry_height = o.aabb.min.z;
  return w;
}

// ---------------------------------------------------------------------------
// LIDAR

struct Scan {
  Pose2 origin;
  /// Beam angles relative to the robot heading.
  std::vector<double> angles;
  std::vector<double> ranges;
  double max_range = 0.0;

  Vec2 endpoint_local(std::size_t i) const {
    return {ranges[i] * std::cos(angles[i]), ranges[i] * std::sin(angles[i])};
  }
  Vec2 endpoint_world(std::size_t i) const { return origin.transform(endpoint_local(i)); }
};

inline std::vector<Vec2> leg_positions(const SimPerson& p, double t, const SimConfig& cfg) {
  const Vec2 c = p.position_at(t);
  const double f = p.facing_at(t);
  const Vec2 side{-std::sin(f) * cfg.leg_separation / 2.0, std::cos(f) * cfg.leg_separation / 2.0};
  return {c + side, c - side};
}

/// Ray-casts a planar scan at scanner height against static geometry, closed doors,
/// objects crossing the scan plane (including a low-carried load), and people's legs.
inline Scan lidar_scan(const World& w) {
  const SimConfig& cfg = w.config;
  Scan s;
  s.origin = w.robot.base;
  s.max_range = cfg.lidar_max_range;
  const double h = cfg.scanner_height;
  std::vector<Box2> boxes;
  for (const auto& b : w.static_boxes)
    if (b.box.min.z <= h && b.box.max.z >= h) boxes.push_back(b.box.footprint());
  for (const auto& d : w.doors)
    if (!d.is_open(w.clock) && d.box.min.z <= h && d.box.max.z >= h) boxes.push_back(d.box.footprint());
  for (const auto& o : w.objects)
    if (o.aabb.min.z <= h && o.aabb.max.z >= h) boxes.push_back(o.aabb.footprint());
  std::vector<Vec2> legs;
  if (h <= cfg.leg_height)
    for (const auto& p : w.people)
      if (!p.hidden_at(w.clock))
        for (const auto& l : leg_positions(p, w.clock, cfg)) legs.push_back(l);

  const int n = static_cast<int>(std::floor(cfg.lidar_fov / cfg.lidar_resolution + 1e-9)) + 1;
  s.angles.reserve(n);
  s.ranges.reserve(n);
  const Vec2 o = s.origin.position();
  for (int i = 0; i < n; ++i) {
    const double a = -cfg.lidar_fov / 2.0 + i * cfg.lidar_resolution;
    const double wa = s.origin.theta + a;
    const Vec2 dir{std::cos(wa), std::sin(wa)};
    double best = cfg.lidar_max_range;
    for (const auto& b : boxes)
      if (auto t = ray_hit_box(o, dir, b, best); t && *t > 0.0) best = std::min(best, *t);
    for (const auto& l : legs)
      if (auto t = ray_hit_circle(o, dir, l, cfg.leg_radius, best); t && *t > 0.0) best = std::min(best, *t);
    s.angles.push_back(a);
    s.ranges.push_back(best);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Cameras

enum class Camera { head, hand };

inline const char* to_string(Camera c) { return c == Camera::head ? "head" : "hand"; }

struct PixelRect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  Vec2 center() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }
};

struct CameraPose {
  Vec3 position;
  Vec3 forward;
  Vec3 right;
  Vec3 down;
  double focal = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  double max_range = 0.0;
  double noise_sigma = 0.0;

  /// Pixel coordinates and depth of a world point; nullopt behind the camera.
  std::optional<std::pair<Vec2, double>> project(const Vec3& p) const {
    const Vec3 d = p - position;
    const double z = d.dot(forward);
    if (z <= 0.05) return std::nullopt;
    return std::pair{Vec2{cx + focal * d.dot(right) / z, cy + focal * d.dot(down) / z}, z};
  }
  bool in_image(const Vec2& px) const { return px.x >= 0 && px.x <= width && px.y >= 0 && px.y <= height; }
  Vec3 pixel_ray(double u, double v) const {
    return (forward + right * ((u - cx) / focal) + down * ((v - cy) / focal)).normalized();
  }
};

inline CameraPose camera_pose(const World& w, Camera cam) {
  const SimConfig& cfg = w.config;
  CameraPose c;
  c.width = cfg.image_width;
  c.height = cfg.image_height;
  c.cx = cfg.image_width / 2.0;
  c.cy = cfg.image_height / 2.0;
  const double yaw = w.robot.base.theta + (cam == Camera::head ? w.robot.head_pan : 0.0);
  c.right = {std::sin(yaw), -std::cos(yaw), 0.0};
  if (cam == Camera::head) {
    const double pitch = w.robot.head_tilt;
    c.position = {w.robot.base.x, w.robot.base.y, cfg.head_height};
    c.forward = {std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch), std::sin(pitch)};
    c.focal = (cfg.image_width / 2.0) / std::tan(cfg.head_hfov / 2.0);
    c.max_range = cfg.head_max_range;
    c.noise_sigma = cfg.head_noise_sigma;
  } else {
    c.position = tcp_position(w);
    c.forward = hand_direction(w.robot);
    c.focal = (cfg.image_width / 2.0) / std::tan(cfg.hand_hfov / 2.0);
    c.max_range = cfg.hand_max_range;
    c.noise_sigma = cfg.hand_noise_sigma;
  }
  c.down = c.forward.cross(c.right);
  return c;
}

struct Detection {
  std::string class_label;
  Vec3 center_3d;
  /// Extents of the detected region (measured from the depth image).
  Vec3 size_3d;
  PixelRect bbox_2d;
  Camera camera = Camera::head;
  /// Ground-truth object id; kept for evaluation, never used by perception code.
  int source_id = -1;
};

namespace detail {

/// Box-Muller on mt19937_64 so noise is identical across standard libraries.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (cached_) {
      cached_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do u1 = uniform(); while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    cached_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool cached_ = false;
};

inline std::uint64_t clock_key(double t) { return static_cast<std::uint64_t>(std::llround(t * 1e6)); }

inline bool occluded(const World& w, const Vec3& from, const Vec3& to, int target_id) {
  for (const auto& b : w.static_boxes)
    if (segment_intersects_box(from, to, b.box)) return true;
  for (const auto& d : w.doors)
    if (!d.is_open(w.clock) && segment_intersects_box(from, to, d.box)) return true;
  for (const auto& o : w.objects) {
    if (o.id == target_id || (w.robot.held_object && *w.robot.held_object == o.id)) continue;
    if (o.aabb.contains(to) || o.aabb.contains(from)) continue;
    if (segment_intersects_box(from, to, o.aabb)) return true;
  }
  return false;
}

}  // namespace detail

/// One detection per unoccluded, in-frustum object. Center noise is seeded by
/// (world seed, clock, object id, camera), so equal snapshots give equal output.
inline std::vector<Detection> camera_detect(const World& w, Camera cam) {
  const CameraPose c = camera_pose(w, cam);
  std::vector<Detection> out;
  for (const auto& o : w.objects) {
    if (w.robot.held_object && *w.robot.held_object == o.id) continue;
    const Vec3 center = o.aabb.center();
    const auto proj = c.project(center);
    if (!proj || proj->second > c.max_range || !c.in_image(proj->first)) continue;
    if (detail::occluded(w, c.position, center, o.id)) continue;

    std::uint64_t seed = hash_combine(w.rng_seed, detail::clock_key(w.clock));
    seed = hash_combine(seed, static_cast<std::uint64_t>(o.id));
    seed = hash_combine(seed, cam == Camera::head ? 1u : 2u);
    detail::Gaussian g(seed);
    const Vec3 noisy = center + Vec3{g(), g(), g()} * c.noise_sigma;

    const auto np = c.project(noisy);
    if (!np) continue;
    double half_w = 0.0, half_h = 0.0;
    const Vec3 s = o.aabb.size();
    for (int k = 0; k < 8; ++k) {
      const Vec3 corner = o.aabb.min + Vec3{(k & 1) ? s.x : 0.0, (k & 2) ? s.y : 0.0, (k & 4) ? s.z : 0.0};
      if (auto cp = c.project(corner)) {
        half_w = std::max(half_w, std::abs(cp->first.x - proj->first.x));
        half_h = std::max(half_h, std::abs(cp->first.y - proj->first.y));
      }
    }
    Detection d;
    d.class_label = o.class_label;
    d.center_3d = noisy;
    d.size_3d = s;
    d.bbox_2d = {std::clamp(np->first.x - half_w, 0.0, double(c.width)), std::clamp(np->first.y - half_h, 0.0, double(c.height)),
                 std::clamp(np->first.x + half_w, 0.0, double(c.width)), std::clamp(np->first.y + half_h, 0.0, double(c.height))};
    d.camera = cam;
    d.source_id = o.id;
    out.push_back(std::move(d));
  }
  return out;
}

struct Skeleton {
  std::string person_id;
  Vec3 torso;
  Vec3 shoulder;
  Vec3 wrist;
  Vec2 torso_px;
  Vec2 shoulder_px;
  Vec2 wrist_px;
  std::vector<Rgb> torso_samples;
  bool has_drink = false;
};

/// Joint positions of a person at time t (shoulder/wrist on the right side).
inline Skeleton person_skeleton(const SimPerson& p, double t, const SimConfig& cfg) {
  Skeleton s;
  s.person_id = p.id;
  s.has_drink = p.has_drink;
  const Vec2 c = p.position_at(t);
  const double f = p.facing_at(t);
  const Vec2 right{std::sin(f), -std::cos(f)};
  s.torso = {c.x, c.y, cfg.torso_height};
  s.shoulder = {c.x + right.x * cfg.shoulder_offset, c.y + right.y * cfg.shoulder_offset, cfg.shoulder_height};
  if (p.waving_at(t)) {
    const double swing = cfg.wave_amplitude * std::sin(2.0 * std::numbers::pi * cfg.wave_frequency * t);
    s.wrist = s.shoulder + Vec3{right.x * swing, right.y * swing, 0.35};
  } else {
    s.wrist = s.shoulder + Vec3{0.0, 0.0, -0.55};
  }
  return s;
}

/// Skeletons of visible people in the head camera frustum.
inline std::vector<Skeleton> skeleton_detect(const World& w) {
  const CameraPose c = camera_pose(w, Camera::head);
  std::vector<Skeleton> out;
  for (std::size_t i = 0; i < w.people.size(); ++i) {
    const SimPerson& p = w.people[i];
    if (p.hidden_at(w.clock)) continue;
    Skeleton s = person_skeleton(p, w.clock, w.config);
    const auto tp = c.project(s.torso);
    if (!tp || tp->second > w.config.skeleton_max_range || !c.in_image(tp->first)) continue;
    bool blocked = false;
    for (const auto& b : w.static_boxes)
      if (segment_intersects_box(c.position, s.torso, b.box)) blocked = true;
    for (const auto& d : w.doors)
      if (!d.is_open(w.clock) && segment_intersects_box(c.position, s.torso, d.box)) blocked = true;
    if (blocked) continue;
    s.torso_px = tp->first;
    if (auto sp = c.project(s.shoulder)) s.shoulder_px = sp->first;
    if (auto wp = c.project(s.wrist)) s.wrist_px = wp->first;

    std::uint64_t seed = hash_combine(w.rng_seed, detail::clock_key(w.clock));
    seed = hash_combine(seed, 0x5eed0000u + i);
    detail::Gaussian g(seed);
    const Rgb base = p.color_at(w.clock);
    auto jitter = [&](std::uint8_t v) {
      return static_cast<std::uint8_t>(std::clamp(std::lround(v + g() * w.config.torso_color_sigma), 0L, 255L));
    };
    for (int k = 0; k < w.config.torso_samples; ++k) s.torso_samples.push_back({jitter(base.r), jitter(base.g), jitter(base.b)});
    out.push_back(std::move(s));
  }
  return out;
}

struct DepthFrame {
  Vec3 origin;
  std::vector<Vec3> points;
};

/// Simulated depth image from the head camera: one ray per `stride` pixels inside
/// `roi` (whole image by default), returning surface points on boxes, objects and the floor.
inline DepthFrame depth_points(const World& w, int stride, std::optional<PixelRect> roi = std::nullopt) {
  const CameraPose c = camera_pose(w, Camera::head);
  DepthFrame f;
  f.origin = c.position;
  const PixelRect r = roi.value_or(PixelRect{0, 0, double(c.width), double(c.height)});
  std::vector<Box3> boxes;
  for (const auto& b : w.static_boxes) boxes.push_back(b.box);
  for (const auto& d : w.doors)
    if (!d.is_open(w.clock)) boxes.push_back(d.box);
  for (const auto& o : w.objects)
    if (!(w.robot.held_object && *w.robot.held_object == o.id)) boxes.push_back(o.aabb);
  for (double v = std::floor(r.y0) + stride / 2.0; v < r.y1; v += stride) {
    for (double u = std::floor(r.x0) + stride / 2.0; u < r.x1; u += stride) {
      const Vec3 dir = c.pixel_ray(u, v);
      double best = c.max_range;
      bool hit = false;
      for (const auto& b : boxes)
        if (auto t = ray_hit_box(c.position, dir, b, best)) {
          best = *t;
          hit = true;
        }
      if (dir.z < 0.0) {
        const double t = -c.position.z / dir.z;
        const Vec3 p = c.position + dir * t;
        if (t < best && w.bounds.contains(p.xy())) {
          best = t;
          hit = true;
        }
      }
      if (hit) f.points.push_back(c.position + dir * best);
    }
  }
  return f;
}

}  // namespace homebot
