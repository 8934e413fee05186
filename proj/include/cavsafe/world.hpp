#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cavsafe/perturb.hpp"

namespace cavsafe::world {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

inline Vec2 heading_unit(double psi) { return {std::cos(psi), std::sin(psi)}; }

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

inline constexpr double kDefaultLength = 4.5;
inline constexpr double kDefaultWidth = 2.0;

/// Ground-truth pose and speed of one vehicle, referenced at its center of gravity.
struct VehicleState {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;    // scalar speed, >= 0
  double psi = 0.0;  // heading
  double length = kDefaultLength;
  double width = kDefaultWidth;
  bool connected = false;

  Vec2 position() const { return {x, y}; }
};

class OutOfCorridor : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arc-length frame of a path: s along the path, d signed lateral offset (left positive).
struct PathCoord {
  double s = 0.0;
  double d = 0.0;
};

inline constexpr double kCorridorRadius = 50.0;

/// Piecewise-linear lane centerline.
class Path {
 public:
  Path() = default;
  Path(std::vector<Vec2> waypoints, std::string lane_id,
       std::optional<std::string> signal = std::nullopt);

  const std::vector<Vec2>& waypoints() const { return waypoints_; }
  const std::string& lane_id() const { return lane_id_; }
  const std::optional<std::string>& signal() const { return signal_; }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  /// Nearest-point projection; nullopt when the point is farther than `corridor` from the path.
  std::optional<PathCoord> try_project(Vec2 p, double corridor = kCorridorRadius) const;
  /// Point at arc-length s, clamped to the path ends.
  Vec2 point_at(double s) const;
  /// Tangent heading at arc-length s.
  double heading_at(double s) const;

  /// Arc-length on this path where the line through `origin` with direction `dir`
  /// crosses it, nearest to `origin` along the line. Returns (s, signed distance
  /// along dir) or nullopt if the line never crosses the path.
  std::optional<std::pair<double, double>> intersect_line(Vec2 origin, Vec2 dir) const;

 private:
  std::size_t segment_at(double s) const;

  std::vector<Vec2> waypoints_;
  std::vector<double> cumulative_;
  std::string lane_id_;
  std::optional<std::string> signal_;
};

/// Throws OutOfCorridor when the vehicle is more than 50 m from the path.
PathCoord project_to_path(const VehicleState& state, const Path& path);

/// One road: lanes ordered right to left relative to the direction of travel.
struct Road {
  std::string name;
  std::vector<Path> lanes;
};

struct LaneRef {
  int road = 0;
  int lane = 0;
  bool operator==(const LaneRef&) const = default;
};

struct RoadMap {
  std::vector<Road> roads;
  double lane_width = 3.5;

  const Path& lane(const LaneRef& ref) const;
  const Path* left_of(const LaneRef& ref) const;
  const Path* right_of(const LaneRef& ref) const;
  int lane_count(int road) const;
};

/// Corner points of a vehicle footprint, counter-clockwise.
std::vector<Vec2> footprint(const VehicleState& s);

/// Separating-axis test on the two oriented rectangles.
bool footprints_overlap(const VehicleState& a, const VehicleState& b);

using IdPair = std::pair<int, int>;  // stored with first < second

IdPair make_pair_key(int a, int b);

std::set<IdPair> detect_collisions(std::span<const VehicleState> states);

/// What one agent knows about one vehicle, in the observed vehicle's
/// travel-aligned frame (x-axis along its heading).
struct Observation {
  int target_id = 0;
  Vec2 l;                             // (l_x, l_y)
  Vec2 v;                             // (v_x, v_y)
  std::optional<double> alpha;        // CAV targets only
  std::optional<int> lane_detect;     // CAV targets only
  double psi = 0.0;                   // heading that defines the frame
  double length = kDefaultLength;
  double width = kDefaultWidth;
  bool connected = false;

  /// World position implied by the (possibly perturbed) observation.
  Vec2 world_position() const;
  /// Speed along the travel axis.
  double speed() const { return v.x; }
};

struct VehicleInfo {
  LaneRef lane;            // lane the controller is tracking
  double last_accel = 0.0;
  bool wrecked = false;    // collided; frozen in place
};

struct World {
  RoadMap map;
  std::vector<VehicleState> vehicles;
  std::vector<VehicleInfo> info;
  int t = 0;

  std::vector<int> agent_indices() const;  // indices of connected vehicles, in vehicle order
  int index_of(int id) const;
};

/// Exact observation of a vehicle.
Observation observe(const VehicleState& s, const VehicleInfo& info);

/// Applies a travel-axis error; l_y, v_y, alpha and lane_detect are untouched.
Observation apply_error(Observation o, const perturb::ErrorPair& e);

struct AppliedPerturbation {
  int observer = 0;
  int target = 0;
  perturb::ErrorPair error;
  bool exceeds_bound = false;
};

/// s_i = {o_i, o_N_i, o_N_i^UV}.
struct AgentState {
  int agent_id = 0;
  VehicleState self_state;   // exact
  Observation self;          // exact
  LaneRef lane;              // lane the agent is tracking
  std::vector<Observation> cavs;  // neighbor CAVs, nearest first
  std::vector<Observation> ucvs;  // unconnected vehicles, nearest first
};

struct JointState {
  int t = 0;
  std::vector<AgentState> agents;
  std::vector<AppliedPerturbation> applied;  // non-zero errors only
};

inline constexpr double kDefaultCommRange = 200.0;

JointState build_joint_state(const World& world, double comm_range,
                             const perturb::PerturbationSchedule& schedule);

}  // namespace cavsafe::world
