#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "cavsafe/world.hpp"

namespace cavsafe::dyn {

/// u = [accel, steer].
struct ControlInput {
  double accel = 0.0;  // m/s^2
  double steer = 0.0;  // rad

  bool operator==(const ControlInput&) const = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double clamp(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Integration step, admissible box, vehicle geometry and controller gains.
struct DynamicsConfig {
  double dt = 0.05;
  double accel_min = -6.0;
  double accel_max = 4.0;
  double steer_min = -0.5;
  double steer_max = 0.5;
  double speed_max = 25.0;
  double lf = 1.35;  // CG to front axle
  double lr = 1.35;  // CG to rear axle

  double lateral_kp = 0.05;       // rad per meter of lateral offset
  double lateral_kd = 0.07;       // rad per m/s of lateral drift
  double speed_kp = 1.0;          // 1/s, speed tracking
  double keep_authority = 1.0;    // |accel| range of the speed-holding actions
  double brake_value = 0.5;       // fraction of max deceleration for BRAKE
  double lane_change_lookahead = 15.0;

  double max_braking() const { return -accel_min; }
};

/// Discrete action set: KEEP, LEFT, RIGHT, BRAKE, then k throttle intervals.
/// Indices are zero-based internally (action 0 is KEEP-LANE-SPEED).
struct ActionSpace {
  int k = 3;

  int size() const { return 4 + k; }
  bool valid(int a) const { return a >= 0 && a < size(); }
};

enum Action : int {
  kKeepLaneSpeed = 0,
  kChangeLaneLeft = 1,
  kChangeLaneRight = 2,
  kBrake = 3,
  kFirstThrottle = 4,
};

/// Executed when the safe set is empty; not part of the policy's action set.
inline constexpr int kEmergencyStop = -1;

std::string action_name(int action, const ActionSpace& space);

class NoAdjacentLane : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lanes the nominal controller may track. `left`/`right` are null at a road edge.
struct LaneContext {
  const world::Path* current = nullptr;
  const world::Path* left = nullptr;
  const world::Path* right = nullptr;
  std::optional<double> reference_speed;
};

/// Explicit-Euler kinematic bicycle step about the center of gravity.
world::VehicleState step_bicycle(const world::VehicleState& state, const ControlInput& u,
                                 double dt, const DynamicsConfig& cfg = {});

/// Acceleration range the low-level controller may use while executing `action`.
Interval action_accel_range(int action, const ActionSpace& space, const DynamicsConfig& cfg);

ControlInput emergency_stop(const DynamicsConfig& cfg);

/// Maps a discrete action to the controller's nominal input. Throws NoAdjacentLane
/// for a lane change toward a road edge.
ControlInput nominal_control(const world::VehicleState& state, int action, const LaneContext& lanes,
                             const ActionSpace& space, const DynamicsConfig& cfg);

/// Proportional-derivative steering toward the centerline of `lane`.
double lane_keeping_steer(const world::VehicleState& state, const world::Path& lane,
                          const DynamicsConfig& cfg);

/// Pursuit steering toward a point `lookahead` meters ahead on `lane`.
double pursuit_steer(const world::VehicleState& state, const world::Path& lane,
                     double lookahead, const DynamicsConfig& cfg);

}  // namespace cavsafe::dyn
