#include "cavsafe/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace cavsafe::dyn {

std::string action_name(int action, const ActionSpace& space) {
  switch (action) {
    case kEmergencyStop: return "EMERGENCY-STOP";
    case kKeepLaneSpeed: return "KEEP-LANE-SPEED";
    case kChangeLaneLeft: return "CHANGE-LANE-LEFT";
    case kChangeLaneRight: return "CHANGE-LANE-RIGHT";
    case kBrake: return "BRAKE";
    default: break;
  }
  if (space.valid(action)) return "THROTTLE-" + std::to_string(action - kFirstThrottle + 1);
  return "INVALID";
}

world::VehicleState step_bicycle(const world::VehicleState& state, const ControlInput& u,
                                 double dt, const DynamicsConfig& cfg) {
  world::VehicleState next = state;
  const double beta = std::atan(cfg.lr / (cfg.lf + cfg.lr) * std::tan(u.steer));
  next.x = state.x + state.v * std::cos(state.psi + beta) * dt;
  next.y = state.y + state.v * std::sin(state.psi + beta) * dt;
  next.psi = world::wrap_angle(state.psi + state.v / cfg.lr * std::sin(beta) * dt);
  next.v = std::clamp(state.v + u.accel * dt, 0.0, cfg.speed_max);
  return next;
}

Interval action_accel_range(int action, const ActionSpace& space, const DynamicsConfig& cfg) {
  switch (action) {
    case kEmergencyStop:
      return {cfg.accel_min, cfg.accel_min};
    case kKeepLaneSpeed:
    case kChangeLaneLeft:
    case kChangeLaneRight:
      return {std::max(cfg.accel_min, -cfg.keep_authority),
              std::min(cfg.accel_max, cfg.keep_authority)};
    case kBrake:
      return {cfg.brake_value * cfg.accel_min, 0.0};
    default:
      break;
  }
  const int j = action - kFirstThrottle + 1;  // 1..k
  return {cfg.accel_max * (j - 1) / space.k, cfg.accel_max * j / space.k};
}

ControlInput emergency_stop(const DynamicsConfig& cfg) { return {cfg.accel_min, 0.0}; }

double lane_keeping_steer(const world::VehicleState& state, const world::Path& lane,
                          const DynamicsConfig& cfg) {
  const auto pc = lane.try_project(state.position());
  if (!pc) return 0.0;
  const double heading_error = world::wrap_angle(state.psi - lane.heading_at(pc->s));
  const double drift = state.v * std::sin(heading_error);
  const double steer = -cfg.lateral_kp * pc->d - cfg.lateral_kd * drift;
  return std::clamp(steer, cfg.steer_min, cfg.steer_max);
}

double pursuit_steer(const world::VehicleState& state, const world::Path& lane, double lookahead,
                     const DynamicsConfig& cfg) {
  const auto pc = lane.try_project(state.position());
  if (!pc) return 0.0;
  const world::Vec2 goal = lane.point_at(pc->s + lookahead);
  const world::Vec2 delta = goal - state.position();
  const double ld = delta.norm();
  if (ld < 1e-9) return 0.0;
  const double bearing = world::wrap_angle(std::atan2(delta.y, delta.x) - state.psi);
  const double wheelbase = cfg.lf + cfg.lr;
  const double steer = std::atan(2.0 * wheelbase * std::sin(bearing) / ld);
  return std::clamp(steer, cfg.steer_min, cfg.steer_max);
}

ControlInput nominal_control(const world::VehicleState& state, int action, const LaneContext& lanes,
                             const ActionSpace& space, const DynamicsConfig& cfg) {
  if (action == kEmergencyStop) return emergency_stop(cfg);
  if (!space.valid(action)) throw std::out_of_range("action index out of range");
  if (lanes.current == nullptr) throw std::invalid_argument("lane context has no current lane");

  const Interval range = action_accel_range(action, space, cfg);
  ControlInput u;
  switch (action) {
    case kKeepLaneSpeed:
    case kChangeLaneLeft:
    case kChangeLaneRight: {
      const double ref = lanes.reference_speed.value_or(state.v);
      u.accel = range.clamp(cfg.speed_kp * (ref - state.v));
      break;
    }
    case kBrake:
      u.accel = range.lo;
      break;
    default:
      u.accel = (range.lo + range.hi) / 2.0;
      break;
  }

  if (action == kChangeLaneLeft || action == kChangeLaneRight) {
    const world::Path* target = action == kChangeLaneLeft ? lanes.left : lanes.right;
    if (target == nullptr)
      throw NoAdjacentLane(std::string("no lane to the ") +
                           (action == kChangeLaneLeft ? "left" : "right") + " of " +
                           lanes.current->lane_id());
    u.steer = pursuit_steer(state, *target, cfg.lane_change_lookahead, cfg);
  } else {
    u.steer = lane_keeping_steer(state, *lanes.current, cfg);
  }
  u.accel = std::clamp(u.accel, cfg.accel_min, cfg.accel_max);
  return u;
}

}  // namespace cavsafe::dyn
