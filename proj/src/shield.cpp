#include "cavsafe/shield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cavsafe::shield {

namespace {

constexpr double kAlignedHeading = std::numbers::pi / 4.0;

struct LaneTargets {
  std::optional<TargetGap> front;
  std::optional<TargetGap> rear;
};

// Lateral look-ahead used to catch vehicles already drifting into a lane.
constexpr double kLanePreview = 1.0;  // s

// Half the lateral extent of a footprint rotated by dpsi against the lane.
double lateral_half_extent(double length, double width, double dpsi) {
  return (width * std::abs(std::cos(dpsi)) + length * std::abs(std::sin(dpsi))) / 2.0;
}

bool in_lane_strip(double d, double half_extent, const ShieldConfig& cfg) {
  return std::abs(d) < cfg.lane_width / 2.0 + half_extent;
}

// merge_from: lane index beyond the target of a lane change. Connected vehicles tracking
// it with a lower id than the ego may start the mirrored lane change in the same step.
LaneTargets lane_targets(const world::AgentState& agent, const world::Path& lane, int lane_index,
                         const ShieldConfig& cfg, std::optional<int> merge_from = std::nullopt) {
  LaneTargets out;
  const auto ego_pc = lane.try_project(agent.self_state.position());
  if (!ego_pc) return out;
  const double ego_s = ego_pc->s;
  double best_front = std::numeric_limits<double>::infinity();
  double best_rear = -std::numeric_limits<double>::infinity();

  const auto visit = [&](const world::Observation& o) {
    const world::Vec2 pos = o.world_position();
    const auto pc = lane.try_project(pos);
    if (!pc) return;
    const double dpsi = world::wrap_angle(o.psi - lane.heading_at(pc->s));
    if (std::abs(dpsi) >= kAlignedHeading) return;
    const double half_extent = lateral_half_extent(o.length, o.width, dpsi);
    bool member = in_lane_strip(pc->d, half_extent, cfg) ||
                  in_lane_strip(pc->d + o.speed() * std::sin(dpsi) * kLanePreview, half_extent, cfg);
    if (!member && o.connected && o.lane_detect) {
      member = *o.lane_detect == lane_index ||
               (merge_from && *o.lane_detect == *merge_from && o.target_id < agent.agent_id);
    }
    if (!member) return;
    const double speed = o.v.x * std::cos(dpsi) - o.v.y * std::sin(dpsi);
    const double half = (agent.self_state.length + o.length) / 2.0;
    if (pc->s >= ego_s) {
      if (pc->s < best_front) {
        best_front = pc->s;
        out.front = TargetGap{Role::Front, pc->s - ego_s - half, speed, o.target_id};
      }
    } else if (pc->s > best_rear) {
      best_rear = pc->s;
      out.rear = TargetGap{Role::Rear, ego_s - pc->s - half, speed, o.target_id};
    }
  };
  for (const auto& o : agent.cavs) visit(o);
  for (const auto& o : agent.ucvs) visit(o);
  return out;
}

}  // namespace

std::string to_string(ShieldMode mode) {
  switch (mode) {
    case ShieldMode::Off: return "off";
    case ShieldMode::Plain: return "plain";
    case ShieldMode::Robust: return "robust";
  }
  return "off";
}

ShieldMode mode_from_string(const std::string& name) {
  if (name == "off") return ShieldMode::Off;
  if (name == "plain") return ShieldMode::Plain;
  if (name == "robust") return ShieldMode::Robust;
  throw std::invalid_argument("unknown shield mode: " + name);
}

double euler_margin(const ShieldConfig& cfg, const dyn::DynamicsConfig& dyn) {
  const double a_bound = std::max(std::abs(dyn.accel_min), std::abs(dyn.accel_max));
  return cfg.c2 * a_bound * a_bound * dyn.dt / (2.0 * cfg.ego_max_braking);
}

double safety_distance_follow(double v, double v_f, const ShieldConfig& cfg) {
  return cfg.c1 * v +
         cfg.c2 * (v * v / (2.0 * cfg.ego_max_braking) -
                   v_f * v_f / (2.0 * cfg.target_max_braking)) +
         cfg.c3;
}

double safety_distance_lead(double v, double v_r, const ShieldConfig& cfg) {
  return cfg.c1 * v_r +
         cfg.c2 * (v_r * v_r / (2.0 * cfg.target_max_braking) -
                   v * v / (2.0 * cfg.ego_max_braking)) +
         cfg.c3;
}

double barrier_value(double ego_speed, const TargetGap& target, const ShieldConfig& cfg) {
  if (target.role == Role::Front)
    return target.gap - safety_distance_follow(ego_speed, target.speed, cfg);
  return target.gap - safety_distance_lead(ego_speed, target.speed, cfg);
}

std::vector<double> barrier_values(double ego_speed, const std::vector<TargetGap>& targets,
                                   const ShieldConfig& cfg) {
  std::vector<double> out;
  out.reserve(targets.size());
  for (const auto& t : targets) out.push_back(barrier_value(ego_speed, t, cfg));
  return out;
}

double robust_buffer(const ShieldConfig& cfg) {
  return cfg.buffer_enabled ? cfg.lipschitz_sum * cfg.epsilon : 0.0;
}

BarrierConstraint make_constraint(double ego_speed, const TargetGap& target,
                                  const ShieldConfig& cfg) {
  BarrierConstraint c;
  c.target = target;
  c.h = barrier_value(ego_speed, target, cfg);
  if (target.role == Role::Front) {
    c.dh_dt = target.speed;
    c.lf_h = -ego_speed;
    c.lg_h_accel = -(cfg.c1 + cfg.c2 * ego_speed / cfg.ego_max_braking);
  } else {
    c.dh_dt = -target.speed;
    c.lf_h = ego_speed;
    c.lg_h_accel = cfg.c2 * ego_speed / cfg.ego_max_braking;
  }
  return c;
}

qp::LinearConstraint to_linear_constraint(const BarrierConstraint& c, const ShieldConfig& cfg,
                                          int id) {
  const double margin = c.target.role == Role::Front ? cfg.discretization_margin : 0.0;
  qp::LinearConstraint lc;
  lc.a = Eigen::Vector2d(c.lg_h_accel, 0.0);
  lc.b = -cfg.gamma_cbf * c.h - c.dh_dt - c.lf_h + robust_buffer(cfg) + margin;
  lc.id = id;
  return lc;
}

double constraint_slack(const BarrierConstraint& c, double accel, const ShieldConfig& cfg) {
  return c.dh_dt + c.lf_h + c.lg_h_accel * accel + cfg.gamma_cbf * c.h;
}

std::optional<PseudoCar> pseudo_car_transform(const world::Path& ego_path, double ego_s,
                                              const world::Observation& target,
                                              const ShieldConfig& cfg) {
  const world::Vec2 pos = target.world_position();
  const auto hit = ego_path.intersect_line(pos, world::heading_unit(target.psi));
  if (!hit) return std::nullopt;
  const auto [s_c, d_t] = *hit;
  const double dpsi = world::wrap_angle(target.psi - ego_path.heading_at(s_c));
  if (std::abs(dpsi) < kAlignedHeading || std::abs(dpsi) > std::numbers::pi - kAlignedHeading)
    return std::nullopt;
  if (s_c - ego_s > cfg.horizon || d_t > cfg.horizon) return std::nullopt;
  const double clearance = target.length / 2.0 + cfg.lane_width / 2.0;
  const double speed = target.speed();
  if (d_t < -clearance) return std::nullopt;                 // passed and receding
  if (d_t > clearance && !(speed > 0.0)) return std::nullopt;  // not approaching
  return PseudoCar{s_c - d_t, speed, target.target_id, target.width, s_c, d_t, target.length};
}

std::vector<BarrierConstraint> assemble_constraints(const world::AgentState& agent, int action,
                                                    const ShieldContext& ctx,
                                                    const ShieldConfig& cfg) {
  std::vector<BarrierConstraint> out;
  const double v = agent.self_state.v;
  const world::Road& road = ctx.map->roads.at(static_cast<std::size_t>(agent.lane.road));
  const int lane_count = static_cast<int>(road.lanes.size());
  const auto add_lane = [&](int index, std::optional<int> merge_from, bool entry) {
    const LaneTargets lt =
        lane_targets(agent, road.lanes[static_cast<std::size_t>(index)], index, cfg, merge_from);
    for (const auto& gap : {lt.front, lt.rear}) {
      if (!gap) continue;
      out.push_back(make_constraint(v, *gap, cfg));
      out.back().entry = entry;
    }
  };
  // Mid lane change the ego may still sit in a lane other than the one it tracks.
  std::vector<int> ego_lanes{agent.lane.lane};
  const world::VehicleState& ego = agent.self_state;
  for (int k = 0; k < lane_count; ++k) {
    if (k == agent.lane.lane) continue;
    const world::Path& other = road.lanes[static_cast<std::size_t>(k)];
    const auto pc = other.try_project(ego.position());
    if (!pc) continue;
    const double dpsi = world::wrap_angle(ego.psi - other.heading_at(pc->s));
    if (in_lane_strip(pc->d, lateral_half_extent(ego.length, ego.width, dpsi), cfg)) ego_lanes.push_back(k);
  }
  for (int k : ego_lanes) add_lane(k, std::nullopt, false);
  if (action == dyn::kChangeLaneLeft || action == dyn::kChangeLaneRight) {
    const int step = action == dyn::kChangeLaneLeft ? 1 : -1;
    const int target = agent.lane.lane + step;
    if (target >= 0 && target < lane_count) {
      const int beyond = target + step;
      add_lane(target, beyond >= 0 && beyond < lane_count ? std::optional<int>(beyond) : std::nullopt,
               true);
    }
  }

  for (int k : ego_lanes) {
    const world::Path& path = road.lanes[static_cast<std::size_t>(k)];
    const auto ego_pc = path.try_project(ego.position());
    if (!ego_pc) continue;
    const auto visit = [&](const world::Observation& o) {
      const auto pc = pseudo_car_transform(path, ego_pc->s, o, cfg);
      if (!pc) return;
      if (pc->s <= ego_pc->s) {
        // Ego gets there first; keep the crossing vehicle only if the ego cannot
        // clear the conflict zone a reaction time before it arrives.
        const double clear_dist = pc->conflict_s + pc->extent / 2.0 + ego.length / 2.0 - ego_pc->s;
        if (clear_dist <= 0.0) return;
        const double arrive_dist = pc->to_conflict - pc->target_length / 2.0 - ego.width / 2.0;
        const double t_clear = v > 0.0 ? clear_dist / v : std::numeric_limits<double>::infinity();
        const double t_arrive = pc->v > 0.0 ? arrive_dist / pc->v : std::numeric_limits<double>::infinity();
        if (t_clear + cfg.c1 < t_arrive) return;
      }
      const double gap = pc->s - ego_pc->s - (ego.length + pc->extent) / 2.0;
      out.push_back(make_constraint(v, TargetGap{Role::Front, gap, pc->v, pc->source_id}, cfg));
    };
    for (const auto& o : agent.cavs) visit(o);
    for (const auto& o : agent.ucvs) visit(o);
  }
  return out;
}

ActionVerdict check_action_safe(const world::AgentState& agent, int action,
                                const ShieldContext& ctx, const ShieldConfig& cfg) {
  if (ctx.map == nullptr) throw std::invalid_argument("shield context has no road map");
  ActionVerdict verdict;
  verdict.action = action;

  dyn::LaneContext lanes;
  lanes.current = &ctx.map->lane(agent.lane);
  lanes.left = ctx.map->left_of(agent.lane);
  lanes.right = ctx.map->right_of(agent.lane);
  try {
    verdict.nominal = dyn::nominal_control(agent.self_state, action, lanes, ctx.space, ctx.dynamics);
  } catch (const dyn::NoAdjacentLane&) {
    verdict.lane_available = false;
    return verdict;
  }

  verdict.constraints = assemble_constraints(agent, action, ctx, cfg);
  for (const auto& c : verdict.constraints) {
    if (c.entry && c.h < 0.0) {
      verdict.binding_id = c.target.source_id;
      return verdict;
    }
  }

  const dyn::Interval accel = dyn::action_accel_range(action, ctx.space, ctx.dynamics);
  qp::QpProblem problem;
  problem.u0 = Eigen::Vector2d(verdict.nominal.accel, verdict.nominal.steer);
  problem.bounds[0] = {std::max(accel.lo, ctx.dynamics.accel_min),
                       std::min(accel.hi, ctx.dynamics.accel_max)};
  problem.bounds[1] = {ctx.dynamics.steer_min, ctx.dynamics.steer_max};
  for (std::size_t i = 0; i < verdict.constraints.size(); ++i)
    problem.constraints.push_back(
        to_linear_constraint(verdict.constraints[i], cfg, static_cast<int>(i)));

  qp::QpResult result = qp::solve(problem);
  if (!qp::is_feasible(result)) {
    // Same-lane followers keep this gap with their own front barrier; retry without them.
    qp::QpProblem relaxed = problem;
    relaxed.constraints.clear();
    for (std::size_t i = 0; i < verdict.constraints.size(); ++i) {
      const auto& c = verdict.constraints[i];
      if (c.target.role == Role::Rear && !c.entry) continue;
      relaxed.constraints.push_back(problem.constraints[i]);
    }
    if (relaxed.constraints.size() < problem.constraints.size()) result = qp::solve(relaxed);
  }
  if (const auto* ok = std::get_if<qp::Feasible>(&result)) {
    verdict.safe = true;
    verdict.filtered = {ok->u[0], ok->u[1]};
    if (!ok->active_ids.empty())
      verdict.binding_id = verdict.constraints[static_cast<std::size_t>(ok->active_ids.front())]
                               .target.source_id;
    return verdict;
  }

  // Report the first barrier that no admissible acceleration can satisfy on its own.
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    const auto& lc = problem.constraints[i];
    const double best = std::max(lc.a[0] * problem.bounds[0].lo, lc.a[0] * problem.bounds[0].hi);
    if (best < lc.b) {
      verdict.binding_id = verdict.constraints[i].target.source_id;
      return verdict;
    }
  }
  if (!verdict.constraints.empty()) verdict.binding_id = verdict.constraints.front().target.source_id;
  return verdict;
}

SafetyOutcome safety_shield(const world::JointState& joint, const ShieldContext& ctx,
                            const ShieldConfig& cfg, ShieldMode mode) {
  ShieldConfig effective = cfg;
  if (mode == ShieldMode::Plain) effective.buffer_enabled = false;

  SafetyOutcome outcome;
  outcome.agents.reserve(joint.agents.size());
  for (const auto& agent : joint.agents) {
    AgentOutcome ao;
    ao.agent_id = agent.agent_id;
    for (int a = 0; a < ctx.space.size(); ++a) {
      ActionVerdict v;
      if (mode == ShieldMode::Off) {
        v.action = a;
        dyn::LaneContext lanes{&ctx.map->lane(agent.lane), ctx.map->left_of(agent.lane),
                               ctx.map->right_of(agent.lane), std::nullopt};
        try {
          v.nominal = dyn::nominal_control(agent.self_state, a, lanes, ctx.space, ctx.dynamics);
          v.filtered = v.nominal;
          v.safe = true;
        } catch (const dyn::NoAdjacentLane&) {
          v.lane_available = false;
        }
      } else {
        v = check_action_safe(agent, a, ctx, effective);
      }
      if (v.safe) ao.safe_set.push_back(a);
      ao.verdicts.push_back(std::move(v));
    }
    if (ao.safe_set.empty()) {
      ao.safe_set = {dyn::kEmergencyStop};
      ao.emergency = true;
      ao.safety_reward = cfg.emergency_penalty;
    }
    outcome.agents.push_back(std::move(ao));
  }
  return outcome;
}

double estimate_lipschitz_sum(const ShieldConfig& cfg, const dyn::DynamicsConfig& dyn,
                              std::uint64_t seed, int samples, double safety_factor) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> speed(0.0, dyn.speed_max);
  std::uniform_real_distribution<double> gap(0.0, 100.0);
  std::uniform_real_distribution<double> accel(dyn.accel_min, dyn.accel_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = cfg.epsilon > 0.0 ? cfg.epsilon : 1.0;

  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Role role = (i % 2 == 0) ? Role::Front : Role::Rear;
    const double v = speed(rng);
    const TargetGap base{role, gap(rng), speed(rng), 0};
    const double a = accel(rng);
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    const double r = radius * std::max(unit(rng), 1e-6);
    const double e_l = r * std::cos(angle), e_v = r * std::sin(angle);

    TargetGap moved = base;
    moved.gap += role == Role::Front ? e_l : -e_l;
    moved.speed += e_v;
    const double f0 = constraint_slack(make_constraint(v, base, cfg), a, cfg);
    const double f1 = constraint_slack(make_constraint(v, moved, cfg), a, cfg);
    worst = std::max(worst, std::abs(f1 - f0) / r);
  }
  return worst * safety_factor;
}

}  // namespace cavsafe::shield
