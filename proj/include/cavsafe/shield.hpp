#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cavsafe/dynamics.hpp"
#include "cavsafe/qp.hpp"
#include "cavsafe/world.hpp"

namespace cavsafe::shield {

enum class ShieldMode { Off, Plain, Robust };

std::string to_string(ShieldMode mode);
ShieldMode mode_from_string(const std::string& name);  // off|plain|robust

struct ShieldConfig {
  double c1 = 1.0;         // s, reaction delay
  double c2 = 1.0;         // braking-differential weight
  double c3 = 2.0;         // m, standstill margin
  double gamma_cbf = 1.0;  // 1/s, linear class-K gain
  double epsilon = 0.0;    // m, assumed 2-norm bound of observation errors
  double lipschitz_sum = 0.0;  // 1/s
  double horizon = 60.0;   // m, pseudo-car generation range
  double ego_max_braking = 6.0;     // |max(alpha)|
  double target_max_braking = 6.0;  // |max(alpha_f)|, |max(alpha_r)|
  double discretization_margin = 0.0;  // m/s, added to front constraints
  double lane_width = 3.5;
  double collision_penalty = -200.0;  // P^Col per collision event
  double emergency_penalty = -10.0;   // P^SAS per emergency-stop step
  bool buffer_enabled = true;         // false: plain shield, A = 0
};

/// Margin that absorbs the second-order term of one explicit-Euler step,
/// c2 * a_bound^2 * dt / (2 |max(alpha)|).
double euler_margin(const ShieldConfig& cfg, const dyn::DynamicsConfig& dyn);

/// D_SF(v, v_f) = c1 v + c2 (v^2 / 2|a| - v_f^2 / 2|a_f|) + c3.
double safety_distance_follow(double v, double v_f, const ShieldConfig& cfg);
/// D_SL(v, v_r) = c1 v_r + c2 (v_r^2 / 2|a_r| - v^2 / 2|a|) + c3.
double safety_distance_lead(double v, double v_r, const ShieldConfig& cfg);

enum class Role { Front, Rear };

/// Longitudinal relation to one (possibly virtual) vehicle on the ego path.
/// `gap` is bumper to bumper.
struct TargetGap {
  Role role = Role::Front;
  double gap = 0.0;
  double speed = 0.0;
  int source_id = -1;
};

/// h_f = gap - D_SF or h_l = gap - D_SL; h >= 0 is the safe set.
double barrier_value(double ego_speed, const TargetGap& target, const ShieldConfig& cfg);
std::vector<double> barrier_values(double ego_speed, const std::vector<TargetGap>& targets,
                                   const ShieldConfig& cfg);

/// A(h, eps) = lipschitz_sum * epsilon (zero when the buffer is disabled).
double robust_buffer(const ShieldConfig& cfg);

/// Closed-form pieces of dh/dt + L_f h + L_g h u for one barrier, with steering
/// effects neglected: only the acceleration enters through L_g h.
struct BarrierConstraint {
  TargetGap target;
  double h = 0.0;
  double dh_dt = 0.0;     // explicit time dependence (target motion)
  double lf_h = 0.0;
  double lg_h_accel = 0.0;
  bool entry = false;  // target lane of a lane change: must already hold h >= 0
};

BarrierConstraint make_constraint(double ego_speed, const TargetGap& target,
                                  const ShieldConfig& cfg);

/// dh/dt + L_f h + L_g h u - A - margin >= -gamma h as a . u >= b.
qp::LinearConstraint to_linear_constraint(const BarrierConstraint& c, const ShieldConfig& cfg,
                                          int id);

/// Left side of the constraint plus gamma h, at a given acceleration. Non-negative
/// iff the constraint (without buffer and margin) holds.
double constraint_slack(const BarrierConstraint& c, double accel, const ShieldConfig& cfg);

/// A crossing vehicle mapped onto the ego path as a virtual same-lane vehicle.
struct PseudoCar {
  double s = 0.0;       // arc-length on the ego path
  double v = 0.0;       // speed along the ego path
  int source_id = -1;
  double extent = world::kDefaultWidth;  // footprint along the ego path
  double conflict_s = 0.0;  // s_c
  double to_conflict = 0.0;  // d_t
  double target_length = world::kDefaultLength;
};

/// Transforms `target` onto `ego_path`. s = s_c - d_t where s_c is the conflict
/// point's arc-length and d_t the target's remaining distance to it.
std::optional<PseudoCar> pseudo_car_transform(const world::Path& ego_path, double ego_s,
                                              const world::Observation& target,
                                              const ShieldConfig& cfg);

/// Inputs every per-action check needs.
struct ShieldContext {
  const world::RoadMap* map = nullptr;
  dyn::ActionSpace space;
  dyn::DynamicsConfig dynamics;
};

struct ActionVerdict {
  int action = 0;
  bool safe = false;
  bool lane_available = true;
  dyn::ControlInput nominal;
  dyn::ControlInput filtered;  // u*, valid when safe
  int binding_id = -1;         // source vehicle of the binding/violated constraint
  std::vector<BarrierConstraint> constraints;
};

/// Barrier set H for `action`: current-lane front/rear, target-lane front/rear
/// for lane changes, and front pseudo cars for crossing traffic. A lane change is
/// refused outright when a target-lane barrier is already negative.
std::vector<BarrierConstraint> assemble_constraints(const world::AgentState& agent, int action,
                                                    const ShieldContext& ctx,
                                                    const ShieldConfig& cfg);

/// Safe iff the CBF-QP is feasible. Rear barriers of lanes the ego already occupies
/// shape u* but are dropped when they alone make the QP infeasible.
ActionVerdict check_action_safe(const world::AgentState& agent, int action,
                                const ShieldContext& ctx, const ShieldConfig& cfg);

struct AgentOutcome {
  int agent_id = 0;
  std::vector<int> safe_set;  // {kEmergencyStop} when nothing passed
  std::vector<ActionVerdict> verdicts;
  bool emergency = false;
  double safety_reward = 0.0;  // P^SAS part of r^s
};

struct SafetyOutcome {
  std::vector<AgentOutcome> agents;
};

/// Loops all agents x all actions; an empty safe set becomes [Emergency_stop].
/// ShieldMode::Off marks every available action safe with u* = nominal.
SafetyOutcome safety_shield(const world::JointState& joint, const ShieldContext& ctx,
                            const ShieldConfig& cfg, ShieldMode mode = ShieldMode::Robust);

/// Empirical Lipschitz constant of the constraint's left side (plus gamma h) with
/// respect to travel-axis observation errors, over states reachable under `dyn`,
/// scaled by `safety_factor`.
double estimate_lipschitz_sum(const ShieldConfig& cfg, const dyn::DynamicsConfig& dyn,
                              std::uint64_t seed = 0x5eedULL, int samples = 10000,
                              double safety_factor = 1.5);

}  // namespace cavsafe::shield
