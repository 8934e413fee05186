#include <doctest.h>

#include <random>

#include "../support/crossing.hpp"
#include "../support/follow.hpp"
#include "cavsafe/harness/config.hpp"
#include "cavsafe/shield.hpp"

using namespace cavsafe;
using shield::Role;
using shield::TargetGap;

namespace {

shield::ShieldConfig unit_cfg() {
  shield::ShieldConfig c;
  c.c1 = 1.0;
  c.c2 = 1.0;
  c.c3 = 2.0;
  c.ego_max_braking = 6.0;
  c.target_max_braking = 6.0;
  return c;
}

world::RoadMap three_lanes() {
  world::RoadMap map;
  world::Road road;
  for (int k = 0; k < 3; ++k) road.lanes.push_back(world::Path({{-100.0, 3.5 * k}, {3000.0, 3.5 * k}}, "l" + std::to_string(k)));
  map.roads.push_back(road);
  return map;
}

world::VehicleState vehicle(int id, double x, double y, double v, bool connected = false) {
  world::VehicleState s;
  s.id = id;
  s.x = x;
  s.y = y;
  s.v = v;
  s.connected = connected;
  return s;
}

world::AgentState agent(const world::VehicleState& ego, int lane, std::vector<world::VehicleState> others) {
  world::AgentState a;
  a.agent_id = ego.id;
  a.self_state = ego;
  a.self = world::observe(ego, {});
  a.lane = {0, lane};
  for (const auto& o : others) a.ucvs.push_back(world::observe(o, {}));
  return a;
}

// required a <= bound for a front barrier, from the closed forms written out by hand
double front_accel_bound(double v, double v_f, double gap, const shield::ShieldConfig& c) {
  const double dsf = c.c1 * v + c.c2 * (v * v / 12.0 - v_f * v_f / 12.0) + c.c3;
  const double h = gap - dsf;
  const double lg = -(c.c1 + c.c2 * v / 6.0);
  const double rhs = -c.gamma_cbf * h - v_f + v + c.lipschitz_sum * c.epsilon * c.buffer_enabled +
                     c.discretization_margin;
  return rhs / lg;
}

}  // namespace

TEST_CASE("safety-following distance examples") {
  const auto c = unit_cfg();
  CHECK(shield::safety_distance_follow(0, 0, c) == doctest::Approx(2.0));
  CHECK(shield::safety_distance_follow(10, 10, c) == doctest::Approx(12.0));
  CHECK(shield::safety_distance_follow(10, 0, c) == doctest::Approx(10 + 100.0 / 12 + 2));
  CHECK(shield::safety_distance_follow(0, 20, c) < c.c3);
}

TEST_CASE("safety-leading distance examples") {
  const auto c = unit_cfg();
  CHECK(shield::safety_distance_lead(0, 0, c) == doctest::Approx(2.0));
  CHECK(shield::safety_distance_lead(10, 10, c) == doctest::Approx(12.0));
  CHECK(shield::safety_distance_lead(12, 8, c) == doctest::Approx(8 + (64.0 - 144.0) / 12 + 2));
}

TEST_CASE("barrier values") {
  const auto c = unit_cfg();
  CHECK(shield::barrier_value(10, {Role::Front, 30, 10, 1}, c) == doctest::Approx(18.0));
  CHECK(shield::barrier_value(10, {Role::Front, 12, 10, 1}, c) == doctest::Approx(0.0));
  CHECK(shield::barrier_value(12, {Role::Rear, 10, 8, 1}, c) == doctest::Approx(10 - 10.0 / 3));
  const auto hs = shield::barrier_values(10, {{Role::Front, 30, 10, 1}, {Role::Rear, 10, 10, 2}}, c);
  CHECK(hs[0] == doctest::Approx(18.0));
  CHECK(hs[1] == doctest::Approx(-2.0));
}

TEST_CASE("robust buffer") {
  auto c = unit_cfg();
  c.lipschitz_sum = 1.5;
  c.epsilon = 0.0;
  CHECK(shield::robust_buffer(c) == 0.0);
  c.epsilon = 2.0;
  CHECK(shield::robust_buffer(c) == doctest::Approx(3.0));
  const double a = shield::robust_buffer(c);
  c.epsilon = 4.0;
  CHECK(shield::robust_buffer(c) == doctest::Approx(2 * a));
  c.buffer_enabled = false;
  CHECK(shield::robust_buffer(c) == 0.0);
}

TEST_CASE("constraint closed forms match the time derivative of h") {
  const auto c = unit_cfg();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> v(0.5, 20), gap(0, 60), acc(-6, 4);
  const double dt = 1e-6;
  for (int k = 0; k < 200; ++k) {
    const double ve = v(rng), vt = v(rng), g = gap(rng), a = acc(rng);
    for (Role role : {Role::Front, Role::Rear}) {
      const TargetGap t{role, g, vt, 3};
      const auto bc = shield::make_constraint(ve, t, c);
      // target at constant speed, ego accelerating at a
      const double closing = role == Role::Front ? vt - ve : ve - vt;
      const TargetGap later{role, g + closing * dt, vt, 3};
      const double dh = (shield::barrier_value(ve + a * dt, later, c) - shield::barrier_value(ve, t, c)) / dt;
      CHECK(bc.dh_dt + bc.lf_h + bc.lg_h_accel * a == doctest::Approx(dh).epsilon(1e-4));
      CHECK(shield::constraint_slack(bc, a, c) == doctest::Approx(dh + c.gamma_cbf * bc.h).epsilon(1e-4));
    }
  }
  const auto f = shield::make_constraint(10, {Role::Front, 30, 8, 1}, c);
  CHECK(f.dh_dt == 8.0);
  CHECK(f.lf_h == -10.0);
  CHECK(f.lg_h_accel == doctest::Approx(-(1 + 10.0 / 6)));
}

TEST_CASE("linear constraint carries buffer and margin") {
  auto c = unit_cfg();
  c.lipschitz_sum = 1.5;
  c.epsilon = 2.0;
  c.discretization_margin = 0.25;
  const auto bc = shield::make_constraint(10, {Role::Front, 30, 10, 1}, c);
  const auto lc = shield::to_linear_constraint(bc, c, 4);
  CHECK(lc.a[0] == doctest::Approx(bc.lg_h_accel));
  CHECK(lc.a[1] == 0.0);
  CHECK(lc.b == doctest::Approx(-18.0 - 10 + 10 + 3.0 + 0.25));
  CHECK(lc.id == 4);
  const auto rear = shield::to_linear_constraint(shield::make_constraint(10, {Role::Rear, 30, 10, 1}, c), c, 5);
  CHECK(rear.b == doctest::Approx(-18.0 + 10 - 10 + 3.0));
}

TEST_CASE("pseudo-car transform examples") {
  const world::Path lane({{0, 0}, {500, 0}}, "ego");
  const auto c = unit_cfg();
  world::VehicleState t;
  t.id = 9;
  t.x = 35;
  t.y = -20;
  t.psi = std::numbers::pi / 2;
  t.v = 10;
  auto pc = shield::pseudo_car_transform(lane, 0.0, world::observe(t, {}), c);
  REQUIRE(pc);
  CHECK(pc->s == doctest::Approx(15.0));
  CHECK(pc->v == doctest::Approx(10.0));
  CHECK(pc->source_id == 9);
  CHECK(pc->conflict_s == doctest::Approx(35.0));

  t.y = 0;
  pc = shield::pseudo_car_transform(lane, 0.0, world::observe(t, {}), c);
  REQUIRE(pc);
  CHECK(pc->s == doctest::Approx(35.0));

  t.y = 5;
  CHECK_FALSE(shield::pseudo_car_transform(lane, 0.0, world::observe(t, {}), c));

  t.y = -20;
  t.x = 90;  // conflict beyond the horizon
  CHECK_FALSE(shield::pseudo_car_transform(lane, 0.0, world::observe(t, {}), c));

  t.x = 35;
  t.psi = 0.0;  // same direction: not a crossing
  CHECK_FALSE(shield::pseudo_car_transform(lane, 0.0, world::observe(t, {}), c));
}

TEST_CASE("far front vehicle leaves the nominal input unchanged") {
  const auto map = three_lanes();
  const shield::ShieldContext ctx{&map, {}, {}};
  const auto cfg = unit_cfg();
  const auto ego = vehicle(0, 0, 3.5, 10, true);
  const auto a = agent(ego, 1, {vehicle(5, 66.5, 3.5, 10)});  // gap 62: h_f = 50
  const auto v = shield::check_action_safe(a, dyn::kKeepLaneSpeed, ctx, cfg);
  REQUIRE(v.safe);
  CHECK(v.constraints.size() == 1);
  CHECK(v.constraints[0].h == doctest::Approx(50.0));
  CHECK(v.filtered.accel == doctest::Approx(v.nominal.accel));
  CHECK(v.filtered.steer == doctest::Approx(v.nominal.steer));
}

TEST_CASE("throttle toward a close leader is unsafe") {
  const auto map = three_lanes();
  const shield::ShieldContext ctx{&map, {}, {}};
  const auto cfg = unit_cfg();
  // gap 8 < D_SF = 12: required a <= -(gamma h)/lg is below every throttle interval
  const auto a = agent(vehicle(0, 0, 3.5, 10, true), 1, {vehicle(5, 12.5, 3.5, 10)});
  const double bound = front_accel_bound(10, 10, 8, cfg);
  CHECK(bound < 0.0);
  for (int act = dyn::kFirstThrottle; act < 7; ++act)
    CHECK_FALSE(shield::check_action_safe(a, act, ctx, cfg).safe);
  const auto brake = shield::check_action_safe(a, dyn::kBrake, ctx, cfg);
  CHECK(brake.safe == (bound >= -3.0));
  if (brake.safe) CHECK(brake.filtered.accel <= bound + 1e-9);
}

TEST_CASE("per-action verdicts match a hand-solved interval oracle") {
  const auto map = three_lanes();
  dyn::DynamicsConfig dc;
  const shield::ShieldContext ctx{&map, {}, dc};
  auto cfg = unit_cfg();
  cfg.discretization_margin = 0.15;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> v(0, 15), gap(1, 40);
  for (int k = 0; k < 300; ++k) {
    const double ve = v(rng), vf = v(rng), g = gap(rng);
    const auto a = agent(vehicle(0, 0, 3.5, ve, true), 1, {vehicle(5, g + 4.5, 3.5, vf)});
    const double bound = front_accel_bound(ve, vf, g, cfg);
    for (int act : {0, 3, 4, 5, 6}) {
      const auto range = dyn::action_accel_range(act, {}, dc);
      CHECK(shield::check_action_safe(a, act, ctx, cfg).safe == (range.lo <= bound));
    }
  }
}

TEST_CASE("larger epsilon never grows the safe set") {
  const auto map = three_lanes();
  const shield::ShieldContext ctx{&map, {}, {}};
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> v(0, 15), gap(-2, 40), lane_y(-0.3, 0.3);
  for (int k = 0; k < 300; ++k) {
    const auto ego = vehicle(0, 0, 3.5 + lane_y(rng), v(rng), true);
    const auto a = agent(ego, 1,
                         {vehicle(5, gap(rng) + 4.5, 3.5, v(rng)), vehicle(6, -gap(rng) - 4.5, 3.5, v(rng)),
                          vehicle(7, gap(rng), 7.0, v(rng)), vehicle(8, -gap(rng), 0.0, v(rng))});
    auto lo = unit_cfg(), hi = unit_cfg();
    lo.lipschitz_sum = hi.lipschitz_sum = 2.0;
    lo.epsilon = 0.5;
    hi.epsilon = 2.0;
    for (int act = 0; act < 7; ++act)
      if (shield::check_action_safe(a, act, ctx, hi).safe) CHECK(shield::check_action_safe(a, act, ctx, lo).safe);
  }
}

TEST_CASE("lane change into a lane with a negative barrier is refused") {
  const auto map = three_lanes();
  const shield::ShieldContext ctx{&map, {}, {}};
  const auto cfg = unit_cfg();
  const auto a = agent(vehicle(0, 0, 3.5, 10, true), 1, {vehicle(5, 7.0, 7.0, 10)});
  const auto left = shield::check_action_safe(a, dyn::kChangeLaneLeft, ctx, cfg);
  CHECK_FALSE(left.safe);
  CHECK(left.binding_id == 5);
  CHECK(shield::check_action_safe(a, dyn::kChangeLaneRight, ctx, cfg).safe);
}

TEST_CASE("lane change at the road edge is unavailable") {
  const auto map = three_lanes();
  const shield::ShieldContext ctx{&map, {}, {}};
  const auto a = agent(vehicle(0, 0, 7.0, 10, true), 2, {});
  const auto v = shield::check_action_safe(a, dyn::kChangeLaneLeft, ctx, unit_cfg());
  CHECK_FALSE(v.safe);
  CHECK_FALSE(v.lane_available);
}

TEST_CASE("safety_shield outcomes") {
  const auto map = three_lanes();
  const shield::ShieldContext ctx{&map, {}, {}};
  auto cfg = unit_cfg();

  world::JointState open;
  open.agents.push_back(agent(vehicle(0, 0, 3.5, 10, true), 1, {}));
  auto out = shield::safety_shield(open, ctx, cfg);
  CHECK(out.agents[0].safe_set == std::vector<int>{0, 1, 2, 3, 4, 5, 6});
  CHECK_FALSE(out.agents[0].emergency);
  CHECK(out.agents[0].safety_reward == 0.0);

  // boxed in: leader nearly touching, nothing can satisfy the front barrier
  world::JointState boxed;
  boxed.agents.push_back(agent(vehicle(0, 0, 3.5, 14, true), 1,
                               {vehicle(5, 5.0, 3.5, 0), vehicle(6, 3.0, 7.0, 0), vehicle(7, 3.0, 0.0, 0)}));
  out = shield::safety_shield(boxed, ctx, cfg);
  CHECK(out.agents[0].safe_set == std::vector<int>{dyn::kEmergencyStop});
  CHECK(out.agents[0].emergency);
  CHECK(out.agents[0].safety_reward == cfg.emergency_penalty);

  // only BRAKE reaches below the KEEP authority: required bound in (-3, -1)
  double g = 10.0;
  while (front_accel_bound(10, 10, g, cfg) > -2.0) g -= 0.01;
  world::JointState single;
  single.agents.push_back(agent(vehicle(0, 0, 3.5, 10, true), 1, {vehicle(5, g + 4.5, 3.5, 10)}));
  out = shield::safety_shield(single, ctx, cfg);
  CHECK(out.agents[0].safe_set == std::vector<int>{dyn::kBrake});

  // shield off admits everything available
  out = shield::safety_shield(boxed, ctx, cfg, shield::ShieldMode::Off);
  CHECK(out.agents[0].safe_set.size() == 7);
}

TEST_CASE("emergency stop is full braking with zero steer") {
  const dyn::DynamicsConfig dc;
  const auto u = dyn::emergency_stop(dc);
  CHECK(u.accel == dc.accel_min);
  CHECK(u.steer == 0.0);
}

TEST_CASE("pseudo car and equivalent leader give identical verdicts") {
  const auto hc = harness::default_config();
  const auto map = crossing::main_road();
  const shield::ShieldContext ctx{&map, hc.actions, hc.dynamics};
  std::mt19937_64 rng(90);
  for (int k = 0; k < 200; ++k) {
    auto cfg = hc.shield;
    cfg.buffer_enabled = k % 2 == 0;
    const auto c = crossing::random_config(rng, cfg);
    const auto pc = crossing::pseudo(c, cfg);
    const auto a = crossing::crossing_agent(c), b = crossing::leader_agent(c, *pc);
    for (int act = 0; act < hc.actions.size(); ++act) {
      const auto va = shield::check_action_safe(a, act, ctx, cfg);
      const auto vb = shield::check_action_safe(b, act, ctx, cfg);
      REQUIRE(va.safe == vb.safe);
      if (va.safe) CHECK(va.filtered.accel == doctest::Approx(vb.filtered.accel));
    }
  }
}

TEST_CASE("shielded follower keeps h_f non-negative") {
  const auto st = follow::settings(0.0, shield::ShieldMode::Plain);
  std::mt19937_64 rng(8);
  for (int e = 0; e < 30; ++e) {
    const auto o = follow::run(follow::random_setup(rng, st.shield), st, 100 + e);
    CHECK(o.violations == 0);
    CHECK(o.collisions == 0);
  }
}

TEST_CASE("robust shield absorbs bounded errors the plain shield does not") {
  auto robust = follow::settings(2.0, shield::ShieldMode::Robust);
  auto plain = follow::settings(2.0, shield::ShieldMode::Plain);
  std::mt19937_64 rng(15);
  int plain_hit = 0;
  for (int e = 0; e < 20; ++e) {
    const auto s = follow::marginal_setup(rng, robust.shield);
    const double err = follow::max_error_for(2.0);
    robust.schedule = plain.schedule = perturb::PerturbationSchedule::target_vehicles({1}, {err}, err, 2.0);
    const auto r = follow::run(s, robust, e), p = follow::run(s, plain, e);
    CHECK(r.collisions == 0);
    CHECK(r.violations == 0);
    plain_hit += p.violations > 0;
  }
  CHECK(plain_hit >= 2);
}

TEST_CASE("lipschitz estimate bounds the constraint sensitivity") {
  shield::ShieldConfig c = unit_cfg();
  c.epsilon = 2.0;
  const dyn::DynamicsConfig dc;
  const double L = shield::estimate_lipschitz_sum(c, dc);
  // Rear barrier dominates: d slack / d gap = gamma, d slack / d v_r = -1 - gamma (c1 + c2 v_r / |a_r|).
  // Secant over a radius-eps step at v_max bounds it from above.
  const double tangent = std::hypot(c.gamma_cbf, 1 + c.gamma_cbf * (c.c1 + c.c2 * dc.speed_max / 6.0));
  const double secant = std::hypot(c.gamma_cbf, 1 + c.gamma_cbf * (c.c1 + c.c2 * (2 * dc.speed_max + c.epsilon) / 12.0));
  CHECK(L >= 0.9 * 1.5 * tangent);
  CHECK(L <= 1.5 * secant);
}
