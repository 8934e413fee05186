#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cavsafe/dynamics.hpp"

using namespace cavsafe;
using dyn::ControlInput;
using world::VehicleState;

namespace {

VehicleState at(double x, double y, double v, double psi = 0.0) {
  VehicleState s;
  s.x = x;
  s.y = y;
  s.v = v;
  s.psi = psi;
  return s;
}

struct Lanes {
  world::Path right{{{0, 0}, {2000, 0}}, "right"};
  world::Path middle{{{0, 3.5}, {2000, 3.5}}, "middle"};
  world::Path left{{{0, 7}, {2000, 7}}, "left"};
};

}  // namespace

TEST_CASE("step_bicycle examples") {
  const dyn::DynamicsConfig cfg;
  auto s = dyn::step_bicycle(at(0, 0, 0), {0, 0}, 0.1, cfg);
  CHECK(s.x == 0.0);
  CHECK(s.y == 0.0);
  CHECK(s.v == 0.0);
  CHECK(s.psi == 0.0);

  s = dyn::step_bicycle(at(0, 0, 10), {0, 0}, 0.1, cfg);
  CHECK(s.x == doctest::Approx(1.0));
  CHECK(s.y == doctest::Approx(0.0));
  CHECK(s.v == doctest::Approx(10.0));
  CHECK(s.psi == doctest::Approx(0.0));

  s = dyn::step_bicycle(at(0, 0, 10), {2, 0}, 0.1, cfg);
  CHECK(s.x == doctest::Approx(1.0));
  CHECK(s.v == doctest::Approx(10.2));
}

TEST_CASE("step_bicycle matches a hand-written bicycle update") {
  const dyn::DynamicsConfig cfg;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> v(0, 20), psi(-3, 3), a(-6, 4), d(-0.5, 0.5);
  for (int k = 0; k < 200; ++k) {
    const VehicleState s0 = at(1.0, -2.0, v(rng), psi(rng));
    const ControlInput u{a(rng), d(rng)};
    const auto s1 = dyn::step_bicycle(s0, u, 0.05, cfg);
    const double beta = std::atan(0.5 * std::tan(u.steer));
    CHECK(s1.x == doctest::Approx(s0.x + 0.05 * s0.v * std::cos(s0.psi + beta)));
    CHECK(s1.y == doctest::Approx(s0.y + 0.05 * s0.v * std::sin(s0.psi + beta)));
    CHECK(std::sin(s1.psi) == doctest::Approx(std::sin(s0.psi + 0.05 * s0.v / 1.35 * std::sin(beta))));
    CHECK(s1.v == doctest::Approx(std::clamp(s0.v + 0.05 * u.accel, 0.0, 25.0)));
    CHECK(s1.psi > -std::numbers::pi);
    CHECK(s1.psi <= std::numbers::pi);
  }
}

TEST_CASE("speed never goes negative and position holds at rest") {
  const dyn::DynamicsConfig cfg;
  VehicleState s = at(5, 5, 0.1, 0.3);
  for (int t = 0; t < 20; ++t) s = dyn::step_bicycle(s, {-6, 0.2}, 0.05, cfg);
  CHECK(s.v == 0.0);
  const auto rest = s;
  for (int t = 0; t < 20; ++t) s = dyn::step_bicycle(s, {-1, 0.4}, 0.05, cfg);
  CHECK(s.x == rest.x);
  CHECK(s.y == rest.y);
}

TEST_CASE("zero steer keeps the lateral coordinate of the heading frame") {
  const dyn::DynamicsConfig cfg;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> v(0, 20), psi(-3, 3), a(-6, 4);
  for (int k = 0; k < 100; ++k) {
    VehicleState s = at(3, 4, v(rng), psi(rng));
    const double lat0 = -s.x * std::sin(s.psi) + s.y * std::cos(s.psi);
    for (int t = 0; t < 50; ++t) s = dyn::step_bicycle(s, {a(rng), 0}, 0.05, cfg);
    CHECK(-s.x * std::sin(s.psi) + s.y * std::cos(s.psi) == doctest::Approx(lat0).epsilon(1e-9));
  }
}

TEST_CASE("nominal_control examples") {
  const dyn::DynamicsConfig cfg;
  const dyn::ActionSpace space;
  Lanes lanes;
  const dyn::LaneContext mid{&lanes.middle, &lanes.left, &lanes.right, 10.0};
  const auto keep = dyn::nominal_control(at(50, 3.5, 10), dyn::kKeepLaneSpeed, mid, space, cfg);
  CHECK(keep.accel == doctest::Approx(0.0));
  CHECK(keep.steer == doctest::Approx(0.0));

  const auto brake = dyn::nominal_control(at(50, 3.5, 10), dyn::kBrake, mid, space, cfg);
  CHECK(brake.accel == doctest::Approx(-3.0));

  const dyn::LaneContext leftmost{&lanes.left, nullptr, &lanes.middle, 10.0};
  CHECK_THROWS_AS(dyn::nominal_control(at(50, 7, 10), dyn::kChangeLaneLeft, leftmost, space, cfg),
                  dyn::NoAdjacentLane);
  const dyn::LaneContext rightmost{&lanes.right, &lanes.middle, nullptr, 10.0};
  CHECK_THROWS_AS(dyn::nominal_control(at(50, 0, 10), dyn::kChangeLaneRight, rightmost, space, cfg),
                  dyn::NoAdjacentLane);

  const auto left = dyn::nominal_control(at(50, 3.5, 10), dyn::kChangeLaneLeft, mid, space, cfg);
  CHECK(left.steer > 0.0);
  const auto right = dyn::nominal_control(at(50, 3.5, 10), dyn::kChangeLaneRight, mid, space, cfg);
  CHECK(right.steer < 0.0);

  const auto es = dyn::emergency_stop(cfg);
  CHECK(es.accel == -6.0);
  CHECK(es.steer == 0.0);
  CHECK(dyn::nominal_control(at(50, 3.5, 10), dyn::kEmergencyStop, mid, space, cfg) == es);
}

TEST_CASE("throttle intervals split the acceleration range") {
  const dyn::DynamicsConfig cfg;
  const dyn::ActionSpace space;
  CHECK(space.size() == 7);
  for (int j = 1; j <= 3; ++j) {
    const auto r = dyn::action_accel_range(dyn::kFirstThrottle + j - 1, space, cfg);
    CHECK(r.lo == doctest::Approx(4.0 * (j - 1) / 3));
    CHECK(r.hi == doctest::Approx(4.0 * j / 3));
  }
  const auto b = dyn::action_accel_range(dyn::kBrake, space, cfg);
  CHECK(b.lo == -3.0);
  CHECK(b.hi == 0.0);
}

TEST_CASE("nominal_control stays inside the admissible box") {
  const dyn::DynamicsConfig cfg;
  const dyn::ActionSpace space;
  Lanes lanes;
  const dyn::LaneContext mid{&lanes.middle, &lanes.left, &lanes.right, 10.0};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> x(10, 1900), y(-5, 12), v(0, 25), psi(-3.1, 3.1);
  std::uniform_int_distribution<int> act(0, space.size() - 1);
  for (int k = 0; k < 10000; ++k) {
    const auto u = dyn::nominal_control(at(x(rng), y(rng), v(rng), psi(rng)), act(rng), mid, space, cfg);
    REQUIRE(u.accel >= cfg.accel_min);
    REQUIRE(u.accel <= cfg.accel_max);
    REQUIRE(u.steer >= cfg.steer_min);
    REQUIRE(u.steer <= cfg.steer_max);
  }
}

TEST_CASE("lane keeping holds the centerline for 200 steps") {
  const dyn::DynamicsConfig cfg;
  const dyn::ActionSpace space;
  Lanes lanes;
  const dyn::LaneContext mid{&lanes.middle, &lanes.left, &lanes.right, 12.0};
  VehicleState s = at(0, 3.5, 9);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    s = dyn::step_bicycle(s, dyn::nominal_control(s, dyn::kKeepLaneSpeed, mid, space, cfg), cfg.dt, cfg);
    worst = std::max(worst, std::abs(s.y - 3.5));
  }
  CHECK(worst < 0.1);
  CHECK(s.v == doctest::Approx(12.0).epsilon(0.05));
}

TEST_CASE("a lane change reaches the adjacent lane") {
  const dyn::DynamicsConfig cfg;
  const dyn::ActionSpace space;
  Lanes lanes;
  const dyn::LaneContext mid{&lanes.middle, &lanes.left, &lanes.right, 10.0};
  VehicleState s = at(0, 3.5, 10);
  for (int t = 0; t < 120; ++t)
    s = dyn::step_bicycle(s, dyn::nominal_control(s, dyn::kChangeLaneLeft, mid, space, cfg), cfg.dt, cfg);
  CHECK(s.y == doctest::Approx(7.0).epsilon(0.03));
  CHECK(std::abs(s.psi) < 0.05);
}
