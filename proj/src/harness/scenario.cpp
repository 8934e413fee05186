#include "cavsafe/harness/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace cavsafe::harness {

namespace {

using nlohmann::json;

world::Path straight(world::Vec2 from, world::Vec2 to, const std::string& id,
                     std::optional<std::string> signal = std::nullopt) {
  return world::Path({from, to}, id, std::move(signal));
}

SpawnSpec cav(int id, world::LaneRef lane, double s) {
  SpawnSpec sp;
  sp.id = id;
  sp.connected = true;
  sp.lane = lane;
  sp.s = s;
  sp.s_jitter = 2.0;
  return sp;
}

double draw(std::mt19937_64& rng, const SpeedBand& band) {
  if (band.hi <= band.lo) return band.lo;
  return std::uniform_real_distribution<double>(band.lo, band.hi)(rng);
}

json band_json(const SpeedBand& b) { return json::array({b.lo, b.hi}); }
SpeedBand band_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

std::string to_string(ScenarioMode mode) { return mode == ScenarioMode::Train ? "train" : "test"; }

ScenarioSpec highway_spec() {
  ScenarioSpec spec;
  spec.name = "highway";
  world::Road road;
  road.name = "highway";
  for (int k = 0; k < 3; ++k) {
    const double y = 3.5 * k;
    road.lanes.push_back(straight({-100.0, y}, {1500.0, y}, "highway-" + std::to_string(k)));
  }
  spec.map.roads.push_back(std::move(road));

  spec.spawns.push_back(cav(0, {0, 0}, 100.0));
  spec.spawns.push_back(cav(1, {0, 1}, 90.0));
  spec.spawns.push_back(cav(2, {0, 2}, 105.0));
  const double ucv_s[3] = {175.0, 165.0, 185.0};
  for (int k = 0; k < 3; ++k) {
    SpawnSpec sp;
    sp.id = 3 + k;
    sp.lane = {0, k};
    sp.s = ucv_s[k];
    sp.s_jitter = 3.0;
    if (k == 1) sp.behavior.kind = UcvBehaviorKind::SuddenBrake;
    spec.spawns.push_back(sp);
  }
  return spec;
}

ScenarioSpec intersection_spec() {
  ScenarioSpec spec;
  spec.name = "intersection";
  world::Road main;
  main.name = "main";
  for (int k = 0; k < 2; ++k) {
    const double y = 3.5 * k;
    main.lanes.push_back(straight({-150.0, y}, {500.0, y}, "main-" + std::to_string(k), "green"));
  }
  world::Road north;
  north.name = "north";
  north.lanes.push_back(straight({98.25, -200.0}, {98.25, 200.0}, "north-0", "red"));
  world::Road south;
  south.name = "south";
  south.lanes.push_back(straight({101.75, 200.0}, {101.75, -200.0}, "south-0", "red"));
  spec.map.roads = {main, north, south};

  spec.spawns.push_back(cav(0, {0, 0}, 140.0));
  spec.spawns.push_back(cav(1, {0, 1}, 160.0));
  spec.spawns.push_back(cav(2, {0, 0}, 180.0));
  // Crossing traffic ignores its red light; s is the conflict point with the main road.
  SpawnSpec up;
  up.id = 3;
  up.lane = {1, 0};
  up.s = 201.75;
  up.train_speed = {9.0, 11.0};
  up.test_speed = {7.5, 12.5};
  up.arrival_time = SpeedBand{4.0, 9.0};
  SpawnSpec down = up;
  down.id = 4;
  down.lane = {2, 0};
  down.s = 198.25;
  spec.spawns.push_back(up);
  spec.spawns.push_back(down);
  return spec;
}

ScenarioSpec scenario_by_name(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "highway") return highway_spec();
  if (lower == "intersection") return intersection_spec();
  std::ifstream in(name);
  if (!in) throw std::invalid_argument("unknown scenario: " + name);
  return scenario_from_json(json::parse(in));
}

json to_json(const ScenarioSpec& spec) {
  json roads = json::array();
  for (const auto& r : spec.map.roads) {
    json lanes = json::array();
    for (const auto& p : r.lanes) {
      json wps = json::array();
      for (const auto& w : p.waypoints()) wps.push_back({w.x, w.y});
      json lane = {{"id", p.lane_id()}, {"waypoints", wps}};
      if (p.signal()) lane["signal"] = *p.signal();
      lanes.push_back(lane);
    }
    roads.push_back({{"name", r.name}, {"lanes", lanes}});
  }
  json spawns = json::array();
  for (const auto& s : spec.spawns) {
    json j = {{"id", s.id},
              {"connected", s.connected},
              {"road", s.lane.road},
              {"lane", s.lane.lane},
              {"s", s.s},
              {"s_jitter", s.s_jitter},
              {"train_speed", band_json(s.train_speed)},
              {"test_speed", band_json(s.test_speed)},
              {"destination_ahead", s.destination_ahead}};
    if (s.arrival_time) j["arrival_time"] = band_json(*s.arrival_time);
    if (s.behavior.kind == UcvBehaviorKind::SuddenBrake) {
      j["behavior"] = {{"kind", "sudden_brake"},
                       {"brake_to", band_json(s.behavior.brake_to)},
                       {"brake_steps", {s.behavior.brake_step_lo, s.behavior.brake_step_hi}},
                       {"brake_decel", s.behavior.brake_decel}};
    } else {
      j["behavior"] = {{"kind", "cruise"}};
    }
    spawns.push_back(j);
  }
  return {{"name", spec.name},
          {"lane_width", spec.map.lane_width},
          {"episode_len", spec.episode_len},
          {"roads", roads},
          {"spawns", spawns}};
}

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.map.lane_width = j.value("lane_width", 3.5);
  spec.episode_len = j.value("episode_len", 200);
  for (const auto& r : j.at("roads")) {
    world::Road road;
    road.name = r.at("name").get<std::string>();
    for (const auto& l : r.at("lanes")) {
      std::vector<world::Vec2> wps;
      for (const auto& w : l.at("waypoints")) wps.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
      std::optional<std::string> signal;
      if (l.contains("signal")) signal = l.at("signal").get<std::string>();
      road.lanes.emplace_back(std::move(wps), l.at("id").get<std::string>(), signal);
    }
    spec.map.roads.push_back(std::move(road));
  }
  for (const auto& s : j.at("spawns")) {
    SpawnSpec sp;
    sp.id = s.at("id").get<int>();
    sp.connected = s.value("connected", false);
    sp.lane = {s.at("road").get<int>(), s.at("lane").get<int>()};
    sp.s = s.at("s").get<double>();
    sp.s_jitter = s.value("s_jitter", 0.0);
    if (s.contains("train_speed")) sp.train_speed = band_from(s.at("train_speed"));
    if (s.contains("test_speed")) sp.test_speed = band_from(s.at("test_speed"));
    if (s.contains("arrival_time")) sp.arrival_time = band_from(s.at("arrival_time"));
    sp.destination_ahead = s.value("destination_ahead", 150.0);
    if (s.contains("behavior") && s.at("behavior").value("kind", "cruise") == "sudden_brake") {
      const auto& b = s.at("behavior");
      sp.behavior.kind = UcvBehaviorKind::SuddenBrake;
      if (b.contains("brake_to")) sp.behavior.brake_to = band_from(b.at("brake_to"));
      if (b.contains("brake_steps")) {
        sp.behavior.brake_step_lo = b.at("brake_steps").at(0).get<int>();
        sp.behavior.brake_step_hi = b.at("brake_steps").at(1).get<int>();
      }
      sp.behavior.brake_decel = b.value("brake_decel", 6.0);
    }
    spec.spawns.push_back(sp);
  }
  return spec;
}

ScenarioInstance instantiate(const ScenarioSpec& spec, ScenarioMode mode, std::mt19937_64& rng) {
  ScenarioInstance inst;
  inst.name = spec.name;
  inst.episode_len = spec.episode_len;
  inst.world.map = spec.map;
  for (const auto& sp : spec.spawns) {
    const world::Path& lane = spec.map.lane(sp.lane);
    const double speed = draw(rng, mode == ScenarioMode::Train ? sp.train_speed : sp.test_speed);
    double s = sp.s;
    if (sp.s_jitter > 0.0) s += std::uniform_real_distribution<double>(-sp.s_jitter, sp.s_jitter)(rng);
    if (sp.arrival_time) s -= speed * draw(rng, *sp.arrival_time);
    const world::Vec2 p = lane.point_at(s);

    world::VehicleState v;
    v.id = sp.id;
    v.x = p.x;
    v.y = p.y;
    v.v = speed;
    v.psi = lane.heading_at(s);
    v.connected = sp.connected;
    inst.world.vehicles.push_back(v);
    inst.world.info.push_back({sp.lane, 0.0, false});
    inst.destinations.push_back(sp.connected ? lane.point_at(s + sp.destination_ahead) : p);

    if (!sp.connected) {
      UcvScript script;
      script.vehicle_index = static_cast<int>(inst.world.vehicles.size()) - 1;
      script.cruise_speed = speed;
      script.brake_decel = sp.behavior.brake_decel;
      if (sp.behavior.kind == UcvBehaviorKind::SuddenBrake && mode == ScenarioMode::Test) {
        script.brake_step = std::uniform_int_distribution<int>(sp.behavior.brake_step_lo,
                                                               sp.behavior.brake_step_hi)(rng);
        script.brake_target = draw(rng, sp.behavior.brake_to);
      }
      inst.scripts.push_back(script);
    }
  }
  return inst;
}

dyn::ControlInput ucv_control(const world::World& world, const UcvScript& script,
                              const dyn::DynamicsConfig& cfg) {
  const auto i = static_cast<std::size_t>(script.vehicle_index);
  const world::VehicleState& s = world.vehicles[i];
  dyn::ControlInput u;
  if (script.brake_step && world.t >= *script.brake_step) {
    u.accel = std::max(-script.brake_decel, (script.brake_target - s.v) / cfg.dt);
    u.accel = std::min(u.accel, 0.0);
  } else {
    u.accel = std::clamp(cfg.speed_kp * (script.cruise_speed - s.v), -cfg.keep_authority,
                         cfg.keep_authority);
  }
  u.steer = dyn::lane_keeping_steer(s, world.map.lane(world.info[i].lane), cfg);
  return u;
}

}  // namespace cavsafe::harness
