#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavsafe/dynamics.hpp"
#include "cavsafe/world.hpp"

namespace cavsafe::harness {

enum class ScenarioMode { Train, Test };

struct SpeedBand {
  double lo = 0.0;
  double hi = 0.0;
};

enum class UcvBehaviorKind { Cruise, SuddenBrake };

/// Scripted longitudinal behavior of an unconnected vehicle. SuddenBrake only
/// triggers in test mode, at a step drawn from [brake_step_lo, brake_step_hi].
struct UcvBehavior {
  UcvBehaviorKind kind = UcvBehaviorKind::Cruise;
  SpeedBand brake_to{3.0, 4.0};
  int brake_step_lo = 40;
  int brake_step_hi = 120;
  double brake_decel = 6.0;
};

struct SpawnSpec {
  int id = 0;
  bool connected = false;
  world::LaneRef lane;
  double s = 0.0;              // arc-length on the lane
  double s_jitter = 0.0;       // s += U(-s_jitter, s_jitter)
  SpeedBand train_speed{8.0, 10.0};
  SpeedBand test_speed{8.0, 10.0};
  /// Crossing traffic: s is the conflict point and the vehicle is placed so it
  /// reaches it after a time drawn from this band.
  std::optional<SpeedBand> arrival_time;
  double destination_ahead = 150.0;  // CAVs: destination this far along the lane
  UcvBehavior behavior;
};

struct ScenarioSpec {
  std::string name;
  world::RoadMap map;
  std::vector<SpawnSpec> spawns;
  int episode_len = 200;
};

ScenarioSpec highway_spec();
ScenarioSpec intersection_spec();
/// "highway" or "intersection" (case-insensitive); anything else is treated as a
/// path to a scenario file.
ScenarioSpec scenario_by_name(const std::string& name);

nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& j);

/// Per-UCV script resolved for one episode.
struct UcvScript {
  int vehicle_index = 0;
  double cruise_speed = 0.0;
  std::optional<int> brake_step;
  double brake_target = 0.0;
  double brake_decel = 6.0;
};

struct ScenarioInstance {
  std::string name;
  world::World world;
  std::vector<world::Vec2> destinations;  // per vehicle (UCVs: own position)
  std::vector<UcvScript> scripts;
  int episode_len = 200;
};

ScenarioInstance instantiate(const ScenarioSpec& spec, ScenarioMode mode, std::mt19937_64& rng);

/// Controls of every UCV for the current world state (cruise or scripted brake).
dyn::ControlInput ucv_control(const world::World& world, const UcvScript& script,
                              const dyn::DynamicsConfig& cfg);

std::string to_string(ScenarioMode mode);

}  // namespace cavsafe::harness
