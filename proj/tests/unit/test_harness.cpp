#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cavsafe/harness/checkpoint.hpp"
#include "cavsafe/harness/config.hpp"
#include "cavsafe/harness/episode.hpp"
#include "cavsafe/harness/evaluate.hpp"
#include "cavsafe/harness/reward.hpp"
#include "cavsafe/marl/trainer.hpp"

using namespace cavsafe;
using namespace cavsafe::harness;

namespace {

world::World parked(const std::vector<world::Vec2>& at) {
  world::World w;
  world::Road road;
  road.lanes.push_back(world::Path({{-500, 0}, {1000, 0}}, "r"));
  w.map.roads.push_back(road);
  for (std::size_t k = 0; k < at.size(); ++k) {
    world::VehicleState s;
    s.id = static_cast<int>(k);
    s.x = at[k].x;
    s.y = at[k].y;
    s.connected = true;
    w.vehicles.push_back(s);
    w.info.push_back({{0, 0}, 0.0, false});
  }
  return w;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cavsafe-test-" + name)).string();
}

EpisodeSettings quiet_settings(shield::ShieldMode mode) {
  EpisodeSettings s = marl::episode_settings(default_config(), mode);
  return s;
}

}  // namespace

TEST_CASE("agents resting at their destinations earn nothing") {
  const std::vector<world::Vec2> dest{{0, 0}, {20, 0}, {40, 0}};
  const auto w = parked(dest);
  const auto r = reward(w, dest, {0, 0, 0}, RewardWeights::uniform(3));
  REQUIRE(r.size() == 3);
  for (double x : r) CHECK(x == doctest::Approx(0.0));
}

TEST_CASE("one agent 200 m short of its destination") {
  const std::vector<world::Vec2> dest{{0, 0}, {220, 0}, {40, 0}};
  const auto w = parked({{0, 0}, {20, 0}, {40, 0}});
  const auto r = reward(w, dest, {0, 0, 0}, RewardWeights::uniform(3));
  for (double x : r) CHECK(x == doctest::Approx(-200.0 / 3));
}

TEST_CASE("rewards are shared and include speed and safety terms") {
  const std::vector<world::Vec2> dest{{0, 0}, {20, 0}};
  auto w = parked(dest);
  w.vehicles[0].v = 6.0;
  const auto r = reward(w, dest, {-10.0, 0.0}, RewardWeights::uniform(2));
  CHECK(r[0] == doctest::Approx((6.0 - 10.0) / 2));
  CHECK(r[0] == r[1]);
  CHECK_THROWS_AS(reward(w, dest, {0.0}, RewardWeights::uniform(2)), std::invalid_argument);
  CHECK_THROWS_AS(RewardWeights::uniform(0), std::invalid_argument);
}

TEST_CASE("zero-length episode") {
  FixedActionPolicy keep(dyn::kKeepLaneSpeed);
  auto s = quiet_settings(shield::ShieldMode::Robust);
  s.episode_len = 0;
  const auto log = run_episode(highway_spec(), ScenarioMode::Train, keep, s, 1);
  CHECK(log.steps.empty());
  CHECK(log.summary.collisions == 0);
  CHECK(log.summary.mean_return == 0.0);
}

TEST_CASE("episodes are deterministic and rewards are identical across agents") {
  FixedActionPolicy throttle(dyn::kFirstThrottle + 1);
  const auto s = quiet_settings(shield::ShieldMode::Robust);
  const auto a = run_episode(highway_spec(), ScenarioMode::Test, throttle, s, 42);
  const auto b = run_episode(highway_spec(), ScenarioMode::Test, throttle, s, 42);
  std::ostringstream x, y;
  write_log(a, x);
  write_log(b, y);
  CHECK(x.str() == y.str());
  for (const auto& step : a.steps)
    for (const auto& ag : step.agents) CHECK(ag.reward == step.agents.front().reward);
}

TEST_CASE("full throttle without a shield ends in a collision on the highway") {
  FixedActionPolicy throttle(dyn::kFirstThrottle + 2);
  const auto log = run_episode(highway_spec(), ScenarioMode::Train, throttle, quiet_settings(shield::ShieldMode::Off), 3);
  CHECK(log.summary.collisions > 0);
  CHECK(log.summary.collided);
}

TEST_CASE("evaluate") {
  const auto cfg = default_config();
  const PolicyFactory brake = [](std::uint64_t) { return std::make_unique<FixedActionPolicy>(dyn::kBrake); };
  CHECK_THROWS_AS(evaluate(highway_spec(), cfg, brake, shield::ShieldMode::Robust, perturb::PerturbationKind::None, 0, 1),
                  std::invalid_argument);
  const auto r = evaluate(highway_spec(), cfg, brake, shield::ShieldMode::Robust, perturb::PerturbationKind::None, 3, 9);
  CHECK(r.episodes == 3);
  CHECK(r.collision_free_rate == 1.0);
  CHECK(r.mean_episode_return < -1000.0);
  CHECK(r.episode_returns.size() == 3);
  const auto again = evaluate(highway_spec(), cfg, brake, shield::ShieldMode::Robust, perturb::PerturbationKind::None, 3, 9);
  CHECK(again.to_json().dump() == r.to_json().dump());
}

TEST_CASE("logs round-trip and replay") {
  FixedActionPolicy policy(dyn::kFirstThrottle);
  auto s = quiet_settings(shield::ShieldMode::Robust);
  std::mt19937_64 rng(4);
  s.schedule = make_schedule(perturb::PerturbationKind::Rand, default_config().perturbation, intersection_spec(), rng);
  const auto log = run_episode(intersection_spec(), ScenarioMode::Test, policy, s, 17);
  std::stringstream buf;
  write_log(log, buf);
  const std::string first = buf.str();
  const EpisodeLog back = read_log(buf);
  std::ostringstream again;
  write_log(back, again);
  CHECK(again.str() == first);

  const ReplayReport rep = replay(back);
  CHECK(rep.steps == static_cast<int>(log.steps.size()));
  CHECK(rep.max_state_error <= 1e-9);
}

TEST_CASE("checkpoints round-trip and detect corruption") {
  marl::TrainSetup setup;
  setup.scenario = highway_spec();
  setup.config = default_config();
  setup.episodes = 0;
  setup.seed = 5;
  const auto trained = marl::train(setup);
  Checkpoint ckpt{setup.scenario, setup.config, marl::Algorithm::Mappo, shield::ShieldMode::Plain, 5, trained.params};
  const std::string path = temp_path("ckpt.json");
  save_checkpoint(ckpt, trained.arch, path);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.algo == marl::Algorithm::Mappo);
  CHECK(back.shield == shield::ShieldMode::Plain);
  CHECK(back.seed == 5);
  REQUIRE(back.agents.size() == trained.params.size());
  for (std::size_t i = 0; i < back.agents.size(); ++i) {
    CHECK(back.agents[i].theta == trained.params[i].theta);
    CHECK(back.agents[i].phi == trained.params[i].phi);
    CHECK(back.agents[i].omega == trained.params[i].omega);
  }
  CHECK(checkpoint_json(back, trained.arch).dump() == checkpoint_json(ckpt, trained.arch).dump());

  nlohmann::json j;
  {
    std::ifstream in(path);
    j = nlohmann::json::parse(in);
  }
  j["agents"][0]["theta"][0] = j["agents"][0]["theta"][0].get<double>() + 1e-3;
  {
    std::ofstream out(path);
    out << j.dump();
  }
  CHECK_THROWS_AS(load_checkpoint(path), ChecksumMismatch);
  std::remove(path.c_str());
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("config JSON round-trip and overlay") {
  const HarnessConfig cfg = default_config();
  const HarnessConfig back = config_from_json(to_json(cfg));
  CHECK(to_json(back).dump() == to_json(cfg).dump());
  const HarnessConfig partial = config_from_json({{"episode_len", 77}});
  CHECK(partial.episode_len == 77);
  CHECK(partial.comm_range == cfg.comm_range);
  CHECK(partial.shield.lipschitz_sum > 0.0);
  CHECK(partial.shield.epsilon == partial.perturbation.epsilon_bound);
}

TEST_CASE("scenario JSON round-trip") {
  for (const auto& spec : {highway_spec(), intersection_spec()}) {
    const ScenarioSpec back = scenario_from_json(to_json(spec));
    CHECK(to_json(back).dump() == to_json(spec).dump());
  }
  CHECK_THROWS(scenario_by_name("no-such-scenario"));
  CHECK(scenario_by_name("HighWay").name == "highway");
}

TEST_CASE("spawned speeds follow the train and test bands") {
  for (const auto& spec : {highway_spec(), intersection_spec()})
    for (auto mode : {ScenarioMode::Train, ScenarioMode::Test}) {
      std::mt19937_64 rng(21);
      for (int rep = 0; rep < 20; ++rep) {
        const auto inst = instantiate(spec, mode, rng);
        for (const auto& sp : spec.spawns) {
          const auto& v = inst.world.vehicles[inst.world.index_of(sp.id)];
          const SpeedBand band = mode == ScenarioMode::Train ? sp.train_speed : sp.test_speed;
          CHECK(v.v >= band.lo);
          CHECK(v.v <= band.hi);
        }
      }
    }
}

TEST_CASE("table formats") {
  EvalReport a;
  a.scenario = "highway";
  a.perturbation = "veh";
  a.episodes = 2;
  a.collision_free_rate = 0.5;
  a.mean_episode_return = -12.25;
  a.episode_returns = {-10.0, -14.5};
  a.episode_collisions = {0, 1};
  const std::string csv = format_table_csv({a});
  CHECK(csv == "scenario,perturbation,episodes,collision_free_rate,mean_episode_return\n"
               "highway,veh,2,0.500000,-12.250000\n");
  CHECK(format_scatter_csv({a}) ==
        "scenario,perturbation,episode,return,collisions\n"
        "highway,veh,0,-10.000000,0\n"
        "highway,veh,1,-14.500000,1\n");
  const std::string text = format_table_text({a});
  CHECK(text.find("50.0%") != std::string::npos);
  CHECK(text.find("-12.25") != std::string::npos);
}
