#include "cavsafe/harness/episode.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

#include "cavsafe/harness/reward.hpp"

namespace cavsafe::harness {

namespace {

using nlohmann::json;

json state_json(const world::VehicleState& s) { return json::array({s.id, s.x, s.y, s.v, s.psi}); }

void state_from_json(const json& j, world::VehicleState& s) {
  s.id = j.at(0).get<int>();
  s.x = j.at(1).get<double>();
  s.y = j.at(2).get<double>();
  s.v = j.at(3).get<double>();
  s.psi = j.at(4).get<double>();
}

json states_json(const std::vector<world::VehicleState>& states) {
  json a = json::array();
  for (const auto& s : states) a.push_back(state_json(s));
  return a;
}

std::vector<world::VehicleState> states_from_json(const json& j,
                                                  const std::vector<world::VehicleState>& shape) {
  std::vector<world::VehicleState> out = shape;
  if (j.size() != out.size()) throw std::runtime_error("log state count mismatch");
  for (std::size_t i = 0; i < out.size(); ++i) state_from_json(j.at(i), out[i]);
  return out;
}

json dynamics_json(const dyn::DynamicsConfig& d) {
  return {{"dt", d.dt},           {"accel_min", d.accel_min}, {"accel_max", d.accel_max},
          {"steer_min", d.steer_min}, {"steer_max", d.steer_max}, {"speed_max", d.speed_max},
          {"lf", d.lf},           {"lr", d.lr}};
}

dyn::DynamicsConfig dynamics_from_json(const json& j) {
  dyn::DynamicsConfig d;
  d.dt = j.at("dt").get<double>();
  d.accel_min = j.at("accel_min").get<double>();
  d.accel_max = j.at("accel_max").get<double>();
  d.steer_min = j.at("steer_min").get<double>();
  d.steer_max = j.at("steer_max").get<double>();
  d.speed_max = j.at("speed_max").get<double>();
  d.lf = j.at("lf").get<double>();
  d.lr = j.at("lr").get<double>();
  return d;
}

}  // namespace

std::vector<int> FixedActionPolicy::act(const StepView& view) {
  std::vector<int> out;
  for (const auto& a : view.shield.agents) {
    const bool ok = std::find(a.safe_set.begin(), a.safe_set.end(), action_) != a.safe_set.end();
    out.push_back(ok ? action_ : a.safe_set.front());
  }
  return out;
}

json observation_json(const world::Observation& o) {
  json j = {{"id", o.target_id}, {"l", {o.l.x, o.l.y}}, {"v", {o.v.x, o.v.y}}, {"psi", o.psi},
            {"connected", o.connected}};
  if (o.alpha) j["alpha"] = *o.alpha;
  if (o.lane_detect) j["lane"] = *o.lane_detect;
  return j;
}

world::Observation observation_from_json(const json& j) {
  world::Observation o;
  o.target_id = j.at("id").get<int>();
  o.l = {j.at("l").at(0).get<double>(), j.at("l").at(1).get<double>()};
  o.v = {j.at("v").at(0).get<double>(), j.at("v").at(1).get<double>()};
  o.psi = j.at("psi").get<double>();
  o.connected = j.at("connected").get<bool>();
  if (j.contains("alpha")) o.alpha = j.at("alpha").get<double>();
  if (j.contains("lane")) o.lane_detect = j.at("lane").get<int>();
  return o;
}

EpisodeLog run_episode(const ScenarioSpec& spec, ScenarioMode mode, Policy& policy,
                       const EpisodeSettings& settings, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return run_episode(instantiate(spec, mode, rng), policy, settings, seed, to_string(mode));
}

EpisodeLog run_episode(ScenarioInstance inst, Policy& policy, const EpisodeSettings& settings,
                       std::uint64_t seed, const std::string& mode) {
  world::World& w = inst.world;
  EpisodeLog log;
  log.scenario = inst.name;
  log.mode = mode;
  log.seed = seed;
  log.shield_mode = shield::to_string(settings.mode);
  log.perturbation = perturb::to_string(settings.schedule.kind());
  log.dynamics = settings.dynamics;

  const int len = settings.episode_len.value_or(inst.episode_len);
  const std::vector<int> agent_idx = w.agent_indices();
  const std::size_t n_agents = agent_idx.size();
  const RewardWeights weights = RewardWeights::uniform(static_cast<int>(std::max<std::size_t>(n_agents, 1)));
  shield::ShieldContext ctx{&w.map, settings.actions, settings.dynamics};
  std::set<world::IdPair> seen;
  log.summary.agent_returns.assign(n_agents, 0.0);

  for (int step = 0; step < len; ++step) {
    try {
      StepRecord rec;
      rec.t = w.t;
      rec.states = w.vehicles;

      const world::JointState joint = world::build_joint_state(w, settings.comm_range, settings.schedule);
      const shield::SafetyOutcome outcome = shield::safety_shield(joint, ctx, settings.shield, settings.mode);
      std::vector<char> wrecked(n_agents, 0);
      for (std::size_t k = 0; k < n_agents; ++k)
        wrecked[k] = w.info[static_cast<std::size_t>(agent_idx[k])].wrecked ? 1 : 0;

      const StepView view{w.t, w, joint, outcome, inst, wrecked};
      const std::vector<int> actions = policy.act(view);
      if (actions.size() != n_agents) throw std::logic_error("policy returned wrong number of actions");

      std::vector<dyn::ControlInput> controls(w.vehicles.size());
      std::vector<double> safety(n_agents, 0.0);
      rec.agents.resize(n_agents);
      for (std::size_t k = 0; k < n_agents; ++k) {
        const auto vi = static_cast<std::size_t>(agent_idx[k]);
        const shield::AgentOutcome& ao = outcome.agents[k];
        AgentStepRecord& ar = rec.agents[k];
        ar.agent_id = ao.agent_id;
        ar.safe_set = ao.safe_set;
        for (const auto& v : ao.verdicts) ar.verdicts.push_back({v.action, v.safe, v.lane_available, v.binding_id});
        if (settings.record_observations) {
          ar.self = joint.agents[k].self;
          ar.cavs = joint.agents[k].cavs;
          ar.ucvs = joint.agents[k].ucvs;
        }
        if (wrecked[k]) {
          ar.action = kInactive;
          continue;
        }
        const int a = actions[k];
        if (std::find(ao.safe_set.begin(), ao.safe_set.end(), a) == ao.safe_set.end())
          throw std::logic_error("agent " + std::to_string(ao.agent_id) + " chose action " +
                                 std::to_string(a) + " outside its safe set");
        ar.action = a;
        if (a == dyn::kEmergencyStop) {
          ar.emergency = true;
          controls[vi] = dyn::emergency_stop(settings.dynamics);
          safety[k] += settings.shield.emergency_penalty;
          ++log.summary.emergency_stops;
        } else {
          const shield::ActionVerdict& v = ao.verdicts[static_cast<std::size_t>(a)];
          controls[vi] = v.filtered;
          if (a == dyn::kChangeLaneLeft || a == dyn::kChangeLaneRight) {
            world::LaneRef& lane = w.info[vi].lane;
            lane.lane += a == dyn::kChangeLaneLeft ? 1 : -1;
          }
        }
        ar.control = controls[vi];
      }
      for (const auto& script : inst.scripts) {
        const auto vi = static_cast<std::size_t>(script.vehicle_index);
        if (!w.info[vi].wrecked) controls[vi] = ucv_control(w, script, settings.dynamics);
      }

      for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
        if (w.info[i].wrecked) {
          controls[i] = {};
          continue;
        }
        w.vehicles[i] = dyn::step_bicycle(w.vehicles[i], controls[i], settings.dynamics.dt, settings.dynamics);
        w.info[i].last_accel = controls[i].accel;
      }
      rec.controls = controls;
      rec.perturbations = joint.applied;

      const std::set<world::IdPair> hits = world::detect_collisions(w.vehicles);
      std::vector<char> was_wrecked(w.vehicles.size());
      for (std::size_t i = 0; i < w.vehicles.size(); ++i) was_wrecked[i] = w.info[i].wrecked ? 1 : 0;
      for (const auto& pair : hits) {
        if (seen.count(pair)) continue;
        seen.insert(pair);
        rec.new_collisions.push_back(pair);
        ++log.summary.collisions;
        for (int id : {pair.first, pair.second}) {
          const auto vi = static_cast<std::size_t>(w.index_of(id));
          if (!was_wrecked[vi]) {
            const auto it = std::find(agent_idx.begin(), agent_idx.end(), static_cast<int>(vi));
            if (it != agent_idx.end())
              safety[static_cast<std::size_t>(it - agent_idx.begin())] += settings.shield.collision_penalty;
          }
          w.info[vi].wrecked = true;
          w.vehicles[vi].v = 0.0;
          w.info[vi].last_accel = 0.0;
        }
      }
      if (!rec.new_collisions.empty()) log.summary.collided = true;
      rec.wrecked_after.resize(w.vehicles.size());
      for (std::size_t i = 0; i < w.vehicles.size(); ++i) rec.wrecked_after[i] = w.info[i].wrecked ? 1 : 0;

      const std::vector<double> rewards =
          n_agents ? reward(w, inst.destinations, safety, weights) : std::vector<double>{};
      std::vector<char> wrecked_after(n_agents);
      for (std::size_t k = 0; k < n_agents; ++k) {
        rec.agents[k].safety_term = safety[k];
        rec.agents[k].reward = rewards[k];
        log.summary.agent_returns[k] += rewards[k];
        wrecked_after[k] = rec.wrecked_after[static_cast<std::size_t>(agent_idx[k])];
      }
      ++w.t;
      policy.after_step(view, rewards, wrecked_after);
      log.steps.push_back(std::move(rec));
    } catch (const std::logic_error&) {
      throw;
    } catch (const std::exception& e) {
      throw std::runtime_error("step " + std::to_string(step) + ": " + e.what());
    }
  }
  log.final_states = w.vehicles;
  log.summary.steps = static_cast<int>(log.steps.size());
  double total = 0.0;
  for (double r : log.summary.agent_returns) total += r;
  log.summary.mean_return = n_agents ? total / static_cast<double>(n_agents) : 0.0;
  return log;
}

void write_log(const EpisodeLog& log, std::ostream& out) {
  json vehicles = json::array();
  const auto& shape = log.steps.empty() ? log.final_states : log.steps.front().states;
  for (const auto& s : shape)
    vehicles.push_back({{"id", s.id}, {"length", s.length}, {"width", s.width}, {"connected", s.connected}});
  json header = {{"type", "header"},        {"scenario", log.scenario},
                 {"mode", log.mode},        {"seed", log.seed},
                 {"shield", log.shield_mode}, {"perturbation", log.perturbation},
                 {"dynamics", dynamics_json(log.dynamics)}, {"vehicles", vehicles}};
  out << header.dump() << '\n';

  for (const auto& rec : log.steps) {
    json controls = json::array();
    for (const auto& u : rec.controls) controls.push_back({u.accel, u.steer});
    json agents = json::array();
    for (const auto& a : rec.agents) {
      json verdicts = json::array();
      for (const auto& v : a.verdicts) verdicts.push_back({v.action, v.safe, v.lane_available, v.binding_id});
      json aj = {{"id", a.agent_id},           {"action", a.action},
                 {"emergency", a.emergency},   {"safe_set", a.safe_set},
                 {"verdicts", verdicts},       {"control", {a.control.accel, a.control.steer}},
                 {"safety", a.safety_term},    {"reward", a.reward}};
      if (a.self) {
        aj["self"] = observation_json(*a.self);
        json cavs = json::array(), ucvs = json::array();
        for (const auto& o : a.cavs) cavs.push_back(observation_json(o));
        for (const auto& o : a.ucvs) ucvs.push_back(observation_json(o));
        aj["cavs"] = cavs;
        aj["ucvs"] = ucvs;
      }
      agents.push_back(aj);
    }
    json ptb = json::array();
    for (const auto& p : rec.perturbations)
      ptb.push_back({p.observer, p.target, p.error.e_l, p.error.e_v, p.exceeds_bound});
    json hits = json::array();
    for (const auto& [a, b] : rec.new_collisions) hits.push_back({a, b});
    json wrecked = json::array();
    for (char c : rec.wrecked_after) wrecked.push_back(c != 0);
    json line = {{"type", "step"},   {"t", rec.t},          {"states", states_json(rec.states)},
                 {"controls", controls}, {"agents", agents}, {"perturbations", ptb},
                 {"collisions", hits}, {"wrecked", wrecked}};
    out << line.dump() << '\n';
  }
  const auto& s = log.summary;
  json final_line = {{"type", "final"},
                     {"states", states_json(log.final_states)},
                     {"summary",
                      {{"steps", s.steps},
                       {"collisions", s.collisions},
                       {"emergency_stops", s.emergency_stops},
                       {"collided", s.collided},
                       {"agent_returns", s.agent_returns},
                       {"mean_return", s.mean_return}}}};
  out << final_line.dump() << '\n';
}

EpisodeLog read_log(std::istream& in) {
  EpisodeLog log;
  std::vector<world::VehicleState> shape;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      have_header = true;
      log.scenario = j.at("scenario").get<std::string>();
      log.mode = j.at("mode").get<std::string>();
      log.seed = j.at("seed").get<std::uint64_t>();
      log.shield_mode = j.at("shield").get<std::string>();
      log.perturbation = j.at("perturbation").get<std::string>();
      log.dynamics = dynamics_from_json(j.at("dynamics"));
      for (const auto& v : j.at("vehicles")) {
        world::VehicleState s;
        s.id = v.at("id").get<int>();
        s.length = v.at("length").get<double>();
        s.width = v.at("width").get<double>();
        s.connected = v.at("connected").get<bool>();
        shape.push_back(s);
      }
    } else if (type == "step") {
      if (!have_header) throw std::runtime_error("episode log has no header");
      StepRecord rec;
      rec.t = j.at("t").get<int>();
      rec.states = states_from_json(j.at("states"), shape);
      for (const auto& u : j.at("controls")) rec.controls.push_back({u.at(0).get<double>(), u.at(1).get<double>()});
      for (const auto& a : j.at("agents")) {
        AgentStepRecord ar;
        ar.agent_id = a.at("id").get<int>();
        ar.action = a.at("action").get<int>();
        ar.emergency = a.at("emergency").get<bool>();
        ar.safe_set = a.at("safe_set").get<std::vector<int>>();
        for (const auto& v : a.at("verdicts"))
          ar.verdicts.push_back({v.at(0).get<int>(), v.at(1).get<bool>(), v.at(2).get<bool>(), v.at(3).get<int>()});
        ar.control = {a.at("control").at(0).get<double>(), a.at("control").at(1).get<double>()};
        ar.safety_term = a.at("safety").get<double>();
        ar.reward = a.at("reward").get<double>();
        if (a.contains("self")) {
          ar.self = observation_from_json(a.at("self"));
          for (const auto& o : a.at("cavs")) ar.cavs.push_back(observation_from_json(o));
          for (const auto& o : a.at("ucvs")) ar.ucvs.push_back(observation_from_json(o));
        }
        rec.agents.push_back(std::move(ar));
      }
      for (const auto& p : j.at("perturbations"))
        rec.perturbations.push_back({p.at(0).get<int>(), p.at(1).get<int>(),
                                     {p.at(2).get<double>(), p.at(3).get<double>()}, p.at(4).get<bool>()});
      for (const auto& h : j.at("collisions")) rec.new_collisions.emplace_back(h.at(0).get<int>(), h.at(1).get<int>());
      for (const auto& c : j.at("wrecked")) rec.wrecked_after.push_back(c.get<bool>() ? 1 : 0);
      log.steps.push_back(std::move(rec));
    } else if (type == "final") {
      log.final_states = states_from_json(j.at("states"), shape);
      const auto& s = j.at("summary");
      log.summary.steps = s.at("steps").get<int>();
      log.summary.collisions = s.at("collisions").get<int>();
      log.summary.emergency_stops = s.at("emergency_stops").get<int>();
      log.summary.collided = s.at("collided").get<bool>();
      log.summary.agent_returns = s.at("agent_returns").get<std::vector<double>>();
      log.summary.mean_return = s.at("mean_return").get<double>();
    }
  }
  if (!have_header) throw std::runtime_error("episode log has no header");
  return log;
}

ReplayReport replay(const EpisodeLog& log) {
  ReplayReport report;
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    const StepRecord& rec = log.steps[k];
    const std::vector<world::VehicleState>& next =
        k + 1 < log.steps.size() ? log.steps[k + 1].states : log.final_states;
    if (next.size() != rec.states.size() || rec.controls.size() != rec.states.size())
      throw std::runtime_error("replay: inconsistent vehicle count at step " + std::to_string(k));
    for (std::size_t i = 0; i < rec.states.size(); ++i) {
      const bool frozen = k > 0 && log.steps[k - 1].wrecked_after[i];
      world::VehicleState s = frozen ? rec.states[i]
                                     : dyn::step_bicycle(rec.states[i], rec.controls[i], log.dynamics.dt, log.dynamics);
      if (rec.wrecked_after[i]) s.v = 0.0;
      const double err = std::max({std::abs(s.x - next[i].x), std::abs(s.y - next[i].y),
                                   std::abs(s.v - next[i].v),
                                   std::abs(world::wrap_angle(s.psi - next[i].psi))});
      report.max_state_error = std::max(report.max_state_error, err);
    }
    ++report.steps;
  }
  return report;
}

}  // namespace cavsafe::harness
