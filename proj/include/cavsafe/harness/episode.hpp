#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavsafe/dynamics.hpp"
#include "cavsafe/harness/scenario.hpp"
#include "cavsafe/perturb.hpp"
#include "cavsafe/shield.hpp"
#include "cavsafe/world.hpp"

namespace cavsafe::harness {

/// Logged action of an agent that has already collided.
inline constexpr int kInactive = -2;

struct StepView {
  int t = 0;
  const world::World& world;
  const world::JointState& joint;
  const shield::SafetyOutcome& shield;
  const ScenarioInstance& scenario;
  const std::vector<char>& wrecked;  // per agent, before this step
};

/// Chooses one action per agent (JointState::agents order) from its safe set.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::vector<int> act(const StepView& view) = 0;
  /// After the world advanced: shared rewards and per-agent wreck flags.
  virtual void after_step(const StepView& /*view*/, const std::vector<double>& /*rewards*/,
                          const std::vector<char>& /*wrecked_after*/) {}
};

/// Always requests the same action; falls back to the first safe action.
class FixedActionPolicy : public Policy {
 public:
  explicit FixedActionPolicy(int action) : action_(action) {}
  std::vector<int> act(const StepView& view) override;

 private:
  int action_;
};

struct EpisodeSettings {
  dyn::DynamicsConfig dynamics;
  dyn::ActionSpace actions;
  shield::ShieldConfig shield;
  shield::ShieldMode mode = shield::ShieldMode::Robust;
  double comm_range = world::kDefaultCommRange;
  perturb::PerturbationSchedule schedule;
  std::optional<int> episode_len;  // overrides the scenario's
  bool record_observations = true;
};

struct VerdictRecord {
  int action = 0;
  bool safe = false;
  bool lane_available = true;
  int binding_id = -1;
};

struct AgentStepRecord {
  int agent_id = 0;
  int action = 0;
  bool emergency = false;
  std::vector<int> safe_set;
  std::vector<VerdictRecord> verdicts;
  dyn::ControlInput control;
  double safety_term = 0.0;  // r^s this step
  double reward = 0.0;
  std::optional<world::Observation> self;
  std::vector<world::Observation> cavs;
  std::vector<world::Observation> ucvs;
};

struct StepRecord {
  int t = 0;
  std::vector<world::VehicleState> states;     // before the step
  std::vector<dyn::ControlInput> controls;     // per vehicle
  std::vector<AgentStepRecord> agents;
  std::vector<world::AppliedPerturbation> perturbations;
  std::vector<world::IdPair> new_collisions;
  std::vector<char> wrecked_after;             // per vehicle
};

struct EpisodeSummary {
  int steps = 0;
  int collisions = 0;
  int emergency_stops = 0;
  bool collided = false;
  std::vector<double> agent_returns;
  double mean_return = 0.0;  // average over agents of summed reward
};

struct EpisodeLog {
  std::string scenario;
  std::string mode;
  std::uint64_t seed = 0;
  std::string shield_mode;
  std::string perturbation;
  dyn::DynamicsConfig dynamics;
  std::vector<world::VehicleState> final_states;
  std::vector<StepRecord> steps;
  EpisodeSummary summary;
};

EpisodeLog run_episode(const ScenarioSpec& spec, ScenarioMode mode, Policy& policy,
                       const EpisodeSettings& settings, std::uint64_t seed);

/// Runs from an already built instance (custom worlds, tests).
EpisodeLog run_episode(ScenarioInstance instance, Policy& policy, const EpisodeSettings& settings,
                       std::uint64_t seed = 0, const std::string& mode = "test");

void write_log(const EpisodeLog& log, std::ostream& out);  // line-delimited JSON
EpisodeLog read_log(std::istream& in);

struct ReplayReport {
  int steps = 0;
  double max_state_error = 0.0;
};

/// Re-integrates every logged control from the logged states and compares with
/// the next logged states.
ReplayReport replay(const EpisodeLog& log);

nlohmann::json observation_json(const world::Observation& o);
world::Observation observation_from_json(const nlohmann::json& j);

}  // namespace cavsafe::harness
