#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "cavsafe/harness/config.hpp"
#include "cavsafe/harness/episode.hpp"
#include "cavsafe/harness/scenario.hpp"
#include "cavsafe/marl/agent.hpp"
#include "cavsafe/marl/losses.hpp"

namespace cavsafe::marl {

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int episode, const std::string& what)
      : std::runtime_error("non-finite parameters after episode " + std::to_string(episode) + ": " + what),
        episode_(episode) {}
  int episode() const { return episode_; }

 private:
  int episode_;
};

/// Transitions of one agent in one episode (memory M_i).
struct AgentMemory {
  std::vector<EncodedState> local;
  std::vector<Eigen::VectorXd> central;
  std::vector<int> actions;          // kEmergencyStop when the shield overrode
  std::vector<double> old_probs;     // pi_old(a | s) of the unrestricted policy
  std::vector<double> rewards;       // scaled
  bool terminal = false;
  Eigen::VectorXd final_central;     // s^{|tau|}
  bool done = false;                 // no more transitions after a collision
};

/// Actor-driven policy for the episode runner. Sampling mode draws from the
/// safe-set restricted distribution with epsilon-greedy exploration and records
/// memories; greedy mode takes the most probable safe action.
class MarlPolicy : public harness::Policy {
 public:
  enum class Mode { Sample, Greedy };

  MarlPolicy(const Architecture& arch, const std::vector<ParameterSet>& params, Mode mode,
             double eps_explore, double reward_scale, double comm_range, std::uint64_t seed);

  std::vector<int> act(const harness::StepView& view) override;
  void after_step(const harness::StepView& view, const std::vector<double>& rewards,
                  const std::vector<char>& wrecked_after) override;

  std::vector<AgentMemory>& memories() { return memories_; }

 private:
  std::vector<EncodedState> encode_all(const world::JointState& joint,
                                       const harness::ScenarioInstance& scenario,
                                       const world::World& w) const;
  Eigen::VectorXd central_of(const std::vector<EncodedState>& enc) const;

  const Architecture& arch_;
  const std::vector<ParameterSet>& params_;
  Mode mode_;
  double eps_explore_;
  double reward_scale_;
  double comm_range_;
  std::mt19937_64 rng_;
  std::vector<AgentMemory> memories_;
};

struct EpisodeMetrics {
  int episode = 0;
  std::vector<double> returns;  // per agent, unscaled
  double mean_return = 0.0;
  int collisions = 0;
  int emergency_stops = 0;
  double eps_explore = 0.0;
  std::vector<double> value_loss;
  std::vector<double> worst_q_loss;
  std::vector<double> rcs;
  std::vector<double> reg;
  std::vector<double> lambda;

  nlohmann::json to_json() const;
};

struct TrainSetup {
  harness::ScenarioSpec scenario;
  harness::HarnessConfig config;
  Algorithm algo = Algorithm::SrMappo;
  shield::ShieldMode shield = shield::ShieldMode::Robust;
  std::uint64_t seed = 0;
  int episodes = 200;
};

struct TrainResult {
  Architecture arch;
  std::vector<ParameterSet> params;
  std::vector<EpisodeMetrics> metrics;
};

Architecture architecture_for(const harness::ScenarioSpec& spec, const harness::HarnessConfig& cfg);

/// Initial parameters for every agent, as train() would create them from `seed`.
std::vector<ParameterSet> initial_agent_parameters(const Architecture& arch, Algorithm algo,
                                                   const Hyperparameters& hp, std::uint64_t seed);

harness::EpisodeSettings episode_settings(const harness::HarnessConfig& cfg, shield::ShieldMode mode);

struct ActorStepStats {
  double rcs = 0.0;
  double reg = 0.0;
};

/// One ascent step on L^RCS - kappa_reg L^reg for a minibatch. `encoded` and
/// `weights` are only read when kappa_reg > 0.
ActorStepStats actor_step(const Architecture& arch, ParameterSet& p, Adam& opt,
                          const PolicyBatch& batch, const std::vector<EncodedState>& encoded,
                          const std::vector<double>& weights, const Hyperparameters& hp,
                          std::mt19937_64& rng);

TrainResult train(const TrainSetup& setup,
                  const std::function<void(const EpisodeMetrics&)>& on_episode = {});

}  // namespace cavsafe::marl
