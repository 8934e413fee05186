#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavsafe/harness/checkpoint.hpp"
#include "cavsafe/harness/config.hpp"
#include "cavsafe/harness/episode.hpp"
#include "cavsafe/harness/scenario.hpp"
#include "cavsafe/perturb.hpp"

namespace cavsafe::harness {

struct EvalReport {
  std::string scenario;
  std::string perturbation;
  int episodes = 0;
  double collision_free_rate = 0.0;
  double mean_episode_return = 0.0;
  std::vector<double> episode_returns;  // per episode, averaged over agents
  std::vector<int> episode_collisions;

  nlohmann::json to_json() const;
};

/// Schedule for one test episode. PTB^V targets follow cfg.targets.
perturb::PerturbationSchedule make_schedule(perturb::PerturbationKind kind, const PerturbationConfig& cfg,
                                            const ScenarioSpec& spec, std::mt19937_64& rng);

using PolicyFactory = std::function<std::unique_ptr<Policy>(std::uint64_t seed)>;

/// Runs n_episodes test episodes with distinct sub-seeds derived from `seed`.
/// Throws std::invalid_argument for n_episodes <= 0.
EvalReport evaluate(const ScenarioSpec& spec, const HarnessConfig& cfg, const PolicyFactory& policies,
                    shield::ShieldMode mode, perturb::PerturbationKind kind, int n_episodes,
                    std::uint64_t seed, const std::function<void(const EpisodeLog&)>& on_episode = {});

/// Greedy policies from a checkpoint, evaluated with the checkpoint's shield mode.
EvalReport evaluate_checkpoint(const Checkpoint& ckpt, perturb::PerturbationKind kind, int n_episodes,
                               std::uint64_t seed,
                               const std::function<void(const EpisodeLog&)>& on_episode = {});

/// Scenario x perturbation layout with collision-free rate and mean return.
std::string format_table_text(const std::vector<EvalReport>& reports);
std::string format_table_csv(const std::vector<EvalReport>& reports);
/// One row per evaluated episode: scenario, perturbation, episode, return, collisions.
std::string format_scatter_csv(const std::vector<EvalReport>& reports);

}  // namespace cavsafe::harness
