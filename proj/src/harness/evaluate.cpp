#include "cavsafe/harness/evaluate.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cavsafe/marl/trainer.hpp"

namespace cavsafe::harness {

namespace {

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  return {{"scenario", scenario},
          {"perturbation", perturbation},
          {"episodes", episodes},
          {"collision_free_rate", collision_free_rate},
          {"mean_episode_return", mean_episode_return},
          {"episode_returns", episode_returns},
          {"episode_collisions", episode_collisions}};
}

perturb::PerturbationSchedule make_schedule(perturb::PerturbationKind kind, const PerturbationConfig& cfg,
                                            const ScenarioSpec& spec, std::mt19937_64& rng) {
  switch (kind) {
    case perturb::PerturbationKind::None:
      return perturb::PerturbationSchedule::none();
    case perturb::PerturbationKind::Rand:
      return perturb::PerturbationSchedule::random(rng(), cfg.epsilon_bound);
    case perturb::PerturbationKind::OverTime:
      return perturb::make_ptb_over_time(rng, cfg.window, cfg.epsilon_bound);
    case perturb::PerturbationKind::TargetVehicles: {
      std::vector<int> targets;
      for (const auto& s : spec.spawns) {
        const bool take = cfg.targets == "all" || (cfg.targets == "ucv" && !s.connected) ||
                          (cfg.targets == "cav" && s.connected);
        if (take) targets.push_back(s.id);
      }
      if (targets.empty()) throw std::invalid_argument("perturbation target set '" + cfg.targets + "' is empty");
      return perturb::make_ptb_target_vehicles(rng, targets, cfg.epsilon_bound);
    }
  }
  return perturb::PerturbationSchedule::none();
}

EvalReport evaluate(const ScenarioSpec& spec, const HarnessConfig& cfg, const PolicyFactory& policies,
                    shield::ShieldMode mode, perturb::PerturbationKind kind, int n_episodes,
                    std::uint64_t seed, const std::function<void(const EpisodeLog&)>& on_episode) {
  if (n_episodes <= 0) throw std::invalid_argument("evaluation needs at least one episode");
  EvalReport report;
  report.scenario = spec.name;
  report.perturbation = perturb::to_string(kind);
  report.episodes = n_episodes;
  std::mt19937_64 master(seed);
  int clean = 0;
  double total = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    const std::uint64_t episode_seed = master();
    const std::uint64_t schedule_seed = master();
    const std::uint64_t policy_seed = master();
    std::mt19937_64 srng(schedule_seed);
    EpisodeSettings settings = marl::episode_settings(cfg, mode);
    settings.schedule = make_schedule(kind, cfg.perturbation, spec, srng);
    settings.record_observations = static_cast<bool>(on_episode);
    const std::unique_ptr<Policy> policy = policies(policy_seed);
    const EpisodeLog log = run_episode(spec, ScenarioMode::Test, *policy, settings, episode_seed);
    if (log.summary.collisions == 0) ++clean;
    total += log.summary.mean_return;
    report.episode_returns.push_back(log.summary.mean_return);
    report.episode_collisions.push_back(log.summary.collisions);
    if (on_episode) on_episode(log);
  }
  report.collision_free_rate = static_cast<double>(clean) / n_episodes;
  report.mean_episode_return = total / n_episodes;
  return report;
}

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, perturb::PerturbationKind kind, int n_episodes,
                               std::uint64_t seed, const std::function<void(const EpisodeLog&)>& on_episode) {
  const marl::Architecture arch = marl::architecture_for(ckpt.scenario, ckpt.config);
  const PolicyFactory factory = [&](std::uint64_t s) -> std::unique_ptr<Policy> {
    return std::make_unique<marl::MarlPolicy>(arch, ckpt.agents, marl::MarlPolicy::Mode::Greedy, 0.0, 1.0,
                                              ckpt.config.comm_range, s);
  };
  return evaluate(ckpt.scenario, ckpt.config, factory, ckpt.shield, kind, n_episodes, seed, on_episode);
}

std::string format_table_text(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %-6s %10s %16s\n", "scenario", "ptb", "collfree", "mean_return");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-14s %-6s %9.1f%% %16.2f\n", r.scenario.c_str(), r.perturbation.c_str(),
                  100.0 * r.collision_free_rate, r.mean_episode_return);
    out << line;
  }
  return out.str();
}

std::string format_table_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "scenario,perturbation,episodes,collision_free_rate,mean_episode_return\n";
  for (const auto& r : reports)
    out << r.scenario << ',' << r.perturbation << ',' << r.episodes << ',' << fixed(r.collision_free_rate, 6)
        << ',' << fixed(r.mean_episode_return, 6) << '\n';
  return out.str();
}

std::string format_scatter_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "scenario,perturbation,episode,return,collisions\n";
  for (const auto& r : reports)
    for (std::size_t e = 0; e < r.episode_returns.size(); ++e)
      out << r.scenario << ',' << r.perturbation << ',' << e << ',' << fixed(r.episode_returns[e], 6) << ','
          << r.episode_collisions[e] << '\n';
  return out.str();
}

}  // namespace cavsafe::harness
